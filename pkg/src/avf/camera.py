"""Pinhole cameras and rendered-image buffers shared by every renderer.

Convention: OpenCV-style camera frame (x right, y down, z forward).  A world
point X maps to the camera frame as ``x = R @ X + t`` and to the image plane
as ``u = f * x/z + cx``, ``v = f * y/z + cy`` with pixel (i, j) covering the
unit square centered at (j + 0.5, i + 0.5).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Camera:
    focal: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray  # (3, 3) world-to-camera
    translation: np.ndarray  # (3,)
    near: float = 0.05
    far: float = 100.0

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64)
        if self.focal <= 0:
            raise ValueError("focal length must be positive")
        if not self.near < self.far:
            raise ValueError("near plane must be in front of far plane")
        if np.abs(self.rotation @ self.rotation.T - np.eye(3)).max() > 1e-6:
            raise ValueError("rotation part must be orthonormal")

    @property
    def position(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def world_to_cam(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation.T + self.translation

    def project(self, points: np.ndarray) -> np.ndarray:
        """World points (N, 3) -> pixel coordinates (N, 2); no culling."""
        pc = self.world_to_cam(np.atleast_2d(points))
        z = pc[:, 2]
        return np.stack(
            [self.focal * pc[:, 0] / z + self.cx, self.focal * pc[:, 1] / z + self.cy], axis=1
        )

    def pixel_rays(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-pixel world-space ray origins (1, 3 broadcastable) and unit directions (H*W, 3)."""
        js, is_ = np.meshgrid(np.arange(self.width), np.arange(self.height))
        u = (js.reshape(-1) + 0.5 - self.cx) / self.focal
        v = (is_.reshape(-1) + 0.5 - self.cy) / self.focal
        dirs_cam = np.stack([u, v, np.ones_like(u)], axis=1)
        dirs = dirs_cam @ self.rotation  # R^T applied row-wise
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        origin = self.position
        return np.broadcast_to(origin, dirs.shape), dirs

    def to_dict(self) -> dict:
        return {
            "focal": self.focal,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
            "near": self.near,
            "far": self.far,
        }

    @staticmethod
    def from_dict(d: dict) -> "Camera":
        return Camera(
            focal=d["focal"], cx=d["cx"], cy=d["cy"], width=d["width"], height=d["height"],
            rotation=np.array(d["rotation"]), translation=np.array(d["translation"]),
            near=d.get("near", 0.05), far=d.get("far", 100.0),
        )


def look_at_camera(
    position: np.ndarray,
    target: np.ndarray,
    focal: float,
    width: int,
    height: int,
    up: np.ndarray | None = None,
    near: float = 0.05,
    far: float = 100.0,
) -> Camera:
    """Camera at ``position`` whose optical axis passes through ``target``."""
    position = np.asarray(position, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    fwd = target - position
    fwd = fwd / np.linalg.norm(fwd)
    up = np.array([0.0, 1.0, 0.0]) if up is None else np.asarray(up, dtype=np.float64)
    right = np.cross(fwd, up)
    if np.linalg.norm(right) < 1e-9:  # looking straight along up
        up = np.array([0.0, 0.0, 1.0])
        right = np.cross(fwd, up)
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    rotation = np.stack([right, down, fwd], axis=0)
    translation = -rotation @ position
    return Camera(
        focal=focal, cx=width / 2.0, cy=height / 2.0, width=width, height=height,
        rotation=rotation, translation=translation, near=near, far=far,
    )


@dataclass
class RenderedImage:
    """RGB in [0, 1], alpha coverage, optional per-pixel expected depth."""

    rgb: np.ndarray  # (H, W, 3)
    alpha: np.ndarray  # (H, W)
    depth: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.isfinite(self.rgb).all():
            raise ValueError("non-finite color channel")
        if self.alpha.min() < -1e-9 or self.alpha.max() > 1.0 + 1e-9:
            raise ValueError("alpha outside [0, 1]")

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]
