"""Quaternion and axis-angle rotation math.

Quaternions are scalar-first ``(w, x, y, z)`` everywhere in this library.
Scalar helpers operate on plain floats/arrays; the ``*_diff`` variants are
batched and participate in the autodiff graph (used by the splat renderer).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import DiffcoreError, Tensor, custom_op


@dataclass(frozen=True)
class Quaternion:
    """Unit rotation quaternion, scalar-first."""

    w: float
    x: float
    y: float
    z: float

    def norm(self) -> float:
        return float(np.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2))

    def normalized(self) -> "Quaternion":
        n = self.norm()
        if n == 0.0:
            raise DiffcoreError("cannot normalize an all-zero quaternion")
        return Quaternion(self.w / n, self.x / n, self.y / n, self.z / n)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])


def quat_to_rotmat(q: Quaternion) -> np.ndarray:
    """3x3 rotation matrix of ``q`` (normalized internally)."""
    w, x, y, z = q.normalized().as_array()
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def axis_angle_to_quat(v) -> Quaternion:
    """Axis-angle vector (angle = magnitude, radians) to unit quaternion."""
    v = np.asarray(v, dtype=np.float64)
    theta = float(np.linalg.norm(v))
    if theta < 1e-12:
        return Quaternion(1.0, 0.0, 0.0, 0.0)
    s = np.sin(theta / 2.0) / theta
    return Quaternion(float(np.cos(theta / 2.0)), *(v * s))


def rodrigues(v) -> np.ndarray:
    """Rotation matrix of an axis-angle vector via the Rodrigues formula."""
    v = np.asarray(v, dtype=np.float64)
    theta = np.linalg.norm(v)
    if theta < 1e-12:
        return np.eye(3)
    k = v / theta
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(theta) * kx + (1 - np.cos(theta)) * (kx @ kx)


# -- differentiable batched forms ----------------------------------------


def _cos_half_sq(u: Tensor) -> Tensor:
    """cos(sqrt(u)/2) as a function of u = theta^2, smooth at u = 0."""
    x = u.data
    th = np.sqrt(np.maximum(x, 0.0))
    out = np.cos(th / 2.0)
    # d/du cos(th/2) = -sin(th/2)/(4*th) = -half_sinc(u)/4
    d = -_half_sinc_vals(x) / 4.0
    return custom_op(out, (u,), lambda g: (g * d,), "cos_half_sq")


def _half_sinc_vals(u: np.ndarray) -> np.ndarray:
    th = np.sqrt(np.maximum(u, 0.0))
    small = u < 1e-8
    safe = np.where(small, 1.0, th)
    return np.where(small, 0.5 - u / 48.0, np.sin(safe / 2.0) / safe)


def _half_sinc_sq(u: Tensor) -> Tensor:
    """sin(sqrt(u)/2)/sqrt(u) as a function of u = theta^2, smooth at u = 0."""
    x = u.data
    out = _half_sinc_vals(x)
    th = np.sqrt(np.maximum(x, 0.0))
    small = x < 1e-8
    safe = np.where(small, 1.0, x)
    d = np.where(
        small,
        -1.0 / 48.0 + x / 1920.0,
        np.cos(th / 2.0) / (4.0 * safe) - np.sin(th / 2.0) / (2.0 * safe * np.sqrt(safe)),
    )
    return custom_op(out, (u,), lambda g: (g * d,), "half_sinc_sq")


def quats_from_axis_angles(v: Tensor) -> Tensor:
    """(N, 3) axis-angle vectors -> (N, 4) unit quaternions, differentiable."""
    u = (v * v).sum(axis=1)
    w = _cos_half_sq(u)
    s = _half_sinc_sq(u)
    xyz = v * s.reshape(-1, 1)
    return T.concatenate([w.reshape(-1, 1), xyz], axis=1)


def normalize_quats(q: Tensor) -> Tensor:
    """(N, 4) -> unit quaternions; rejects all-zero rows."""
    n2 = (q * q).sum(axis=1)
    if np.any(n2.data < 1e-24):
        raise DiffcoreError("degenerate all-zero quaternion")
    inv = T.power(T.sqrt(n2), -1.0)
    return q * inv.reshape(-1, 1)


def rotmats_from_quats(q: Tensor) -> Tensor:
    """(N, 4) quaternions -> (N, 3, 3) rotation matrices (normalized internally)."""
    qn = normalize_quats(q)
    w, x, y, z = qn[:, 0], qn[:, 1], qn[:, 2], qn[:, 3]
    rows = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
    return T.stack([T.stack(r, axis=1) for r in rows], axis=1)
