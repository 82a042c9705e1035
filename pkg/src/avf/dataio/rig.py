"""Head-centric virtual camera rig: 3 pitch rings x 24 yaw stops by default."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..camera import Camera, look_at_camera

DEFAULT_PITCHES_DEG = (-15.0, 0.0, 15.0)
DEFAULT_YAW_COUNT = 24
DEFAULT_RADIUS = 1.2


@dataclass
class CameraRig:
    cameras: list[Camera]
    pitches_deg: tuple
    yaw_count: int
    radius: float
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __len__(self) -> int:
        return len(self.cameras)

    def index(self, pitch_idx: int, yaw_idx: int) -> int:
        return pitch_idx * self.yaw_count + yaw_idx


def orbit_camera(yaw_deg: float, pitch_deg: float, radius: float, center,
                 focal: float, size: int, near: float = 0.05, far: float = 10.0) -> Camera:
    """Camera on the orbit sphere looking at the head center.

    yaw 0 faces the head front (-z side in world), positive pitch looks down
    from above.
    """
    yaw = np.deg2rad(yaw_deg)
    pitch = np.deg2rad(pitch_deg)
    center = np.asarray(center, dtype=np.float64)
    offset = radius * np.array(
        [np.sin(yaw) * np.cos(pitch), np.sin(pitch), -np.cos(yaw) * np.cos(pitch)]
    )
    return look_at_camera(center + offset, center, focal=focal, width=size, height=size,
                          near=near, far=far)


def make_rig(
    pitches_deg=DEFAULT_PITCHES_DEG,
    yaw_count: int = DEFAULT_YAW_COUNT,
    radius: float = DEFAULT_RADIUS,
    center=(0.0, 0.0, 0.0),
    focal: float | None = None,
    size: int = 128,
) -> CameraRig:
    """Uniform yaw ring per pitch; yaw spacing is 360/yaw_count degrees."""
    if focal is None:
        focal = 1.8 * size  # head fills roughly half the frame at the default radius
    cams = []
    for pitch in pitches_deg:
        for k in range(yaw_count):
            cams.append(orbit_camera(360.0 * k / yaw_count, pitch, radius, center, focal, size))
    return CameraRig(cams, tuple(pitches_deg), yaw_count, radius, np.asarray(center, dtype=np.float64))
