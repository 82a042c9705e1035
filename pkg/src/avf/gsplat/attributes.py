"""UV attribute maps and the Gaussian clouds sampled from them.

The 26-channel map stores raw (pre-activation) values, 13 per part:

====== =========================
0..2   color (sigmoid -> [0,1])
3..5   scale (softplus * base)
6..8   rotation, axis-angle
9      opacity (sigmoid)
10..12 position offset (tanh * bound); identically zero for the head block
====== =========================

Head occupies channels 0..12, hair 13..25.  Splat positions come from the
point-based bilinear model; only hair splats may leave the surface, through
the bounded offset.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..diffcore import (
    Tensor,
    quats_from_axis_angles,
    rotmats_from_quats,
    softplus_scale,
    tanh_offset,
)
from ..diffcore import tensor as ops
from ..morphable import HAIR, Geometry

NUM_CHANNELS = 26
PART_BLOCK = 13
CH_COLOR = slice(0, 3)
CH_SCALE = slice(3, 6)
CH_ROTATION = slice(6, 9)
CH_OPACITY = 9
CH_OFFSET = slice(10, 13)

# activation calibration, as fractions of the head bounding-box diagonal
SCALE_BASE_FRACTION = 0.01
OFFSET_BOUND_FRACTION = 0.05


class GsplatError(ValueError):
    pass


@dataclass
class AttributeMaps:
    """Raw 26-channel UV attribute image plus its activation calibration."""

    data: Tensor  # (H, W, 26)
    scale_base: float
    offset_bound: float

    def __post_init__(self):
        if not isinstance(self.data, Tensor):
            self.data = Tensor(np.asarray(self.data, dtype=np.float64))
        if self.data.ndim != 3 or self.data.shape[2] != NUM_CHANNELS:
            raise GsplatError(f"attribute maps need {NUM_CHANNELS} channels, got shape {self.data.shape}")
        if not np.isfinite(self.data.data).all():
            raise GsplatError("non-finite attribute map")
        head_offsets = self.data.data[:, :, CH_OFFSET]
        if np.abs(head_offsets).max(initial=0.0) > 0.0:
            raise GsplatError("head offset channels must be identically zero")

    @property
    def resolution(self) -> tuple[int, int]:
        return self.data.shape[0], self.data.shape[1]

    def raw_scale_channels(self) -> Tensor:
        """Both parts' raw scale blocks, for the scale regularizer."""
        idx = np.r_[np.arange(3, 6), np.arange(PART_BLOCK + 3, PART_BLOCK + 6)]
        return self.data[:, :, idx]

    def raw_offset_channels(self) -> Tensor:
        """The hair offset block (head offsets are structurally zero)."""
        idx = np.arange(PART_BLOCK + 10, PART_BLOCK + 13)
        return self.data[:, :, idx]

    @staticmethod
    def zeros(resolution: int, scale_base: float, offset_bound: float,
              requires_grad: bool = False) -> "AttributeMaps":
        t = Tensor(np.zeros((resolution, resolution, NUM_CHANNELS)), requires_grad=requires_grad)
        return AttributeMaps(t, scale_base, offset_bound)

    @staticmethod
    def for_geometry(geometry: Geometry, resolution: int, requires_grad: bool = False) -> "AttributeMaps":
        diag = geometry.bounding_box_diagonal()
        return AttributeMaps.zeros(
            resolution, SCALE_BASE_FRACTION * diag, OFFSET_BOUND_FRACTION * diag, requires_grad
        )


@dataclass
class GaussianCloud:
    """Per-splat attributes; fields are diffcore tensors so renders stay differentiable."""

    mu: Tensor  # (N, 3)
    scale: Tensor  # (N, 3), positive
    quat: Tensor  # (N, 4), normalized on use
    opacity: Tensor  # (N,), in (0, 1)
    color: Tensor  # (N, 3), in [0, 1]
    labels: np.ndarray = field(default=None)  # (N,) part labels, optional

    def __post_init__(self):
        for name in ("mu", "scale", "quat", "opacity", "color"):
            v = getattr(self, name)
            if not isinstance(v, Tensor):
                setattr(self, name, Tensor(np.asarray(v, dtype=np.float64)))
        if self.labels is None:
            self.labels = np.zeros(self.mu.shape[0], np.uint8)
        if self.scale.data.min(initial=1.0) <= 0.0:
            raise GsplatError("splat scales must be strictly positive")

    @property
    def num_splats(self) -> int:
        return self.mu.shape[0]

    def validate_finite(self) -> None:
        for name in ("mu", "scale", "quat", "opacity", "color"):
            if not np.isfinite(getattr(self, name).data).all():
                raise GsplatError(f"NaN/inf in splat attribute '{name}'")


def sample_attributes(maps: AttributeMaps, points: Geometry) -> GaussianCloud:
    """Sample per-point splat attributes from the UV maps.

    Differentiable w.r.t. the map values.  Head splats sit exactly on their
    bilinear-model positions; hair splats add the tanh-bounded offset.
    """
    from ..diffcore.nn import bilinear_sample

    uv = np.asarray(points.uv, dtype=np.float64)
    raw = bilinear_sample(maps.data, Tensor(uv))  # (P, 26)
    hair = points.labels.astype(bool)
    hair_col = hair[:, None]

    def pick(sl):
        head_block = raw[:, sl]
        hair_block = raw[:, np.arange(PART_BLOCK)[sl] + PART_BLOCK]
        return ops.where(hair_col, hair_block, head_block)

    color = ops.sigmoid(pick(CH_COLOR))
    scale = softplus_scale(pick(CH_SCALE), maps.scale_base)
    quat = quats_from_axis_angles(pick(CH_ROTATION))
    opacity = ops.sigmoid(pick(slice(CH_OPACITY, CH_OPACITY + 1)))[:, 0]
    offset = tanh_offset(raw[:, np.arange(PART_BLOCK)[CH_OFFSET] + PART_BLOCK], maps.offset_bound)
    offset = ops.where(hair_col, offset, ops.as_tensor(np.zeros_like(offset.data)))
    mu = offset + points.positions
    return GaussianCloud(mu, scale, quat, opacity, color, labels=points.labels.copy())


def build_covariance(scale, quat) -> np.ndarray:
    """Sigma = R S S^T R^T for one splat (plain numpy contract form)."""
    from ..diffcore import Quaternion, quat_to_rotmat

    s = np.asarray(scale, dtype=np.float64).reshape(3)
    if s.min() <= 0:
        raise GsplatError("non-positive scale")
    if not isinstance(quat, Quaternion):
        quat = Quaternion(*np.asarray(quat, dtype=np.float64).reshape(4))
    r = quat_to_rotmat(quat)
    return (r * s**2) @ r.T


def covariances(cloud: GaussianCloud) -> Tensor:
    """Batched differentiable Sigma = R S S^T R^T, shape (N, 3, 3)."""
    r = rotmats_from_quats(cloud.quat)
    s2 = (cloud.scale * cloud.scale).reshape(-1, 1, 3)
    return ops.matmul(r * s2, ops.transpose(r, (0, 2, 1)))
