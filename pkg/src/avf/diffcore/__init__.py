"""Minimal reverse-mode autodiff plus the rotation/activation math shared by all renderers."""

from . import tensor as ops
from .gradcheck import finite_difference_grads, gradcheck, max_gradcheck_error
from .nn import (
    MlpWeights,
    bilinear_sample,
    mlp_forward,
    mlp_init,
    positional_encoding,
    softplus_scale,
    tanh_offset,
)
from .optim import Adam
from .rotation import (
    Quaternion,
    axis_angle_to_quat,
    normalize_quats,
    quat_to_rotmat,
    quats_from_axis_angles,
    rodrigues,
    rotmats_from_quats,
)
from .tensor import DiffcoreError, GradientNanError, Tensor, as_tensor, backward, custom_op

__all__ = [
    "Adam",
    "DiffcoreError",
    "GradientNanError",
    "MlpWeights",
    "Quaternion",
    "Tensor",
    "as_tensor",
    "axis_angle_to_quat",
    "backward",
    "bilinear_sample",
    "custom_op",
    "finite_difference_grads",
    "gradcheck",
    "max_gradcheck_error",
    "mlp_forward",
    "mlp_init",
    "normalize_quats",
    "ops",
    "positional_encoding",
    "quat_to_rotmat",
    "quats_from_axis_angles",
    "rodrigues",
    "rotmats_from_quats",
    "softplus_scale",
    "tanh_offset",
]
