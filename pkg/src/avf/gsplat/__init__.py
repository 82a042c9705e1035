"""Point-based head representation: UV-sampled Gaussian splats with a differentiable rasterizer."""

from .attributes import (
    CH_COLOR,
    CH_OFFSET,
    CH_OPACITY,
    CH_ROTATION,
    CH_SCALE,
    NUM_CHANNELS,
    PART_BLOCK,
    AttributeMaps,
    GaussianCloud,
    GsplatError,
    build_covariance,
    covariances,
    sample_attributes,
)
from .io import load_cloud, save_cloud
from .kernels import HAVE_COMPILED, USE_COMPILED, backend_name
from .rasterize import (
    DEFAULT_BACKGROUND,
    project_gaussian,
    rasterize,
    rasterize_backward,
    rasterize_reference,
    render_splats,
)

__all__ = [
    "AttributeMaps",
    "CH_COLOR",
    "CH_OFFSET",
    "CH_OPACITY",
    "CH_ROTATION",
    "CH_SCALE",
    "DEFAULT_BACKGROUND",
    "GaussianCloud",
    "GsplatError",
    "HAVE_COMPILED",
    "NUM_CHANNELS",
    "PART_BLOCK",
    "USE_COMPILED",
    "backend_name",
    "build_covariance",
    "covariances",
    "load_cloud",
    "project_gaussian",
    "rasterize",
    "rasterize_backward",
    "rasterize_reference",
    "render_splats",
    "sample_attributes",
    "save_cloud",
]
