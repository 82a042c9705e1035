"""Toy dataset generation, the camera rig and all persistence."""

from .container import ContainerError, decode_arrays, encode_arrays, load_container, save_container
from .imageio import load_png, load_rawf, save_png, save_rawf, to_uint8
from .render import cloud_from_geometry, dataset_cloud, render_gt
from .rig import CameraRig, make_rig, orbit_camera
from .toyhead import (
    BLENDSHAPE_NAMES,
    DataError,
    DatasetSpec,
    HairStyle,
    ToyDataset,
    expression_field,
    gen_toy_dataset,
    make_hair_catalog,
    smooth_window,
)

__all__ = [
    "BLENDSHAPE_NAMES",
    "CameraRig",
    "ContainerError",
    "DataError",
    "DatasetSpec",
    "HairStyle",
    "ToyDataset",
    "cloud_from_geometry",
    "dataset_cloud",
    "decode_arrays",
    "encode_arrays",
    "expression_field",
    "gen_toy_dataset",
    "load_container",
    "load_png",
    "load_rawf",
    "make_hair_catalog",
    "make_rig",
    "orbit_camera",
    "render_gt",
    "save_container",
    "save_png",
    "save_rawf",
    "smooth_window",
    "to_uint8",
]
