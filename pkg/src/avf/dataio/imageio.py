"""Image persistence: 8-bit sRGB-tagged PNG and raw float32 dumps.

The raw dump format ("AVFR"): magic, u32 height, u32 width, u32 channels,
then float32 data in row-major order, little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image
from PIL.PngImagePlugin import PngInfo

RAW_MAGIC = b"AVFR"


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)


def save_png(path, img: np.ndarray) -> None:
    """Write an (H, W, 3) float image in [0, 1] as an sRGB-tagged 8-bit PNG."""
    info = PngInfo()
    info.add(b"sRGB", b"\x00")  # rendering intent: perceptual
    Image.fromarray(to_uint8(img), mode="RGB").save(path, format="PNG", pnginfo=info)


def load_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def save_rawf(path, img: np.ndarray) -> None:
    img = np.atleast_3d(np.asarray(img, dtype=np.float32))
    h, w, c = img.shape
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC)
        fh.write(struct.pack("<III", h, w, c))
        fh.write(img.astype("<f4").tobytes())


def load_rawf(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:4] != RAW_MAGIC:
        raise ValueError("not an AVFR raw image")
    h, w, c = struct.unpack_from("<III", blob, 4)
    return np.frombuffer(blob, dtype="<f4", count=h * w * c, offset=16).reshape(h, w, c).astype(np.float64)
