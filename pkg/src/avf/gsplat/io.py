"""Binary export of Gaussian clouds.

Layout (little-endian): magic ``AVGC``, uint32 version=1, uint64 count, then
``count`` records of 14 float64s each: position(3), scale(3), quaternion
wxyz(4), opacity(1), color rgb(3).  A trailing uint8 array carries the part
labels.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .attributes import GaussianCloud

MAGIC = b"AVGC"


def save_cloud(path, cloud: GaussianCloud) -> None:
    n = cloud.num_splats
    records = np.concatenate(
        [
            cloud.mu.data,
            cloud.scale.data,
            cloud.quat.data,
            cloud.opacity.data[:, None],
            cloud.color.data,
        ],
        axis=1,
    ).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", 1, n))
        fh.write(records.tobytes())
        fh.write(cloud.labels.astype(np.uint8).tobytes())


def load_cloud(path) -> GaussianCloud:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise ValueError("not a splat cloud file")
    version, n = struct.unpack_from("<IQ", blob, 4)
    if version != 1:
        raise ValueError(f"unsupported cloud version {version}")
    off = 4 + 12
    records = np.frombuffer(blob, dtype="<f8", count=n * 14, offset=off).reshape(n, 14)
    labels = np.frombuffer(blob, dtype=np.uint8, count=n, offset=off + n * 14 * 8)
    return GaussianCloud(
        mu=records[:, 0:3].copy(),
        scale=records[:, 3:6].copy(),
        quat=records[:, 6:10].copy(),
        opacity=records[:, 10].copy(),
        color=records[:, 11:14].copy(),
        labels=labels.copy(),
    )
