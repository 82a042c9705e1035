"""Ground-truth rendering of the toy dataset: multiview PNGs + manifest.

The "photographs" are reference-rendered splat clouds built directly from
the dataset geometry and albedo, which keeps ground truth independent of the
trainable models.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..gsplat import GaussianCloud
from ..gsplat.rasterize import rasterize_reference
from ..morphable import Geometry
from .imageio import save_png
from .rig import CameraRig
from .toyhead import ToyDataset

MANIFEST_VERSION = 1


def _sigmoid_inv(x):
    return np.log(x / (1.0 - x))


def dataset_cloud(dataset: ToyDataset, identity: int, expression: int | np.ndarray,
                  opacity: float = 0.93) -> GaussianCloud:
    """Splat cloud of one dataset sample: vertex positions, albedo colors.

    ``expression`` is a grid slot (0 = neutral, 1..52) or a 52-weight vector
    applied to the per-identity fields.
    """
    if np.isscalar(expression):
        positions = dataset.geometry[identity, int(expression)].copy()
    else:
        weights = np.asarray(expression, dtype=np.float64)
        deltas = dataset.geometry[identity, 1:] - dataset.geometry[identity, 0]
        positions = dataset.geometry[identity, 0] + np.einsum("e,evc->vc", weights, deltas)
    geom = Geometry(positions, dataset.triangles, dataset.uv, dataset.labels)
    return cloud_from_geometry(geom, dataset.albedos[identity], opacity)


def cloud_from_geometry(geom: Geometry, albedo: np.ndarray, opacity: float = 0.93) -> GaussianCloud:
    """Vertex splats colored by the albedo texture, sized by local spacing."""
    res = albedo.shape[0]
    px = np.clip((geom.uv * (res - 1)).round().astype(int), 0, res - 1)
    colors = albedo[px[:, 1], px[:, 0]]
    # isotropic splats at roughly the mean incident edge length
    edges = geom.positions[geom.triangles[:, 1]] - geom.positions[geom.triangles[:, 0]]
    spacing = np.linalg.norm(edges, axis=1).mean() if len(edges) else 0.01
    n = geom.num_points
    return GaussianCloud(
        mu=geom.positions.copy(),
        scale=np.full((n, 3), 0.6 * spacing),
        quat=np.tile([1.0, 0.0, 0.0, 0.0], (n, 1)),
        opacity=np.full(n, opacity),
        color=np.clip(colors, 1e-4, 1.0 - 1e-4),
        labels=geom.labels.copy(),
    )


def render_gt(dataset: ToyDataset, rig: CameraRig, out_dir,
              identities=None, expressions=None, background=(1.0, 1.0, 1.0)) -> dict:
    """Render identity x expression x camera ground truth; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    identities = range(dataset.spec.identities) if identities is None else identities
    expressions = range(dataset.spec.expressions + 1) if expressions is None else expressions
    rows = []
    for i in identities:
        for e in expressions:
            cloud = dataset_cloud(dataset, i, e)
            for c, cam in enumerate(rig.cameras):
                img = rasterize_reference(cloud, cam, background)
                name = f"id{i:03d}_ex{e:03d}_cam{c:03d}.png"
                save_png(out / name, img.rgb)
                rows.append({
                    "file": name, "identity": int(i), "expression": int(e), "camera": int(c),
                    "camera_params": cam.to_dict(),
                })
    manifest = {
        "version": MANIFEST_VERSION,
        "spec": {"identities": dataset.spec.identities, "expressions": dataset.spec.expressions,
                 "seed": dataset.spec.seed},
        "background": list(background),
        "images": rows,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return manifest
