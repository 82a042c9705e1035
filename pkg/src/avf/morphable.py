"""Bilinear blendshape head model.

A registered grid of head geometries (identities x expressions, shared
topology) is factored into a core tensor ``C`` of shape
``(V*3, id_rank + 1, 53)``: slot 0 of the identity axis carries the mean /
per-expression mean deltas, slot 0 of the expression axis is the neutral
pose.  Evaluating at shape code ``beta`` and 52 blendshape weights ``eps``
contracts ``C`` with ``[1, beta]`` and ``[1, eps]``, so positions are affine
in each code with the other fixed.

Identity PCA runs on the neutral-expression geometry; the 52 expression
deltas are regressed linearly against the identity coordinates, which makes
full-rank training pairs reproduce exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .diffcore import Tensor, bilinear_sample
from .diffcore import tensor as ops

HEAD = 0
HAIR = 1
NUM_EXPRESSIONS = 52


class MorphableError(ValueError):
    pass


@dataclass
class Geometry:
    """Evaluated vertex/point positions with the model's fixed attributes."""

    positions: np.ndarray  # (N, 3) meters
    triangles: np.ndarray  # (T, 3) int, empty for bare point clouds
    uv: np.ndarray  # (N, 2)
    labels: np.ndarray  # (N,) HEAD/HAIR

    def __post_init__(self):
        if not np.isfinite(self.positions).all():
            raise MorphableError("non-finite vertex positions")

    @property
    def num_points(self) -> int:
        return self.positions.shape[0]

    def bounding_box_diagonal(self) -> float:
        return float(np.linalg.norm(self.positions.max(0) - self.positions.min(0)))


@dataclass
class PointSampling:
    """Barycentric attachment of a point set to the mesh topology.

    Points follow the deforming surface exactly: a point is the barycentric
    combination of its triangle's (current) vertex positions.
    """

    tri_index: np.ndarray  # (P,) int
    bary: np.ndarray  # (P, 3) nonnegative, rows sum to 1
    uv: np.ndarray  # (P, 2) interpolated once from the rest mesh
    labels: np.ndarray  # (P,)


@dataclass
class BilinearModel:
    core: np.ndarray  # (V*3, id_rank + 1, 53)
    triangles: np.ndarray  # (T, 3)
    uv: np.ndarray  # (V, 2)
    labels: np.ndarray  # (V,)
    landmark_indices: np.ndarray  # (L,)
    identity_basis: np.ndarray = field(repr=False, default=None)  # (V*3, id_rank), orthonormal
    training_betas: np.ndarray = field(repr=False, default=None)  # (I, id_rank)

    def __post_init__(self):
        if self.uv.min() < -1e-12 or self.uv.max() > 1.0 + 1e-12:
            raise MorphableError("uv coordinates must lie in the unit square")
        nv = self.uv.shape[0]
        if self.core.shape[0] != nv * 3 or self.core.shape[2] != NUM_EXPRESSIONS + 1:
            raise MorphableError(f"core tensor shape {self.core.shape} inconsistent with {nv} vertices")
        if self.landmark_indices.min(initial=0) < 0 or self.landmark_indices.max(initial=0) >= nv:
            raise MorphableError("landmark indices out of range")

    @property
    def num_vertices(self) -> int:
        return self.uv.shape[0]

    @property
    def id_rank(self) -> int:
        return self.core.shape[1] - 1

    @property
    def mean_neutral(self) -> np.ndarray:
        return self.core[:, 0, 0].reshape(-1, 3)


def build_bilinear(
    samples: np.ndarray,
    id_rank: int,
    *,
    triangles: np.ndarray,
    uv: np.ndarray,
    labels: np.ndarray,
    landmark_indices: np.ndarray,
) -> BilinearModel:
    """Factor a registered geometry grid into a bilinear model.

    ``samples`` has shape (identities, 53, V, 3) with expression slot 0 the
    neutral pose; all grids must share ``triangles``/``uv``/``labels``.
    The training identities' shape codes are kept on the model.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 4 or samples.shape[1] != NUM_EXPRESSIONS + 1:
        raise MorphableError(f"expected (I, 53, V, 3) sample grid, got {samples.shape}")
    n_id, _, nv, _ = samples.shape
    if nv != np.asarray(uv).shape[0]:
        raise MorphableError("sample vertex count does not match uv table")
    if not 1 <= id_rank <= n_id:
        raise MorphableError(f"id_rank {id_rank} out of range for {n_id} identities")

    neutral = samples[:, 0].reshape(n_id, nv * 3)
    mean = neutral.mean(axis=0)
    centered = neutral - mean
    # PCA of neutral geometry; rows of vt are orthonormal identity directions
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    ortho = vt[:id_rank].T
    betas = centered @ ortho  # (I, id_rank); exact coords when id_rank >= data rank

    deltas = samples[:, 1:].reshape(n_id, NUM_EXPRESSIONS, nv * 3) - neutral[:, None, :]
    design = np.concatenate([np.ones((n_id, 1)), betas], axis=1)  # (I, id_rank + 1)
    core = np.zeros((nv * 3, id_rank + 1, NUM_EXPRESSIONS + 1))
    core[:, 0, 0] = mean
    core[:, 1:, 0] = ortho
    for e in range(NUM_EXPRESSIONS):
        coef, *_ = np.linalg.lstsq(design, deltas[:, e], rcond=None)
        core[:, :, e + 1] = coef.T
    return BilinearModel(
        core=core,
        triangles=np.asarray(triangles, dtype=np.int64),
        uv=np.asarray(uv, dtype=np.float64),
        labels=np.asarray(labels, dtype=np.uint8),
        landmark_indices=np.asarray(landmark_indices, dtype=np.int64),
        identity_basis=ortho,
        training_betas=betas,
    )


def _check_codes(model: BilinearModel, beta: np.ndarray, eps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    beta = np.asarray(beta, dtype=np.float64).reshape(-1)
    eps = np.asarray(eps, dtype=np.float64).reshape(-1)
    if beta.shape[0] != model.id_rank:
        raise MorphableError(f"beta dimension {beta.shape[0]} != id_rank {model.id_rank}")
    if eps.shape[0] != NUM_EXPRESSIONS:
        raise MorphableError(f"expression code must have {NUM_EXPRESSIONS} entries")
    return beta, eps


def eval_mesh(model: BilinearModel, beta, eps) -> Geometry:
    """Evaluate the mesh at shape code ``beta`` and blendshape weights ``eps``."""
    beta, eps = _check_codes(model, beta, eps)
    btil = np.concatenate([[1.0], beta])
    etil = np.concatenate([[1.0], eps])
    pos = (model.core @ etil) @ btil
    return Geometry(pos.reshape(-1, 3), model.triangles, model.uv, model.labels)


def eval_points(model: BilinearModel, beta, eps, sampling: PointSampling | None = None) -> Geometry:
    """Point-cloud view of the model; barycentric points ride the surface."""
    mesh = eval_mesh(model, beta, eps)
    if sampling is None:
        return Geometry(mesh.positions, np.empty((0, 3), np.int64), model.uv, model.labels)
    tri = model.triangles[sampling.tri_index]  # (P, 3)
    pos = np.einsum("pk,pkc->pc", sampling.bary, mesh.positions[tri])
    return Geometry(pos, np.empty((0, 3), np.int64), sampling.uv, sampling.labels)


def point_basis(model: BilinearModel, beta, sampling: PointSampling | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Affine map eps -> positions at fixed beta: returns (base (P*3,), M (P*3, 52)).

    Used to differentiate point positions w.r.t. expression weights.
    """
    beta = np.asarray(beta, dtype=np.float64).reshape(-1)
    btil = np.concatenate([[1.0], beta])
    per_expr = np.einsum("vke,k->ve", model.core, btil)  # (V*3, 53)
    base, deltas = per_expr[:, 0], per_expr[:, 1:]
    if sampling is not None:
        tri = model.triangles[sampling.tri_index]
        weights = np.zeros((sampling.tri_index.shape[0], model.num_vertices))
        for k in range(3):
            np.add.at(weights, (np.arange(tri.shape[0]), tri[:, k]), sampling.bary[:, k])
        lift = np.kron(weights, np.eye(3))
        base = lift @ base
        deltas = lift @ deltas
    return base, deltas


def landmarks3d(model: BilinearModel, beta, eps) -> np.ndarray:
    """3D positions of the canonical landmark vertex set."""
    mesh = eval_mesh(model, beta, eps)
    return mesh.positions[model.landmark_indices]


def make_point_sampling(model: BilinearModel, points_per_triangle: float, seed: int) -> PointSampling:
    """Stratified barycentric upsampling, density proportional to triangle area.

    The sampled set always includes the mesh vertices themselves so that the
    no-upsampling case degenerates to the vertex cloud.
    """
    rest = model.mean_neutral
    tris = model.triangles
    v0, v1, v2 = rest[tris[:, 0]], rest[tris[:, 1]], rest[tris[:, 2]]
    areas = 0.5 * np.linalg.norm(np.cross(v1 - v0, v2 - v0), axis=1)
    rng = np.random.default_rng(seed)
    counts = rng.poisson(points_per_triangle * areas / max(areas.mean(), 1e-12))

    tri_index = [np.zeros(0, np.int64)]
    bary = [np.zeros((0, 3))]
    # vertex-anchored points: each vertex attached to one incident triangle
    vert_tri = np.full(model.num_vertices, -1, np.int64)
    for t, tri in enumerate(tris):
        for v in tri:
            if vert_tri[v] < 0:
                vert_tri[v] = t
    owned = vert_tri >= 0
    vidx = np.nonzero(owned)[0]
    vb = np.zeros((vidx.size, 3))
    for k in range(3):
        vb[tris[vert_tri[vidx], k] == vidx, k] = 1.0
    tri_index.append(vert_tri[vidx])
    bary.append(vb)

    for t, n in enumerate(counts):
        if n <= 0:
            continue
        r1 = np.sqrt(rng.uniform(size=n))
        r2 = rng.uniform(size=n)
        b = np.stack([1.0 - r1, r1 * (1.0 - r2), r1 * r2], axis=1)
        tri_index.append(np.full(n, t, np.int64))
        bary.append(b)

    tri_index = np.concatenate(tri_index)
    bary = np.concatenate(bary)
    tri = tris[tri_index]
    uv = np.einsum("pk,pkc->pc", bary, model.uv[tri])
    # majority vertex label, ties resolved toward HEAD
    labels = (model.labels[tri].astype(np.float64) * bary).sum(axis=1) > 0.5
    return PointSampling(tri_index, bary, uv, labels.astype(np.uint8))


def uv_sample(texture, uv, *, warn_out_of_range: bool = True) -> Tensor:
    """Bilinear lookup of a (H, W, C) UV map at (N, 2) coordinates.

    Out-of-square coordinates are clamped to the border (and warned about
    once per call); differentiable w.r.t. the map values.
    """
    uv_arr = uv.data if isinstance(uv, Tensor) else np.asarray(uv, dtype=np.float64)
    if warn_out_of_range and (uv_arr.min() < -1e-9 or uv_arr.max() > 1.0 + 1e-9):
        warnings.warn("uv coordinates outside the unit square were clamped", stacklevel=2)
    return bilinear_sample(ops.as_tensor(texture), ops.as_tensor(uv), clamp=True)
