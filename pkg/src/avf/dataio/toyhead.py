"""Procedural toy-head dataset: the desk-scale stand-in for a real 3D head corpus.

Heads are superellipsoid-like radius fields over a shared spherical grid:
per-identity axis scales and feature bumps (nose, brow, chin, cheeks) give
identity variation; 52 analytic displacement fields named after the standard
ARKit blendshapes give the expression grid.  Every displacement field has
compact support (a smooth bump window), so region audits can assert exact
zeros outside a field's region.

World frame: y up, face looking toward -z.  All sizes in meters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..morphable import HAIR, HEAD, NUM_EXPRESSIONS, BilinearModel, Geometry, build_bilinear

BLENDSHAPE_NAMES = [
    "eyeBlinkLeft", "eyeLookDownLeft", "eyeLookInLeft", "eyeLookOutLeft", "eyeLookUpLeft",
    "eyeSquintLeft", "eyeWideLeft", "eyeBlinkRight", "eyeLookDownRight", "eyeLookInRight",
    "eyeLookOutRight", "eyeLookUpRight", "eyeSquintRight", "eyeWideRight", "jawForward",
    "jawLeft", "jawRight", "jawOpen", "mouthClose", "mouthFunnel", "mouthPucker", "mouthLeft",
    "mouthRight", "mouthSmileLeft", "mouthSmileRight", "mouthFrownLeft", "mouthFrownRight",
    "mouthDimpleLeft", "mouthDimpleRight", "mouthStretchLeft", "mouthStretchRight",
    "mouthRollLower", "mouthRollUpper", "mouthShrugLower", "mouthShrugUpper", "mouthPressLeft",
    "mouthPressRight", "mouthLowerDownLeft", "mouthLowerDownRight", "mouthUpperUpLeft",
    "mouthUpperUpRight", "browDownLeft", "browDownRight", "browInnerUp", "browOuterUpLeft",
    "browOuterUpRight", "cheekPuff", "cheekSquintLeft", "cheekSquintRight", "noseSneerLeft",
    "noseSneerRight", "tongueOut",
]
assert len(BLENDSHAPE_NAMES) == NUM_EXPRESSIONS

HAIRLINE_THETA = 0.40 * np.pi  # vertices above this are labeled hair
BASE_RADIUS = 0.11


class DataError(ValueError):
    pass


@dataclass
class DatasetSpec:
    identities: int = 4
    expressions: int = NUM_EXPRESSIONS
    theta_steps: int = 24
    phi_steps: int = 32
    texture_resolution: int = 64
    hair_styles: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.expressions != NUM_EXPRESSIONS:
            raise DataError(f"expression count is fixed at {NUM_EXPRESSIONS}")
        if self.identities < 1:
            raise DataError("need at least one identity")


@dataclass
class HairStyle:
    name: str
    color: np.ndarray  # (3,) base rgb
    puff: float  # outward offset fraction in [0, 1]
    opacity: float  # splat opacity target; ~0 means bald
    stripe_freq: float


@dataclass
class ToyDataset:
    spec: DatasetSpec
    geometry: np.ndarray  # (I, 53, V, 3); slot 0 neutral
    triangles: np.ndarray
    uv: np.ndarray
    labels: np.ndarray
    landmark_indices: np.ndarray
    albedos: np.ndarray  # (I, R, R, 3)
    hair_catalog: list[HairStyle]
    identity_hair: np.ndarray  # (I,) catalog index per identity

    @property
    def num_vertices(self) -> int:
        return self.uv.shape[0]

    def bilinear(self, id_rank: int | None = None) -> BilinearModel:
        rank = min(self.spec.identities, 50) if id_rank is None else id_rank
        return build_bilinear(
            self.geometry, rank,
            triangles=self.triangles, uv=self.uv, labels=self.labels,
            landmark_indices=self.landmark_indices,
        )

    def neutral_geometry(self, identity: int) -> Geometry:
        return Geometry(self.geometry[identity, 0].copy(), self.triangles, self.uv, self.labels)


THETA_MIN = 0.08 * np.pi
THETA_MAX = 0.97 * np.pi


def _grid(spec: DatasetSpec):
    """Spherical grid; the duplicated seam column sits at the back of the head."""
    thetas = np.linspace(THETA_MIN, THETA_MAX, spec.theta_steps)
    phis = np.linspace(-np.pi, np.pi, spec.phi_steps + 1)  # seam duplicated at phi = +-pi
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    return tt.reshape(-1), pp.reshape(-1), spec.theta_steps, spec.phi_steps + 1


def _theta_to_v(t) -> float:
    return (t - THETA_MIN) / (THETA_MAX - THETA_MIN)


def _normals(theta, phi):
    return np.stack(
        [np.sin(theta) * np.sin(phi), np.cos(theta), -np.sin(theta) * np.cos(phi)], axis=1
    )


def _wrap(dphi):
    return (dphi + np.pi) % (2.0 * np.pi) - np.pi


def smooth_window(theta, phi, tc, pc, st, sp):
    """C-infinity bump with compact support: exactly zero outside its ellipse."""
    t2 = ((theta - tc) / st) ** 2 + (_wrap(phi - pc) / sp) ** 2
    w = np.zeros_like(t2)
    inside = t2 < 1.0
    w[inside] = np.exp(1.0 - 1.0 / (1.0 - t2[inside]))
    return w


# expression field table: name -> list of (theta_c, phi_c, s_theta, s_phi, direction, amplitude)
# direction: "down" | "up" | "out" | "in" | "fwd" | "left" | "right"
def _mirror(pieces, sign):
    return [(tc, sign * pc, st, sp, d, a) for tc, pc, st, sp, d, a in pieces]


def _expression_table() -> dict[str, list]:
    eye = 0.47 * np.pi
    brow = 0.42 * np.pi
    mouth = 0.72 * np.pi
    jaw = 0.80 * np.pi
    cheek = 0.60 * np.pi
    nose = 0.60 * np.pi
    e = {}
    for side, s in (("Left", 1.0), ("Right", -1.0)):
        pe = s * 0.14 * np.pi
        e[f"eyeBlink{side}"] = _mirror([(eye, 0.14 * np.pi, 0.06 * np.pi, 0.08 * np.pi, "in", 0.006)], s)
        e[f"eyeLookDown{side}"] = _mirror([(eye, 0.14 * np.pi, 0.05 * np.pi, 0.07 * np.pi, "down", 0.003)], s)
        e[f"eyeLookIn{side}"] = _mirror([(eye, 0.14 * np.pi, 0.05 * np.pi, 0.07 * np.pi, "right" if s > 0 else "left", 0.003)], s)
        e[f"eyeLookOut{side}"] = _mirror([(eye, 0.14 * np.pi, 0.05 * np.pi, 0.07 * np.pi, "left" if s > 0 else "right", 0.003)], s)
        e[f"eyeLookUp{side}"] = _mirror([(eye, 0.14 * np.pi, 0.05 * np.pi, 0.07 * np.pi, "up", 0.003)], s)
        e[f"eyeSquint{side}"] = _mirror([(eye + 0.03 * np.pi, 0.14 * np.pi, 0.05 * np.pi, 0.07 * np.pi, "up", 0.004)], s)
        e[f"eyeWide{side}"] = _mirror([(eye - 0.02 * np.pi, 0.14 * np.pi, 0.05 * np.pi, 0.07 * np.pi, "up", 0.005)], s)
        e[f"browDown{side}"] = _mirror([(brow, 0.12 * np.pi, 0.05 * np.pi, 0.10 * np.pi, "down", 0.006)], s)
        e[f"browOuterUp{side}"] = _mirror([(brow, 0.18 * np.pi, 0.05 * np.pi, 0.08 * np.pi, "up", 0.007)], s)
        e[f"mouthSmile{side}"] = _mirror([(mouth, 0.10 * np.pi, 0.06 * np.pi, 0.07 * np.pi, "up", 0.008)], s)
        e[f"mouthFrown{side}"] = _mirror([(mouth + 0.02 * np.pi, 0.10 * np.pi, 0.05 * np.pi, 0.07 * np.pi, "down", 0.007)], s)
        e[f"mouthDimple{side}"] = _mirror([(mouth, 0.12 * np.pi, 0.04 * np.pi, 0.05 * np.pi, "in", 0.004)], s)
        e[f"mouthStretch{side}"] = _mirror([(mouth, 0.11 * np.pi, 0.05 * np.pi, 0.08 * np.pi, "right" if s < 0 else "left", 0.006)], s)
        e[f"mouthPress{side}"] = _mirror([(mouth, 0.07 * np.pi, 0.04 * np.pi, 0.06 * np.pi, "in", 0.004)], s)
        e[f"mouthLowerDown{side}"] = _mirror([(mouth + 0.04 * np.pi, 0.06 * np.pi, 0.04 * np.pi, 0.06 * np.pi, "down", 0.005)], s)
        e[f"mouthUpperUp{side}"] = _mirror([(mouth - 0.04 * np.pi, 0.06 * np.pi, 0.04 * np.pi, 0.06 * np.pi, "up", 0.005)], s)
        e[f"cheekSquint{side}"] = _mirror([(cheek, 0.16 * np.pi, 0.06 * np.pi, 0.08 * np.pi, "up", 0.005)], s)
        e[f"noseSneer{side}"] = _mirror([(nose, 0.06 * np.pi, 0.04 * np.pi, 0.05 * np.pi, "up", 0.004)], s)
    e["jawForward"] = [(jaw, 0.0, 0.10 * np.pi, 0.30 * np.pi, "fwd", 0.008)]
    e["jawLeft"] = [(jaw, 0.0, 0.10 * np.pi, 0.30 * np.pi, "left", 0.008)]
    e["jawRight"] = [(jaw, 0.0, 0.10 * np.pi, 0.30 * np.pi, "right", 0.008)]
    e["jawOpen"] = [(jaw, 0.0, 0.12 * np.pi, 0.32 * np.pi, "down", 0.020)]
    e["mouthClose"] = [(mouth + 0.03 * np.pi, 0.0, 0.05 * np.pi, 0.10 * np.pi, "up", 0.006)]
    e["mouthFunnel"] = [(mouth, 0.0, 0.06 * np.pi, 0.10 * np.pi, "fwd", 0.008)]
    e["mouthPucker"] = [(mouth, 0.0, 0.05 * np.pi, 0.09 * np.pi, "fwd", 0.010)]
    e["mouthLeft"] = [(mouth, 0.0, 0.05 * np.pi, 0.12 * np.pi, "left", 0.007)]
    e["mouthRight"] = [(mouth, 0.0, 0.05 * np.pi, 0.12 * np.pi, "right", 0.007)]
    e["mouthRollLower"] = [(mouth + 0.03 * np.pi, 0.0, 0.04 * np.pi, 0.09 * np.pi, "in", 0.005)]
    e["mouthRollUpper"] = [(mouth - 0.03 * np.pi, 0.0, 0.04 * np.pi, 0.09 * np.pi, "in", 0.005)]
    e["mouthShrugLower"] = [(mouth + 0.05 * np.pi, 0.0, 0.05 * np.pi, 0.10 * np.pi, "up", 0.005)]
    e["mouthShrugUpper"] = [(mouth - 0.05 * np.pi, 0.0, 0.05 * np.pi, 0.10 * np.pi, "up", 0.004)]
    e["browInnerUp"] = [(brow, 0.0, 0.05 * np.pi, 0.10 * np.pi, "up", 0.008)]
    e["cheekPuff"] = [
        (cheek, 0.16 * np.pi, 0.07 * np.pi, 0.09 * np.pi, "out", 0.010),
        (cheek, -0.16 * np.pi, 0.07 * np.pi, 0.09 * np.pi, "out", 0.010),
    ]
    e["tongueOut"] = [(mouth + 0.01 * np.pi, 0.0, 0.03 * np.pi, 0.05 * np.pi, "fwd", 0.012)]
    return e


_DIRS = {
    "down": np.array([0.0, -1.0, 0.0]),
    "up": np.array([0.0, 1.0, 0.0]),
    "fwd": np.array([0.0, 0.0, -1.0]),
    "left": np.array([1.0, 0.0, 0.0]),
    "right": np.array([-1.0, 0.0, 0.0]),
}


def expression_field(name: str, theta: np.ndarray, phi: np.ndarray, normals: np.ndarray) -> np.ndarray:
    """Per-vertex displacement (V, 3) of one blendshape at weight 1."""
    table = _expression_table()
    if name not in table:
        raise DataError(f"unknown blendshape {name!r}")
    disp = np.zeros((theta.shape[0], 3))
    for tc, pc, st, sp, dname, amp in table[name]:
        w = smooth_window(theta, phi, tc, pc, st, sp)
        if dname == "out":
            d = normals
        elif dname == "in":
            d = -normals
        else:
            d = np.broadcast_to(_DIRS[dname], normals.shape)
        disp += amp * w[:, None] * d
    return disp


def _identity_radius(theta, phi, rng: np.random.Generator):
    """Per-identity radius field and axis scales."""
    axes = 1.0 + rng.uniform(-0.12, 0.12, size=3)
    radius = np.full_like(theta, BASE_RADIUS)
    bumps = [
        (0.60 * np.pi, 0.0, 0.10 * np.pi, 0.08 * np.pi, rng.uniform(0.012, 0.030)),  # nose
        (0.42 * np.pi, 0.0, 0.06 * np.pi, 0.25 * np.pi, rng.uniform(0.002, 0.010)),  # brow ridge
        (0.86 * np.pi, 0.0, 0.08 * np.pi, 0.12 * np.pi, rng.uniform(0.004, 0.014)),  # chin
        (0.62 * np.pi, 0.17 * np.pi, 0.09 * np.pi, 0.09 * np.pi, rng.uniform(0.002, 0.008)),  # cheek L
        (0.62 * np.pi, -0.17 * np.pi, 0.09 * np.pi, 0.09 * np.pi, rng.uniform(0.002, 0.008)),  # cheek R
    ]
    for tc, pc, st, sp, amp in bumps:
        radius += amp * smooth_window(theta, phi, tc, pc, st, sp)
    return radius, axes


def _hair_thickness(theta, phi, style: HairStyle):
    w = np.clip((HAIRLINE_THETA + 0.05 * np.pi - theta) / (0.05 * np.pi), 0.0, 1.0)
    ripple = 1.0 + 0.2 * np.sin(style.stripe_freq * phi)
    return 0.012 * (0.3 + style.puff) * w * ripple


def _triangulate(nt: int, np_: int) -> np.ndarray:
    tris = []
    for i in range(nt - 1):
        for j in range(np_ - 1):
            a = i * np_ + j
            b = a + 1
            c = a + np_
            d = c + 1
            tris.append((a, b, d))
            tris.append((a, d, c))
    return np.array(tris, np.int64)


_LANDMARK_ANCHORS: list[tuple[float, float]] = (
    # jawline arc (17)
    [(0.80 * np.pi, p) for p in np.linspace(-0.39 * np.pi, 0.39 * np.pi, 17)]
    # brows (10)
    + [(0.42 * np.pi, p) for p in np.linspace(-0.28 * np.pi, -0.06 * np.pi, 5)]
    + [(0.42 * np.pi, p) for p in np.linspace(0.06 * np.pi, 0.28 * np.pi, 5)]
    # nose bridge + base (9)
    + [(t, 0.0) for t in np.linspace(0.50 * np.pi, 0.62 * np.pi, 4)]
    + [(0.66 * np.pi, p) for p in np.linspace(-0.07 * np.pi, 0.07 * np.pi, 5)]
    # eyes (12)
    + [(0.47 * np.pi + 0.02 * np.pi * np.sin(k / 6 * 2 * np.pi), -0.14 * np.pi + 0.05 * np.pi * np.cos(k / 6 * 2 * np.pi)) for k in range(6)]
    + [(0.47 * np.pi + 0.02 * np.pi * np.sin(k / 6 * 2 * np.pi), 0.14 * np.pi + 0.05 * np.pi * np.cos(k / 6 * 2 * np.pi)) for k in range(6)]
    # mouth (20)
    + [(0.72 * np.pi + 0.03 * np.pi * np.sin(k / 12 * 2 * np.pi), 0.09 * np.pi * np.cos(k / 12 * 2 * np.pi)) for k in range(12)]
    + [(0.72 * np.pi + 0.015 * np.pi * np.sin(k / 8 * 2 * np.pi), 0.05 * np.pi * np.cos(k / 8 * 2 * np.pi)) for k in range(8)]
)


def _landmark_indices(theta, phi) -> np.ndarray:
    idx = []
    for tc, pc in _LANDMARK_ANCHORS:
        d2 = (theta - tc) ** 2 + _wrap(phi - pc) ** 2
        idx.append(int(np.argmin(d2)))
    return np.array(idx, np.int64)


def _albedo(spec: DatasetSpec, rng: np.random.Generator, style: HairStyle) -> np.ndarray:
    r = spec.texture_resolution
    u = np.linspace(0, 1, r)[None, :]
    v = np.linspace(0, 1, r)[:, None]
    tone = np.array([0.78, 0.62, 0.52]) * rng.uniform(0.75, 1.1)
    img = np.broadcast_to(tone, (r, r, 3)).copy()
    img *= (0.9 + 0.2 * v)[:, :, None]
    for _ in range(4):
        f = rng.uniform(2, 9, size=2)
        ph = rng.uniform(0, 2 * np.pi)
        amp = rng.uniform(0.01, 0.04)
        img += amp * np.sin(2 * np.pi * (f[0] * u + f[1] * v) + ph)[:, :, None]
    # painted features in uv space (v tracks theta, u tracks phi with seam at back)
    def paint(vc, uc, sv, su, color, strength):
        m = np.exp(-0.5 * (((v - vc) / sv) ** 2 + ((u - uc) / su) ** 2))
        return img * (1 - strength * m[:, :, None]) + strength * m[:, :, None] * np.asarray(color)

    img = paint(_theta_to_v(0.72 * np.pi), 0.5, 0.025, 0.05, (0.55, 0.22, 0.22), 0.9)  # lips
    img = paint(_theta_to_v(0.47 * np.pi), 0.5 + 0.07, 0.02, 0.025, (0.15, 0.12, 0.12), 0.9)  # eye L
    img = paint(_theta_to_v(0.47 * np.pi), 0.5 - 0.07, 0.02, 0.025, (0.15, 0.12, 0.12), 0.9)  # eye R
    img = paint(_theta_to_v(0.42 * np.pi), 0.5 + 0.06, 0.012, 0.04, (0.25, 0.18, 0.12), 0.7)  # brow L
    img = paint(_theta_to_v(0.42 * np.pi), 0.5 - 0.06, 0.012, 0.04, (0.25, 0.18, 0.12), 0.7)  # brow R
    # hair region color
    v_hair = _theta_to_v(HAIRLINE_THETA)
    hm = np.clip((v_hair - v) / 0.02, 0, 1)[:, :, None]
    stripes = (1.0 + 0.15 * np.sin(style.stripe_freq * 2 * np.pi * u))[:, :, None]
    img = img * (1 - hm) + hm * style.color * stripes
    return np.clip(img, 0.02, 0.98)


def make_hair_catalog(count: int, rng: np.random.Generator) -> list[HairStyle]:
    base_colors = [
        (0.12, 0.09, 0.07), (0.35, 0.22, 0.10), (0.65, 0.55, 0.35), (0.25, 0.25, 0.28),
        (0.50, 0.20, 0.12), (0.75, 0.72, 0.70),
    ]
    styles = [HairStyle("bald", np.array([0.0, 0.0, 0.0]), 0.0, 0.02, 1.0)]
    for k in range(max(count - 1, 0)):
        c = np.array(base_colors[k % len(base_colors)]) * rng.uniform(0.85, 1.15)
        styles.append(HairStyle(
            name=f"style{k:02d}",
            color=np.clip(c, 0.02, 0.95),
            puff=float(rng.uniform(0.2, 1.0)),
            opacity=float(rng.uniform(0.9, 0.97)),
            stripe_freq=float(rng.integers(2, 7)),
        ))
    return styles[:count] if count >= 1 else styles


def gen_toy_dataset(spec: DatasetSpec) -> ToyDataset:
    """Deterministic (seeded) registered geometry grid + textures + hair catalog."""
    rng = np.random.default_rng(spec.seed)
    theta, phi, nt, np_ = _grid(spec)
    normals = _normals(theta, phi)
    triangles = _triangulate(nt, np_)
    uv = np.stack([(phi + np.pi) / (2.0 * np.pi), _theta_to_v(theta)], axis=1)
    uv = np.clip(uv, 0.0, 1.0)
    labels = np.where(theta < HAIRLINE_THETA, HAIR, HEAD).astype(np.uint8)
    landmark_idx = _landmark_indices(theta, phi)

    catalog = make_hair_catalog(spec.hair_styles, rng)
    identity_hair = np.array(
        [1 + int(rng.integers(0, max(len(catalog) - 1, 1))) if len(catalog) > 1 else 0
         for _ in range(spec.identities)], np.int64
    )
    fields = np.stack(
        [expression_field(n, theta, phi, normals) for n in BLENDSHAPE_NAMES], axis=0
    )  # (52, V, 3)

    geoms = np.zeros((spec.identities, NUM_EXPRESSIONS + 1, theta.shape[0], 3))
    albedos = np.zeros((spec.identities, spec.texture_resolution, spec.texture_resolution, 3))
    for i in range(spec.identities):
        radius, axes = _identity_radius(theta, phi, rng)
        style = catalog[identity_hair[i] % len(catalog)]
        radius = radius + _hair_thickness(theta, phi, style)
        neutral = radius[:, None] * normals * axes
        # identity-specific expression gain keeps the grid genuinely bilinear-rank > 1
        gain = 1.0 + rng.uniform(-0.15, 0.15)
        geoms[i, 0] = neutral
        for e in range(NUM_EXPRESSIONS):
            geoms[i, e + 1] = neutral + gain * fields[e]
        albedos[i] = _albedo(spec, rng, style)
    return ToyDataset(
        spec=spec, geometry=geoms, triangles=triangles, uv=uv, labels=labels,
        landmark_indices=landmark_idx, albedos=albedos, hair_catalog=catalog,
        identity_hair=identity_hair,
    )
