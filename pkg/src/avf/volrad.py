"""Volume-based head representation: a conditional radiance field.

``(sigma, c) = MLP(x, d, alpha, beta, eps)`` with positional encoding,
coarse/fine hierarchical sampling and emission-absorption quadrature.  The
network layering follows: encode(PE(x)) -> [.; beta; eps] -> shape features
(identity-modulated) -> sigma head, then [.; alpha] -> texture features ->
[.; PE(d)] -> color head.  The density head never sees the view direction.

Expression conditioning uses a learnable latent per blendshape slot, tied
linearly to the 52 blendshape weights (eps_latent = E @ eps_blend) so the
field can be driven by standard expression streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import Camera, RenderedImage
from .diffcore import MlpWeights, Tensor, mlp_forward, mlp_init, positional_encoding
from .diffcore import tensor as ops
from .morphable import NUM_EXPRESSIONS


class VolradError(ValueError):
    pass


@dataclass
class VolumeConfig:
    beta_dim: int = 50
    alpha_dim: int = 64
    eps_latent_dim: int = 32
    pe_x: int = 10
    pe_d: int = 4
    coarse_width: int = 256
    fine_width: int = 1024
    blocks: int = 8
    n_coarse: int = 64
    n_fine: int = 64
    near: float = 0.6
    far: float = 2.0
    cube_radius: float = 0.4  # x is normalized by this before encoding

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class FieldNet:
    """One resolution level of the conditional field."""

    encoder: MlpWeights  # PE(x) -> width
    shape_net: MlpWeights  # [enc; beta; eps_lat] -> width
    ism_gain: Tensor  # (beta_dim, width), zero-init
    ism_bias: Tensor  # (beta_dim, width), zero-init
    sigma_head: MlpWeights  # width -> width/2 -> 1
    texture_net: MlpWeights  # [shape; alpha] -> width
    color_net: MlpWeights  # [texture; PE(d)] -> width/2 -> 3

    def parameters(self) -> list[Tensor]:
        ps = []
        for net in (self.encoder, self.shape_net, self.sigma_head, self.texture_net, self.color_net):
            ps.extend(net.parameters())
        ps.extend([self.ism_gain, self.ism_bias])
        return ps


@dataclass
class RadianceField:
    cfg: VolumeConfig
    coarse: FieldNet
    fine: FieldNet
    eps_tie: Tensor = None  # (eps_latent_dim, 52) learnable per-expression code table

    def parameters(self) -> list[Tensor]:
        return self.coarse.parameters() + self.fine.parameters() + [self.eps_tie]

    def eps_latent(self, eps_blend) -> Tensor:
        eps_blend = ops.as_tensor(eps_blend)
        if eps_blend.shape[-1] != NUM_EXPRESSIONS:
            raise VolradError(f"expression stream must have {NUM_EXPRESSIONS} weights")
        return ops.matmul(self.eps_tie, eps_blend)


def _make_net(cfg: VolumeConfig, width: int, rng: np.random.Generator, scale: float) -> FieldNet:
    depth = max(cfg.blocks // 4, 1)  # blocks split across the staged sub-MLPs
    enc_in = 2 * cfg.pe_x * 3
    half = max(width // 2, 4)
    return FieldNet(
        encoder=mlp_init([enc_in] + [width] * depth, "tanh", rng, scale),
        shape_net=mlp_init([width + cfg.beta_dim + cfg.eps_latent_dim] + [width] * depth, "tanh", rng, scale),
        ism_gain=Tensor(np.zeros((cfg.beta_dim, width)), requires_grad=True),
        ism_bias=Tensor(np.zeros((cfg.beta_dim, width)), requires_grad=True),
        sigma_head=mlp_init([width, half, 1], "tanh", rng, scale),
        texture_net=mlp_init([width + cfg.alpha_dim] + [width] * depth, "tanh", rng, scale),
        color_net=mlp_init([width + 2 * cfg.pe_d * 3, half, 3], "tanh", rng, scale),
    )


def make_field(cfg: VolumeConfig, seed: int, init_scale: float = 1.0) -> RadianceField:
    rng = np.random.default_rng(seed)
    coarse = _make_net(cfg, cfg.coarse_width, rng, init_scale)
    fine = _make_net(cfg, cfg.fine_width, rng, init_scale)
    eps_tie = Tensor(rng.normal(0.0, 0.3, size=(cfg.eps_latent_dim, NUM_EXPRESSIONS)), requires_grad=True)
    return RadianceField(cfg, coarse, fine, eps_tie)


def ism_modulate(features: Tensor, identity_code: Tensor, gain: Tensor, bias: Tensor) -> Tensor:
    """Identity-specific feature modulation: out = f * (1 + id@gain) + id@bias.

    Zero-initialized gain/bias make this a pass-through.
    """
    g = ops.matmul(identity_code, gain)
    h = ops.matmul(identity_code, bias)
    return features * (g + 1.0) + h


def _tile(code: Tensor, n: int) -> Tensor:
    return code.reshape(1, -1) * np.ones((n, 1))


def field_eval(field: RadianceField, net: FieldNet, x, d, alpha, beta, eps_blend) -> tuple[Tensor, Tensor]:
    """Evaluate one level at points x (B, 3), view dirs d (B, 3); returns (sigma (B,), rgb (B, 3))."""
    cfg = field.cfg
    x = ops.as_tensor(x)
    d = ops.as_tensor(d)
    alpha = ops.as_tensor(alpha)
    beta = ops.as_tensor(beta)
    if alpha.shape[-1] != cfg.alpha_dim or beta.shape[-1] != cfg.beta_dim:
        raise VolradError("conditioning code dimensions do not match the field config")
    n = x.shape[0]
    eps_lat = field.eps_latent(eps_blend)

    enc = mlp_forward(net.encoder, positional_encoding(x * (1.0 / cfg.cube_radius), cfg.pe_x))
    shape_in = ops.concatenate([enc, _tile(beta, n), _tile(eps_lat, n)], axis=1)
    shape_feat = mlp_forward(net.shape_net, shape_in)
    shape_feat = ism_modulate(shape_feat, beta, net.ism_gain, net.ism_bias)
    sigma = ops.softplus(mlp_forward(net.sigma_head, shape_feat))[:, 0]

    tex_in = ops.concatenate([shape_feat, _tile(alpha, n)], axis=1)
    tex_feat = mlp_forward(net.texture_net, tex_in)
    color_in = ops.concatenate([tex_feat, positional_encoding(d, cfg.pe_d)], axis=1)
    rgb = ops.sigmoid(mlp_forward(net.color_net, color_in))
    return sigma, rgb


@dataclass
class RaySamples:
    """Sample positions along a bundle of rays."""

    origins: np.ndarray  # (R, 3)
    dirs: np.ndarray  # (R, 3) unit
    z: np.ndarray  # (R, S) strictly increasing
    z_far: float

    def __post_init__(self):
        if np.any(np.diff(self.z, axis=1) <= 0):
            raise VolradError("sample depths must be strictly increasing")
        norms = np.linalg.norm(self.dirs, axis=1)
        if np.abs(norms - 1.0).max(initial=0.0) > 1e-9:
            raise VolradError("ray directions must be unit length")

    @property
    def deltas(self) -> np.ndarray:
        d = np.diff(self.z, axis=1)
        last = np.maximum(self.z_far - self.z[:, -1:], 1e-12)
        return np.concatenate([d, last], axis=1)

    def points(self) -> np.ndarray:
        return self.origins[:, None, :] + self.dirs[:, None, :] * self.z[:, :, None]


def uniform_samples(origins, dirs, near, far, count, rng: np.random.Generator | None = None) -> RaySamples:
    """Stratified sampling of [near, far]; midpoints when rng is None."""
    r = origins.shape[0]
    step = (far - near) / count
    if rng is None:
        z = np.broadcast_to(near + (np.arange(count) + 0.5) * step, (r, count)).copy()
    else:
        z = near + (np.arange(count) + rng.uniform(size=(r, count))) * step
    return RaySamples(origins, dirs, z, far)


def quadrature(sigma: Tensor, rgb: Tensor, deltas: np.ndarray, background) -> tuple[Tensor, Tensor]:
    """Emission-absorption quadrature: alpha_i = 1 - exp(-sigma_i * delta_i).

    sigma (R, S), rgb (R, S, 3); returns (color (R, 3), transmittance (R, S+1))
    where transmittance[:, -1] is the background weight.
    """
    tau = sigma * deltas
    csum = ops.concatenate(
        [ops.as_tensor(np.zeros((tau.shape[0], 1))), _cumsum(tau, axis=1)], axis=1
    )  # exclusive prefix
    trans = ops.exp(-csum)  # (R, S+1): T_i before sample i, last entry = final
    alpha = 1.0 - ops.exp(-tau)
    weights = trans[:, :-1] * alpha
    color = (weights.reshape(weights.shape + (1,)) * rgb).sum(axis=1)
    bg = np.asarray(background, dtype=np.float64)
    color = color + trans[:, -1:] * bg
    return color, trans


def _cumsum(t: Tensor, axis: int) -> Tensor:
    from .diffcore.tensor import custom_op

    def bw(g):
        flipped = np.flip(np.cumsum(np.flip(g, axis=axis), axis=axis), axis=axis)
        return (flipped,)

    return custom_op(np.cumsum(t.data, axis=axis), (t,), bw, "cumsum")


def render_ray(field: RadianceField, net: FieldNet, ray: RaySamples, codes: dict,
               background=(1.0, 1.0, 1.0)) -> tuple[Tensor, Tensor]:
    """Quadrature color for each ray in the bundle; returns (color (R, 3), transmittance)."""
    pts = ray.points()
    r, s, _ = pts.shape
    dirs = np.repeat(ray.dirs, s, axis=0)
    sigma, rgb = field_eval(field, net, pts.reshape(-1, 3), dirs, codes["alpha"], codes["beta"], codes["eps"])
    return quadrature(sigma.reshape(r, s), rgb.reshape(r, s, 3), ray.deltas, background)


def hierarchical_resample(z_coarse: np.ndarray, weights: np.ndarray, n_fine: int,
                          rng: np.random.Generator | None = None) -> np.ndarray:
    """Inverse-CDF draws from the piecewise-constant coarse weight profile.

    z_coarse (R, S) sample depths (bin centers), weights (R, S) nonnegative.
    All-zero rows fall back to a uniform profile.  Deterministic (stratified
    midpoints of the unit interval) unless an rng is supplied.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.min(initial=0.0) < 0:
        raise VolradError("coarse weights must be non-negative")
    r, s = weights.shape
    edges = np.concatenate(
        [z_coarse[:, :1], 0.5 * (z_coarse[:, 1:] + z_coarse[:, :-1]), z_coarse[:, -1:]], axis=1
    )  # (R, S+1)
    w = weights + 0.0
    zero_rows = w.sum(axis=1) < 1e-12
    w[zero_rows] = 1.0  # documented fallback: uniform
    pdf = w / w.sum(axis=1, keepdims=True)
    cdf = np.concatenate([np.zeros((r, 1)), np.cumsum(pdf, axis=1)], axis=1)
    if rng is None:
        u = np.broadcast_to((np.arange(n_fine) + 0.5) / n_fine, (r, n_fine))
    else:
        u = (np.arange(n_fine) + rng.uniform(size=(r, n_fine))) / n_fine
    idx = np.empty((r, n_fine), np.int64)
    for i in range(r):  # searchsorted per row
        idx[i] = np.clip(np.searchsorted(cdf[i], u[i], side="right") - 1, 0, s - 1)
    lo = np.take_along_axis(cdf, idx, axis=1)
    hi = np.take_along_axis(cdf, idx + 1, axis=1)
    frac = np.where(hi > lo, (u - lo) / np.maximum(hi - lo, 1e-12), 0.5)
    e_lo = np.take_along_axis(edges, idx, axis=1)
    e_hi = np.take_along_axis(edges, idx + 1, axis=1)
    return e_lo + frac * (e_hi - e_lo)


def render_rays_hierarchical(field: RadianceField, origins, dirs, codes: dict,
                             n_coarse: int | None = None, n_fine: int | None = None,
                             background=(1.0, 1.0, 1.0), rng=None):
    """Coarse pass, importance resampling, fine pass; returns (coarse, fine) ray colors."""
    cfg = field.cfg
    n_coarse = cfg.n_coarse if n_coarse is None else n_coarse
    n_fine = cfg.n_fine if n_fine is None else n_fine
    coarse_samples = uniform_samples(origins, dirs, cfg.near, cfg.far, n_coarse, rng)
    c_coarse, trans = render_ray(field, field.coarse, coarse_samples, codes, background)
    if n_fine <= 0:
        return c_coarse, c_coarse, trans.data[:, -1]
    weights = trans.data[:, :-1] - trans.data[:, 1:]
    z_fine = hierarchical_resample(coarse_samples.z, weights, n_fine, rng)
    z_all = np.sort(np.concatenate([coarse_samples.z, z_fine], axis=1), axis=1)
    z_all += np.arange(z_all.shape[1]) * 1e-12  # break exact ties, keep monotone
    fine_samples = RaySamples(origins, dirs, z_all, cfg.far)
    c_fine, trans_fine = render_ray(field, field.fine, fine_samples, codes, background)
    return c_coarse, c_fine, trans_fine.data[:, -1]


QUALITY_PRESETS = {
    "preview": {"n_coarse": 24, "n_fine": 0},
    "standard": {"n_coarse": 64, "n_fine": 64},
}


def render_image_volume(field: RadianceField, cam: Camera, codes: dict, preset: str = "standard",
                        background=(1.0, 1.0, 1.0), rng=None) -> tuple[RenderedImage, RenderedImage]:
    """Render full coarse and fine images (both are supervised during training)."""
    if preset not in QUALITY_PRESETS:
        raise VolradError(f"unknown quality preset {preset!r}")
    p = QUALITY_PRESETS[preset]
    origins, dirs = cam.pixel_rays()
    c_coarse, c_fine, t_final = render_rays_hierarchical(
        field, origins, dirs, codes, p["n_coarse"], p["n_fine"], background, rng
    )
    h, w = cam.height, cam.width
    alpha = np.clip(1.0 - t_final.reshape(h, w), 0.0, 1.0)

    def to_image(t: Tensor) -> RenderedImage:
        rgb = np.clip(t.data.reshape(h, w, 3), 0.0, 1.0)
        return RenderedImage(rgb, alpha, extras={"tensor": t})

    return to_image(c_coarse), to_image(c_fine)


# -- texture encoding module (training-time appearance encoder) -----------


@dataclass
class TextureEncoder:
    """Patch-embedding CNN: non-overlapping patch projection, ReLU, mean pool, linear."""

    patch: int
    proj: Tensor  # (patch*patch*3, hidden)
    out: Tensor  # (hidden, alpha_dim)
    resolution: int

    def parameters(self) -> list[Tensor]:
        return [self.proj, self.out]


def make_tem(resolution: int, patch: int, hidden: int, alpha_dim: int, seed: int) -> TextureEncoder:
    if resolution % patch != 0:
        raise VolradError("texture resolution must be a multiple of the patch size")
    rng = np.random.default_rng(seed)
    std = np.sqrt(2.0 / (patch * patch * 3 + hidden))
    return TextureEncoder(
        patch=patch,
        proj=Tensor(rng.normal(0, std, size=(patch * patch * 3, hidden)), requires_grad=True),
        out=Tensor(rng.normal(0, np.sqrt(2.0 / (hidden + alpha_dim)), size=(hidden, alpha_dim)),
                   requires_grad=True),
        resolution=resolution,
    )


def tem_encode(texture, encoder: TextureEncoder) -> Tensor:
    """Encode an (R, R, 3) UV texture into an appearance code."""
    texture = ops.as_tensor(texture)
    res = encoder.resolution
    if texture.shape[:2] != (res, res):
        raise VolradError(f"texture resolution {texture.shape[:2]} != configured {res}")
    p = encoder.patch
    n = res // p
    patches = texture.reshape(n, p, n, p, 3).transpose((0, 2, 1, 3, 4)).reshape(n * n, p * p * 3)
    hidden = ops.tanh(ops.matmul(patches, encoder.proj))
    pooled = hidden.mean(axis=0)
    return ops.matmul(pooled, encoder.out)
