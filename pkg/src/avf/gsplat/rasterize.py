"""Differentiable splat rendering.

The projection stage (camera transform, perspective Jacobian, 2D covariance
and its inverse) runs as ordinary autodiff ops; the per-pixel compositing
stage is a single custom op backed by the tile kernel with a hand-written
backward.  :func:`rasterize_reference` is an independent brute-force oracle:
per pixel over all splats, globally depth sorted, no tiling or binning.
"""

from __future__ import annotations

import numpy as np

from ..camera import Camera, RenderedImage
from ..diffcore import Tensor, backward, custom_op
from ..diffcore import tensor as ops
from .attributes import GaussianCloud, GsplatError, covariances
from .constants import ALPHA_MAX, ALPHA_MIN, LOWPASS_PX2, POWER_CUTOFF, TRUNC_SIGMAS
from .kernels import composite_backward, composite_forward

DEFAULT_BACKGROUND = (1.0, 1.0, 1.0)


def project_gaussian(mu, cov3d, cam: Camera):
    """Project one splat: returns (mean2d, cov2d, depth) or None if culled.

    cov2d is the local-affine (EWA) propagation J W Sigma W^T J^T plus the
    low-pass floor.  Splats at or behind the near plane are culled.
    """
    mu = np.asarray(mu, dtype=np.float64).reshape(3)
    t = cam.rotation @ mu + cam.translation
    if t[2] <= cam.near:
        return None
    f = cam.focal
    inv_z = 1.0 / t[2]
    mean2d = np.array([f * t[0] * inv_z + cam.cx, f * t[1] * inv_z + cam.cy])
    jac = np.array(
        [
            [f * inv_z, 0.0, -f * t[0] * inv_z * inv_z],
            [0.0, f * inv_z, -f * t[1] * inv_z * inv_z],
        ]
    )
    m = jac @ cam.rotation
    cov2d = m @ np.asarray(cov3d, dtype=np.float64) @ m.T + LOWPASS_PX2 * np.eye(2)
    return mean2d, cov2d, float(t[2])


def _footprint_radius(cov2d_vals: np.ndarray) -> np.ndarray:
    """Conservative pixel radius covering the truncated kernel support."""
    a, b, c = cov2d_vals[:, 0], cov2d_vals[:, 1], cov2d_vals[:, 2]
    lam_max = 0.5 * (a + c) + np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))
    return TRUNC_SIGMAS * np.sqrt(np.maximum(lam_max, 0.0))


def render_splats(
    cloud: GaussianCloud,
    cam: Camera,
    background=DEFAULT_BACKGROUND,
) -> tuple[Tensor, np.ndarray]:
    """Differentiable render; returns a packed (H, W, 4) rgb+alpha tensor and the depth buffer."""
    cloud.validate_finite()
    bg = np.asarray(background, dtype=np.float64)
    h, w = cam.height, cam.width

    t_cam = ops.matmul(cloud.mu, cam.rotation.T) + cam.translation
    front = t_cam.data[:, 2] > cam.near
    idx = np.nonzero(front)[0]
    if idx.size == 0:
        packed = np.concatenate([np.broadcast_to(bg, (h, w, 3)), np.zeros((h, w, 1))], axis=2)
        out = custom_op(
            packed,
            (cloud.mu, cloud.scale, cloud.quat, cloud.opacity, cloud.color),
            lambda g: tuple(np.zeros_like(p.data) for p in
                            (cloud.mu, cloud.scale, cloud.quat, cloud.opacity, cloud.color)),
            "rasterize-empty",
        )
        return out, np.zeros((h, w))

    tc = t_cam[idx]
    tx, ty, tz = tc[:, 0], tc[:, 1], tc[:, 2]
    inv_z = ops.power(tz, -1.0)
    f = cam.focal
    u = tx * inv_z * f + cam.cx
    v = ty * inv_z * f + cam.cy
    mean2d = ops.stack([u, v], axis=1)

    finvz = inv_z * f
    neg = finvz * inv_z
    zero = ops.as_tensor(np.zeros(idx.size))
    jac = ops.stack(
        [
            ops.stack([finvz, zero, -(neg * tx)], axis=1),
            ops.stack([zero, finvz, -(neg * ty)], axis=1),
        ],
        axis=1,
    )  # (N, 2, 3)

    sigma = covariances(
        GaussianCloud(cloud.mu[idx], cloud.scale[idx], cloud.quat[idx],
                      cloud.opacity[idx], cloud.color[idx])
    )
    jw = ops.matmul(jac, cam.rotation)
    cov2d = ops.matmul(ops.matmul(jw, sigma), ops.transpose(jw, (0, 2, 1)))
    a = cov2d[:, 0, 0] + LOWPASS_PX2
    b = cov2d[:, 0, 1]
    c = cov2d[:, 1, 1] + LOWPASS_PX2
    det = a * c - b * b
    inv_det = ops.power(det, -1.0)
    conic = ops.stack([c * inv_det, -(b * inv_det), a * inv_det], axis=1)

    color = cloud.color[idx]
    opacity = cloud.opacity[idx]
    if opacity.data.min() <= 0.0 or opacity.data.max() >= 1.0:
        raise GsplatError("opacity must lie strictly inside (0, 1)")

    depth = tz.data.copy()
    cov_vals = np.stack([a.data, b.data, c.data], axis=1)
    radius = _footprint_radius(cov_vals)
    order = np.lexsort((np.arange(idx.size), depth))

    inputs = (mean2d, conic, color, opacity)
    img, alpha_buf, depth_buf, ctx = composite_forward(
        mean2d.data, conic.data, color.data, opacity.data, depth, radius, order, h, w, bg
    )
    packed = np.concatenate([img, alpha_buf[:, :, None]], axis=2)

    def bw(g):
        d_img = np.ascontiguousarray(g[:, :, :3])
        d_alpha = np.ascontiguousarray(g[:, :, 3])
        d_mean2d, d_conic, d_color, d_opac = composite_backward(
            mean2d.data, conic.data, color.data, opacity.data, depth, radius, order,
            h, w, bg, ctx, d_img, d_alpha,
        )
        return d_mean2d, d_conic, d_color, d_opac

    out = custom_op(packed, inputs, bw, "composite")
    return out, depth_buf


def rasterize(cloud: GaussianCloud, cam: Camera, background=DEFAULT_BACKGROUND) -> RenderedImage:
    """Tile-rasterized image of the cloud; keeps the graph tensor in ``extras``."""
    packed, depth_buf = render_splats(cloud, cam, background)
    return RenderedImage(
        rgb=np.clip(packed.data[:, :, :3], 0.0, 1.0),
        alpha=np.clip(packed.data[:, :, 3], 0.0, 1.0),
        depth=depth_buf,
        extras={"tensor": packed},
    )


def rasterize_backward(render: RenderedImage | Tensor, d_image: np.ndarray,
                       cloud: GaussianCloud, d_alpha: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Pull d(loss)/d(attributes) out of a retained forward pass.

    ``render`` is the RenderedImage (or packed tensor) produced by
    :func:`rasterize` / :func:`render_splats` on ``cloud``; the returned map
    has gradients for mu, scale, quat, opacity and color.
    """
    packed = render.extras["tensor"] if isinstance(render, RenderedImage) else render
    if not isinstance(packed, Tensor) or packed._backward_fn is None and not packed._parents:
        raise GsplatError("forward state missing: render the cloud with gradients enabled first")
    h, w = packed.shape[0], packed.shape[1]
    seed = np.zeros((h, w, 4))
    seed[:, :, :3] = d_image
    if d_alpha is not None:
        seed[:, :, 3] = d_alpha
    for t in (cloud.mu, cloud.scale, cloud.quat, cloud.opacity, cloud.color):
        t.requires_grad = True
        t.zero_grad()
    scalar = (packed * seed).sum()
    backward(scalar)
    return {
        "mu": cloud.mu.grad.copy(),
        "scale": cloud.scale.grad.copy(),
        "quat": cloud.quat.grad.copy(),
        "opacity": cloud.opacity.grad.copy(),
        "color": cloud.color.grad.copy(),
    }


def rasterize_reference(cloud: GaussianCloud, cam: Camera,
                        background=DEFAULT_BACKGROUND) -> RenderedImage:
    """Brute-force oracle: every splat evaluated at every pixel, no tiling.

    Implemented with an exclusive cumulative product over the depth-sorted
    splat axis rather than sequential compositing, so it shares no control
    flow with the tile kernel.
    """
    cloud.validate_finite()
    bg = np.asarray(background, dtype=np.float64)
    h, w = cam.height, cam.width

    from .attributes import build_covariance

    projected = []
    for i in range(cloud.num_splats):
        cov3d = build_covariance(cloud.scale.data[i], cloud.quat.data[i])
        p = project_gaussian(cloud.mu.data[i], cov3d, cam)
        if p is not None:
            projected.append((i, *p))
    if not projected:
        return RenderedImage(np.broadcast_to(bg, (h, w, 3)).copy(), np.zeros((h, w)), np.zeros((h, w)))

    order = sorted(range(len(projected)), key=lambda k: (projected[k][3], projected[k][0]))
    mean2d = np.array([projected[k][1] for k in order])
    cov2d = np.array([projected[k][2] for k in order])
    depth = np.array([projected[k][3] for k in order])
    src = np.array([projected[k][0] for k in order])
    opac = cloud.opacity.data[src]
    color = cloud.color.data[src]

    det = cov2d[:, 0, 0] * cov2d[:, 1, 1] - cov2d[:, 0, 1] ** 2
    conic_a = cov2d[:, 1, 1] / det
    conic_b = -cov2d[:, 0, 1] / det
    conic_c = cov2d[:, 0, 0] / det

    ys, xs = np.mgrid[0:h, 0:w]
    px = (xs + 0.5).reshape(-1)
    py = (ys + 0.5).reshape(-1)
    img = np.empty((h * w, 3))
    alpha_buf = np.empty(h * w)
    depth_buf = np.empty(h * w)
    chunk = 512
    for lo in range(0, h * w, chunk):
        hi = min(lo + chunk, h * w)
        dx = px[None, lo:hi] - mean2d[:, 0:1]
        dy = py[None, lo:hi] - mean2d[:, 1:2]
        power = -0.5 * (conic_a[:, None] * dx**2 + conic_c[:, None] * dy**2) - conic_b[:, None] * dx * dy
        alpha = np.where(power >= -POWER_CUTOFF, opac[:, None] * np.exp(power), 0.0)
        alpha = np.minimum(alpha, ALPHA_MAX)
        alpha[alpha < ALPHA_MIN] = 0.0
        trans = np.cumprod(1.0 - alpha, axis=0)
        trans_before = np.vstack([np.ones((1, hi - lo)), trans[:-1]])
        weights = trans_before * alpha
        img[lo:hi] = weights.T @ color + trans[-1][:, None] * bg
        alpha_buf[lo:hi] = weights.sum(axis=0)
        depth_buf[lo:hi] = weights.T @ depth
    return RenderedImage(img.reshape(h, w, 3), alpha_buf.reshape(h, w), depth_buf.reshape(h, w))
