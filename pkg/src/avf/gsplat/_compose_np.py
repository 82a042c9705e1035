"""Pure-numpy compositing kernel: rect-vectorized, splat-major.

Iterating splats in global depth order while updating only each splat's
pixel rect keeps the per-pixel compositing sequence identical to the
tile-based Cython kernel, so the two backends agree to float precision.
"""

from __future__ import annotations

import numpy as np

from .constants import ALPHA_MAX, ALPHA_MIN, POWER_CUTOFF


def _rect(mx, my, r, height, width):
    x0 = max(int(np.floor(mx - r)), 0)
    x1 = min(int(np.ceil(mx + r)) + 1, width)
    y0 = max(int(np.floor(my - r)), 0)
    y1 = min(int(np.ceil(my + r)) + 1, height)
    return x0, x1, y0, y1


def _alpha(mean2d, conic, opac, xs, ys):
    dx = xs[None, :] - mean2d[0]
    dy = ys[:, None] - mean2d[1]
    power = -0.5 * (conic[0] * dx * dx + conic[2] * dy * dy) - conic[1] * dx * dy
    g = np.where(power >= -POWER_CUTOFF, np.exp(np.minimum(power, 0.0)), 0.0)
    a = np.minimum(opac * g, ALPHA_MAX)
    a[a < ALPHA_MIN] = 0.0
    return a, g, dx, dy


def forward(mean2d, conic, color, opac, depth, radius, order, height, width, background):
    img = np.zeros((height, width, 3))
    alpha_buf = np.zeros((height, width))
    depth_buf = np.zeros((height, width))
    trans = np.ones((height, width))
    xs_full = np.arange(width) + 0.5
    ys_full = np.arange(height) + 0.5
    for s in order:
        x0, x1, y0, y1 = _rect(mean2d[s, 0], mean2d[s, 1], radius[s], height, width)
        if x0 >= x1 or y0 >= y1:
            continue
        sl = (slice(y0, y1), slice(x0, x1))
        a, _, _, _ = _alpha(mean2d[s], conic[s], opac[s], xs_full[x0:x1], ys_full[y0:y1])
        w = trans[sl] * a
        img[sl] += w[:, :, None] * color[s]
        alpha_buf[sl] += w
        depth_buf[sl] += w * depth[s]
        trans[sl] *= 1.0 - a
    img += trans[:, :, None] * background
    return img, alpha_buf, depth_buf, {"trans_final": trans}


def backward(mean2d, conic, color, opac, depth, radius, order, height, width, background,
             ctx, d_img, d_alpha):
    n = mean2d.shape[0]
    d_mean2d = np.zeros((n, 2))
    d_conic = np.zeros((n, 3))
    d_color = np.zeros((n, 3))
    d_opac = np.zeros(n)
    trans_run = ctx["trans_final"].copy()
    suffix_rgb = trans_run[:, :, None] * background  # sum_{j>i} w_j c_j + T_final * bg
    suffix_a = np.zeros((height, width))
    xs_full = np.arange(width) + 0.5
    ys_full = np.arange(height) + 0.5
    for s in order[::-1]:
        x0, x1, y0, y1 = _rect(mean2d[s, 0], mean2d[s, 1], radius[s], height, width)
        if x0 >= x1 or y0 >= y1:
            continue
        sl = (slice(y0, y1), slice(x0, x1))
        a, g, dx, dy = _alpha(mean2d[s], conic[s], opac[s], xs_full[x0:x1], ys_full[y0:y1])
        one_minus = 1.0 - a
        t_here = trans_run[sl] / one_minus
        w = t_here * a
        active = a > 0.0

        d_color[s] += np.einsum("yx,yxc->c", w, d_img[sl])
        d_a = np.einsum(
            "yxc,yxc->yx", d_img[sl], t_here[:, :, None] * color[s] - suffix_rgb[sl] / one_minus[:, :, None]
        )
        d_a += d_alpha[sl] * (t_here - suffix_a[sl] / one_minus)
        d_a = np.where(active, d_a, 0.0)

        unclamped = opac[s] * g < ALPHA_MAX
        d_opac[s] += float((g * d_a * unclamped).sum())
        d_power = opac[s] * g * d_a * unclamped
        d_conic[s, 0] += float((-0.5 * dx * dx * d_power).sum())
        d_conic[s, 1] += float((-dx * dy * d_power).sum())
        d_conic[s, 2] += float((-0.5 * dy * dy * d_power).sum())
        cx = conic[s, 0] * dx + conic[s, 1] * dy
        cy = conic[s, 2] * dy + conic[s, 1] * dx
        d_mean2d[s, 0] += float((d_power * cx).sum())
        d_mean2d[s, 1] += float((d_power * cy).sum())

        suffix_rgb[sl] += w[:, :, None] * color[s]
        suffix_a[sl] += w
        trans_run[sl] = t_here
    return d_mean2d, d_conic, d_color, d_opac
