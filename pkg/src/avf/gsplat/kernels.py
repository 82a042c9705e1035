"""Compositing-kernel backend selection.

The compiled Cython kernel is preferred; a pure-numpy implementation of the
same math is the fallback, selected at import time.  Set AVF_FORCE_FALLBACK=1
to force the numpy path (the benchmark uses this to compare both).
"""

from __future__ import annotations

import os

import numpy as np

from . import _compose_np
from .constants import TILE

try:  # pragma: no cover - depends on build environment
    from . import _compose_cy
except ImportError:  # pragma: no cover
    _compose_cy = None

_FORCED = bool(os.environ.get("AVF_FORCE_FALLBACK"))
HAVE_COMPILED = _compose_cy is not None
USE_COMPILED = HAVE_COMPILED and not _FORCED


def backend_name() -> str:
    return "cython" if USE_COMPILED else "numpy"


def bin_splats(mean2d, radius, order, height, width):
    """Per-tile splat lists, each in global depth order."""
    ntx = (width + TILE - 1) // TILE
    nty = (height + TILE - 1) // TILE
    ntiles = ntx * nty
    rects = np.empty((order.size, 4), np.int64)
    counts = np.zeros(ntiles, np.int64)
    for i, s in enumerate(order):
        x0 = max(int(np.floor(mean2d[s, 0] - radius[s])), 0)
        x1 = min(int(np.ceil(mean2d[s, 0] + radius[s])) + 1, width)
        y0 = max(int(np.floor(mean2d[s, 1] - radius[s])), 0)
        y1 = min(int(np.ceil(mean2d[s, 1] + radius[s])) + 1, height)
        if x0 >= x1 or y0 >= y1:
            rects[i] = (-1, -1, -1, -1)
            continue
        tx0, tx1 = x0 // TILE, (x1 - 1) // TILE
        ty0, ty1 = y0 // TILE, (y1 - 1) // TILE
        rects[i] = (tx0, tx1, ty0, ty1)
        for ty in range(ty0, ty1 + 1):
            counts[ty * ntx + tx0 : ty * ntx + tx1 + 1] += 1
    starts = np.zeros(ntiles + 1, np.int64)
    np.cumsum(counts, out=starts[1:])
    entries = np.empty(int(starts[-1]), np.int64)
    fill = starts[:-1].copy()
    for i, s in enumerate(order):
        tx0, tx1, ty0, ty1 = rects[i]
        if tx0 < 0:
            continue
        for ty in range(ty0, ty1 + 1):
            for tx in range(tx0, tx1 + 1):
                t = ty * ntx + tx
                entries[fill[t]] = s
                fill[t] += 1
    return starts, entries, ntx, nty


def composite_forward(mean2d, conic, color, opac, depth, radius, order, height, width, background):
    if USE_COMPILED:
        starts, entries, ntx, nty = bin_splats(mean2d, radius, order, height, width)
        img, alpha, depthbuf, ctx = _compose_cy.forward(
            mean2d, conic, color, opac, depth, starts, entries, ntx, nty, height, width, background
        )
        ctx["bins"] = (starts, entries, ntx, nty)
        return img, alpha, depthbuf, ctx
    return _compose_np.forward(mean2d, conic, color, opac, depth, radius, order, height, width, background)


def composite_backward(mean2d, conic, color, opac, depth, radius, order, height, width, background,
                       ctx, d_img, d_alpha):
    if USE_COMPILED:
        starts, entries, ntx, nty = ctx["bins"]
        return _compose_cy.backward(
            mean2d, conic, color, opac, depth, starts, entries, ntx, nty,
            height, width, background, ctx,
            np.ascontiguousarray(d_img), np.ascontiguousarray(d_alpha),
        )
    return _compose_np.backward(
        mean2d, conic, color, opac, depth, radius, order, height, width, background, ctx, d_img, d_alpha
    )
