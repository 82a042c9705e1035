"""Central finite-difference gradient checking.

The reported metric is ``max|analytic - numeric| / max(max|analytic|,
max|numeric|, floor)`` over all elements of all checked parameters, i.e. a
relative error scaled by the dominant gradient magnitude.  This keeps the
check meaningful when individual entries are near zero.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .tensor import Tensor, backward


def finite_difference_grads(
    fn: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    h: float = 1e-4,
) -> dict[str, np.ndarray]:
    """Central differences of the scalar fn() w.r.t. every param element."""
    grads: dict[str, np.ndarray] = {}
    for name, p in params.items():
        g = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = fn().item()
            flat[i] = keep - h
            dn = fn().item()
            flat[i] = keep
            gflat[i] = (up - dn) / (2.0 * h)
        grads[name] = g
    return grads


def gradcheck(
    fn: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    h: float = 1e-4,
    floor: float = 1e-6,
) -> dict[str, float]:
    """Compare backward() grads of fn() against central differences.

    Returns the scaled relative error per parameter; leaves params' data
    unchanged and their grads populated from the analytic pass.
    """
    for p in params.values():
        p.requires_grad = True
        p.zero_grad()
    out = fn()
    backward(out)
    numeric = finite_difference_grads(fn, params, h=h)
    errors: dict[str, float] = {}
    for name, p in params.items():
        a = p.grad if p.grad is not None else np.zeros_like(p.data)
        n = numeric[name]
        scale = max(np.abs(a).max(initial=0.0), np.abs(n).max(initial=0.0), floor)
        errors[name] = float(np.abs(a - n).max(initial=0.0) / scale)
    return errors


def max_gradcheck_error(fn, params, h: float = 1e-4, floor: float = 1e-6) -> float:
    errs = gradcheck(fn, params, h=h, floor=floor)
    return max(errs.values()) if errs else 0.0
