# Tile-based compositing kernel (hot loop of the splat renderer).
# Math and constants must stay in lockstep with _compose_np.py and
# constants.py: both backends evaluate the same 6-sigma-truncated Gaussian
# with the same clamps, which is what keeps them interchangeable.

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

cdef double POWER_CUTOFF = 18.0
cdef double ALPHA_MIN = 1e-10
cdef double ALPHA_MAX = 0.995
cdef double TRANSMITTANCE_STOP = 1e-12
cdef int TILE = 16


def forward(double[:, ::1] mean2d, double[:, ::1] conic, double[:, ::1] color,
            double[::1] opac, double[::1] depth,
            long[::1] tile_starts, long[::1] tile_entries,
            int ntx, int nty, int height, int width, double[::1] background):
    img_arr = np.zeros((height, width, 3))
    alpha_arr = np.zeros((height, width))
    depth_arr = np.zeros((height, width))
    trans_arr = np.ones((height, width))
    contrib_arr = np.zeros((height, width), dtype=np.int64)

    cdef double[:, :, ::1] img = img_arr
    cdef double[:, ::1] alpha_buf = alpha_arr
    cdef double[:, ::1] depth_buf = depth_arr
    cdef double[:, ::1] trans_final = trans_arr
    cdef long[:, ::1] n_contrib = contrib_arr

    cdef int tx, ty, px, py, x0, x1, y0, y1
    cdef long t, start, end, k, s, cnt
    cdef double pxc, pyc, dx, dy, power, a, w, trans, cr, cg, cb, ab, db

    for ty in range(nty):
        y0 = ty * TILE
        y1 = min(y0 + TILE, height)
        for tx in range(ntx):
            x0 = tx * TILE
            x1 = min(x0 + TILE, width)
            t = ty * ntx + tx
            start = tile_starts[t]
            end = tile_starts[t + 1]
            for py in range(y0, y1):
                pyc = py + 0.5
                for px in range(x0, x1):
                    pxc = px + 0.5
                    trans = 1.0
                    cr = cg = cb = ab = db = 0.0
                    cnt = 0
                    for k in range(start, end):
                        s = tile_entries[k]
                        cnt += 1
                        dx = pxc - mean2d[s, 0]
                        dy = pyc - mean2d[s, 1]
                        power = -0.5 * (conic[s, 0] * dx * dx + conic[s, 2] * dy * dy) \
                            - conic[s, 1] * dx * dy
                        if power < -POWER_CUTOFF:
                            continue
                        a = opac[s] * exp(power)
                        if a > ALPHA_MAX:
                            a = ALPHA_MAX
                        if a < ALPHA_MIN:
                            continue
                        w = trans * a
                        cr += w * color[s, 0]
                        cg += w * color[s, 1]
                        cb += w * color[s, 2]
                        ab += w
                        db += w * depth[s]
                        trans = trans * (1.0 - a)
                        if trans < TRANSMITTANCE_STOP:
                            break
                    n_contrib[py, px] = cnt
                    trans_final[py, px] = trans
                    img[py, px, 0] = cr + trans * background[0]
                    img[py, px, 1] = cg + trans * background[1]
                    img[py, px, 2] = cb + trans * background[2]
                    alpha_buf[py, px] = ab
                    depth_buf[py, px] = db
    return img_arr, alpha_arr, depth_arr, {"trans_final": trans_arr, "n_contrib": contrib_arr}


def backward(double[:, ::1] mean2d, double[:, ::1] conic, double[:, ::1] color,
             double[::1] opac, double[::1] depth,
             long[::1] tile_starts, long[::1] tile_entries,
             int ntx, int nty, int height, int width, double[::1] background,
             ctx, double[:, :, ::1] d_img, double[:, ::1] d_alpha):
    cdef double[:, ::1] trans_final = ctx["trans_final"]
    cdef long[:, ::1] n_contrib = ctx["n_contrib"]

    n = mean2d.shape[0]
    d_mean2d_arr = np.zeros((n, 2))
    d_conic_arr = np.zeros((n, 3))
    d_color_arr = np.zeros((n, 3))
    d_opac_arr = np.zeros(n)
    cdef double[:, ::1] d_mean2d = d_mean2d_arr
    cdef double[:, ::1] d_conic = d_conic_arr
    cdef double[:, ::1] d_color = d_color_arr
    cdef double[::1] d_opac = d_opac_arr

    cdef int tx, ty, px, py, x0, x1, y0, y1
    cdef long t, start, end_k, k, s
    cdef double pxc, pyc, dx, dy, power, g, a, w, one_minus, t_here, trans_run
    cdef double sr, sg, sb, sa, dr, dg_, db_, da, dpow
    cdef bint clamped

    for ty in range(nty):
        y0 = ty * TILE
        y1 = min(y0 + TILE, height)
        for tx in range(ntx):
            x0 = tx * TILE
            x1 = min(x0 + TILE, width)
            t = ty * ntx + tx
            start = tile_starts[t]
            for py in range(y0, y1):
                pyc = py + 0.5
                for px in range(x0, x1):
                    pxc = px + 0.5
                    end_k = start + n_contrib[py, px]
                    trans_run = trans_final[py, px]
                    sr = trans_run * background[0]
                    sg = trans_run * background[1]
                    sb = trans_run * background[2]
                    sa = 0.0
                    dr = d_img[py, px, 0]
                    dg_ = d_img[py, px, 1]
                    db_ = d_img[py, px, 2]
                    for k in range(end_k - 1, start - 1, -1):
                        s = tile_entries[k]
                        dx = pxc - mean2d[s, 0]
                        dy = pyc - mean2d[s, 1]
                        power = -0.5 * (conic[s, 0] * dx * dx + conic[s, 2] * dy * dy) \
                            - conic[s, 1] * dx * dy
                        if power < -POWER_CUTOFF:
                            continue
                        g = exp(power)
                        a = opac[s] * g
                        clamped = a > ALPHA_MAX
                        if clamped:
                            a = ALPHA_MAX
                        if a < ALPHA_MIN:
                            continue
                        one_minus = 1.0 - a
                        t_here = trans_run / one_minus
                        w = t_here * a

                        d_color[s, 0] += w * dr
                        d_color[s, 1] += w * dg_
                        d_color[s, 2] += w * db_
                        da = dr * (t_here * color[s, 0] - sr / one_minus) \
                            + dg_ * (t_here * color[s, 1] - sg / one_minus) \
                            + db_ * (t_here * color[s, 2] - sb / one_minus) \
                            + d_alpha[py, px] * (t_here - sa / one_minus)
                        if not clamped:
                            d_opac[s] += g * da
                            dpow = opac[s] * g * da
                            d_conic[s, 0] += -0.5 * dx * dx * dpow
                            d_conic[s, 1] += -dx * dy * dpow
                            d_conic[s, 2] += -0.5 * dy * dy * dpow
                            d_mean2d[s, 0] += dpow * (conic[s, 0] * dx + conic[s, 1] * dy)
                            d_mean2d[s, 1] += dpow * (conic[s, 2] * dy + conic[s, 1] * dx)

                        sr += w * color[s, 0]
                        sg += w * color[s, 1]
                        sb += w * color[s, 2]
                        sa += w
                        trans_run = t_here
    return d_mean2d_arr, d_conic_arr, d_color_arr, d_opac_arr
