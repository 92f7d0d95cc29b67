"""Numba kernels for forward rasterization, fusion, and deferred sampling.

All kernels are deterministic: fragments reach a pixel in (source order,
triangle index) order. The tiled kernel gives each tile exactly one writer,
so `prange` parallelism never races on a pixel and produces bit-identical
results to the sequential kernel.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

NEAR_PLANE = 1e-3


@njit(cache=True, inline="always")
def _band(d, kappa, strict, ca, cb, cc):
    if strict:
        return 1.0 / (ca * d * d + cb * d + cc)
    return kappa * d * d


@njit(cache=True, inline="always")
def _depth_weight(d, ca, cb, cc):
    w = 1.0 / (ca * d * d + cb * d + cc)
    if w > 1.0:
        return 1.0
    if w < 0.0:
        return 0.0
    return w


@njit(cache=True, inline="always")
def _top_left(ex, ey):
    # y-down screen: left edges run downward, top edges run leftward
    return ey > 0.0 or (ey == 0.0 and ex < 0.0)


@njit(cache=True, inline="always")
def _tri_vertices(tri, wc, vx, vy, vz):
    """Decode a triangle id into its three grid vertices."""
    k = tri & 1
    cell = tri >> 1
    r = cell // wc
    c = cell - r * wc
    if k == 0:
        r0 = r; c0 = c; r1 = r; c1 = c + 1; r2 = r + 1; c2 = c
    else:
        r0 = r + 1; c0 = c; r1 = r; c1 = c + 1; r2 = r + 1; c2 = c + 1
    return r0, c0, r1, c1, r2, c2


@njit(cache=True)
def _raster_triangle(
    r0, c0, r1, c1, r2, c2,
    vx, vy, vz, feats, cdist,
    scx, scy, scz,
    fx, fy, cx, cy,
    px0, py0, px1, py1,
    ca, cb, cc, kappa, strict, cmax,
    buf_d, buf_w, buf_f, buf_n,
    with_features,
):
    """Rasterize one triangle clipped to [px0..px1]x[py0..py1], fusing fragments."""
    x0 = vx[r0, c0]; y0 = vy[r0, c0]; z0 = vz[r0, c0]
    x1 = vx[r1, c1]; y1 = vy[r1, c1]; z1 = vz[r1, c1]
    x2 = vx[r2, c2]; y2 = vy[r2, c2]; z2 = vz[r2, c2]
    if z0 <= NEAR_PLANE or z1 <= NEAR_PLANE or z2 <= NEAR_PLANE:
        return

    area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    if area == 0.0:
        return
    s = 1.0
    if area < 0.0:
        s = -1.0
        area = -area

    xmn = min(x0, min(x1, x2)); xmx = max(x0, max(x1, x2))
    ymn = min(y0, min(y1, y2)); ymx = max(y0, max(y1, y2))
    ix0 = max(int(np.ceil(xmn)), px0)
    ix1 = min(int(np.floor(xmx)), px1)
    iy0 = max(int(np.ceil(ymn)), py0)
    iy1 = min(int(np.floor(ymx)), py1)
    if ix0 > ix1 or iy0 > iy1:
        return

    e0x = (x2 - x1) * s; e0y = (y2 - y1) * s   # edge v1->v2, opposite v0
    e1x = (x0 - x2) * s; e1y = (y0 - y2) * s   # edge v2->v0, opposite v1
    e2x = (x1 - x0) * s; e2y = (y1 - y0) * s   # edge v0->v1, opposite v2
    tl0 = _top_left(e0x, e0y)
    tl1 = _top_left(e1x, e1y)
    tl2 = _top_left(e2x, e2y)

    iz0 = 1.0 / z0; iz1 = 1.0 / z1; iz2 = 1.0 / z2
    inv_area = 1.0 / area

    for py in range(iy0, iy1 + 1):
        yp = float(py)
        for px in range(ix0, ix1 + 1):
            xp = float(px)
            w0 = e0x * (yp - y1) - e0y * (xp - x1)
            w1 = e1x * (yp - y2) - e1y * (xp - x2)
            w2 = e2x * (yp - y0) - e2y * (xp - x0)
            if w0 < 0.0 or (w0 == 0.0 and not tl0):
                continue
            if w1 < 0.0 or (w1 == 0.0 and not tl1):
                continue
            if w2 < 0.0 or (w2 == 0.0 and not tl2):
                continue
            l0 = w0 * inv_area
            l1 = w1 * inv_area
            l2 = w2 * inv_area
            inv_z = l0 * iz0 + l1 * iz1 + l2 * iz2
            d_f = 1.0 / inv_z
            # perspective-correct attribute barycentrics
            q0 = l0 * iz0 * d_f
            q1 = l1 * iz1 * d_f
            q2 = l2 * iz2 * d_f

            ptx = (xp - cx) * d_f / fx
            pty = (yp - cy) * d_f / fy
            ptz = d_f
            nt = np.sqrt(ptx * ptx + pty * pty + ptz * ptz)
            dsx = ptx - scx; dsy = pty - scy; dsz = ptz - scz
            ns = np.sqrt(dsx * dsx + dsy * dsy + dsz * dsz)
            if nt <= 0.0 or ns <= 0.0:
                continue
            w_v = (ptx * dsx + pty * dsy + ptz * dsz) / (nt * ns)
            if w_v < 0.0:
                w_v = 0.0
            cdist_f = q0 * cdist[r0, c0] + q1 * cdist[r1, c1] + q2 * cdist[r2, c2]
            w_i = 1.0 - cdist_f / cmax
            if w_i < 0.0:
                w_i = 0.0
            w_d = _depth_weight(d_f, ca, cb, cc)
            w1 = w_d * w_v * w_i
            w2 = w1 * w1
            w_fr = w2 * w2 * w1

            n_cur = buf_n[py, px]
            d_cur = buf_d[py, px]
            if n_cur == 0:
                replace = True
                fuse = False
            else:
                bw = _band(d_cur, kappa, strict, ca, cb, cc)
                if d_f < d_cur - bw:
                    replace = True
                    fuse = False
                elif d_f > d_cur + bw:
                    continue
                else:
                    replace = False
                    fuse = True
            if replace:
                buf_d[py, px] = d_f
                buf_w[py, px] = w_fr
                buf_n[py, px] = 1
                if with_features:
                    for ch in range(8):
                        buf_f[py, px, ch] = (
                            q0 * feats[r0, c0, ch]
                            + q1 * feats[r1, c1, ch]
                            + q2 * feats[r2, c2, ch]
                        )
            elif fuse:
                wsum = buf_w[py, px] + w_fr
                if wsum <= 0.0:
                    continue
                alpha = buf_w[py, px] / wsum
                beta = 1.0 - alpha
                buf_d[py, px] = alpha * d_cur + beta * d_f
                buf_w[py, px] = wsum
                buf_n[py, px] = n_cur + 1
                if with_features:
                    for ch in range(8):
                        f_f = (
                            q0 * feats[r0, c0, ch]
                            + q1 * feats[r1, c1, ch]
                            + q2 * feats[r2, c2, ch]
                        )
                        buf_f[py, px, ch] = alpha * buf_f[py, px, ch] + beta * f_f


@njit(cache=True)
def raster_fuse_seq(
    vx, vy, vz, feats, cdist, valid,
    src_center,
    fx, fy, cx, cy, width, height,
    ca, cb, cc, kappa, strict, cmax,
    buf_d, buf_w, buf_f, buf_n,
    with_features,
):
    """Single-pass sequential rasterization of one source view."""
    hc = valid.shape[0]
    wc = valid.shape[1]
    scx = src_center[0]; scy = src_center[1]; scz = src_center[2]
    for r in range(hc):
        for c in range(wc):
            for k in range(2):
                if not valid[r, c, k]:
                    continue
                tri = (r * wc + c) * 2 + k
                r0, c0, r1, c1, r2, c2 = _tri_vertices(tri, wc, vx, vy, vz)
                _raster_triangle(
                    r0, c0, r1, c1, r2, c2,
                    vx, vy, vz, feats, cdist,
                    scx, scy, scz,
                    fx, fy, cx, cy,
                    0, 0, width - 1, height - 1,
                    ca, cb, cc, kappa, strict, cmax,
                    buf_d, buf_w, buf_f, buf_n,
                    with_features,
                )


@njit(cache=True)
def bin_triangles(vx, vy, vz, valid, width, height, tile):
    """Counting-sort triangles into every tile their screen bbox overlaps."""
    hc = valid.shape[0]
    wc = valid.shape[1]
    ntx = (width + tile - 1) // tile
    nty = (height + tile - 1) // tile
    ntiles = ntx * nty
    counts = np.zeros(ntiles, dtype=np.int64)

    spans = np.empty((hc * wc * 2, 4), dtype=np.int32)
    for r in range(hc):
        for c in range(wc):
            for k in range(2):
                tri = (r * wc + c) * 2 + k
                spans[tri, 0] = -1
                if not valid[r, c, k]:
                    continue
                r0, c0, r1, c1, r2, c2 = _tri_vertices(tri, wc, vx, vy, vz)
                z0 = vz[r0, c0]; z1 = vz[r1, c1]; z2 = vz[r2, c2]
                if z0 <= NEAR_PLANE or z1 <= NEAR_PLANE or z2 <= NEAR_PLANE:
                    continue
                x0 = vx[r0, c0]; x1 = vx[r1, c1]; x2 = vx[r2, c2]
                y0 = vy[r0, c0]; y1 = vy[r1, c1]; y2 = vy[r2, c2]
                ix0 = max(int(np.ceil(min(x0, min(x1, x2)))), 0)
                ix1 = min(int(np.floor(max(x0, max(x1, x2)))), width - 1)
                iy0 = max(int(np.ceil(min(y0, min(y1, y2)))), 0)
                iy1 = min(int(np.floor(max(y0, max(y1, y2)))), height - 1)
                if ix0 > ix1 or iy0 > iy1:
                    continue
                ta = ix0 // tile; tb = ix1 // tile
                tc = iy0 // tile; td = iy1 // tile
                spans[tri, 0] = ta; spans[tri, 1] = tb
                spans[tri, 2] = tc; spans[tri, 3] = td
                for ty in range(tc, td + 1):
                    for tx in range(ta, tb + 1):
                        counts[ty * ntx + tx] += 1

    offsets = np.empty(ntiles + 1, dtype=np.int64)
    offsets[0] = 0
    for i in range(ntiles):
        offsets[i + 1] = offsets[i] + counts[i]
    entries = np.empty(offsets[ntiles], dtype=np.int64)
    cursor = offsets[:-1].copy()
    for tri in range(spans.shape[0]):
        ta = spans[tri, 0]
        if ta < 0:
            continue
        for ty in range(spans[tri, 2], spans[tri, 3] + 1):
            for tx in range(ta, spans[tri, 1] + 1):
                t = ty * ntx + tx
                entries[cursor[t]] = tri
                cursor[t] += 1
    return entries, offsets


@njit(cache=True, parallel=True)
def raster_fuse_tiles(
    entries, offsets,
    vx, vy, vz, feats, cdist,
    src_center,
    fx, fy, cx, cy, width, height, tile,
    ca, cb, cc, kappa, strict, cmax,
    buf_d, buf_w, buf_f, buf_n,
    with_features,
):
    """Tile-parallel rasterization; each tile is the sole writer of its pixels."""
    wc = vx.shape[1] - 1
    ntx = (width + tile - 1) // tile
    ntiles = offsets.shape[0] - 1
    scx = src_center[0]; scy = src_center[1]; scz = src_center[2]
    for t in prange(ntiles):
        ty = t // ntx
        tx = t - ty * ntx
        px0 = tx * tile
        py0 = ty * tile
        px1 = min(px0 + tile - 1, width - 1)
        py1 = min(py0 + tile - 1, height - 1)
        for e in range(offsets[t], offsets[t + 1]):
            tri = entries[e]
            r0, c0, r1, c1, r2, c2 = _tri_vertices(tri, wc, vx, vy, vz)
            _raster_triangle(
                r0, c0, r1, c1, r2, c2,
                vx, vy, vz, feats, cdist,
                scx, scy, scz,
                fx, fy, cx, cy,
                px0, py0, px1, py1,
                ca, cb, cc, kappa, strict, cmax,
                buf_d, buf_w, buf_f, buf_n,
                with_features,
            )


@njit(cache=True, parallel=True)
def deferred_sample_source(
    buf_d, buf_n,
    fx_t, fy_t, cx_t, cy_t,
    rot, trans,               # target-camera -> source-camera transform
    src_depth, src_feats, src_valid,
    fx_s, fy_s, cx_s, cy_s,
    ca, cb, cc, kappa, strict, cmax_s,
    accum_w, accum_f, accum_n,
):
    """Stage 2 of deferred warping: back-sample one source view's features.

    For every fused target pixel the surface point is reprojected into the
    source camera; the source depth (nearest sample) gates geometric
    consistency and the feature map is sampled bilinearly. Weighted sums are
    added to the accumulators.
    """
    height, width = buf_d.shape
    hs, ws = src_depth.shape
    r00 = rot[0, 0]; r01 = rot[0, 1]; r02 = rot[0, 2]
    r10 = rot[1, 0]; r11 = rot[1, 1]; r12 = rot[1, 2]
    r20 = rot[2, 0]; r21 = rot[2, 1]; r22 = rot[2, 2]
    tx = trans[0]; ty = trans[1]; tz = trans[2]
    # source camera center in target coordinates: the p solving R p + t = 0
    scx = -(r00 * tx + r10 * ty + r20 * tz)
    scy = -(r01 * tx + r11 * ty + r21 * tz)
    scz = -(r02 * tx + r12 * ty + r22 * tz)

    for py in prange(height):
        for px in range(width):
            if buf_n[py, px] == 0:
                continue
            d = buf_d[py, px]
            ptx = (px - cx_t) * d / fx_t
            pty = (py - cy_t) * d / fy_t
            ptz = d
            psx = r00 * ptx + r01 * pty + r02 * ptz + tx
            psy = r10 * ptx + r11 * pty + r12 * ptz + ty
            psz = r20 * ptx + r21 * pty + r22 * ptz + tz
            if psz <= NEAR_PLANE:
                continue
            us = fx_s * psx / psz + cx_s
            vs = fy_s * psy / psz + cy_s
            if us < 0.0 or us > ws - 1 or vs < 0.0 or vs > hs - 1:
                continue
            ui = int(round(us))
            vi = int(round(vs))
            d_f = src_depth[vi, ui]
            if d_f <= 0.0:
                continue
            # depth-consistency weight, residual measured in the source frame
            bw = _band(psz, kappa, strict, ca, cb, cc)
            resid = abs(psz - d_f) / bw
            w_d = 1.0 - resid * resid
            if w_d <= 0.0:
                continue
            nt = np.sqrt(ptx * ptx + pty * pty + ptz * ptz)
            dsx = ptx - scx; dsy = pty - scy; dsz = ptz - scz
            ns = np.sqrt(dsx * dsx + dsy * dsy + dsz * dsz)
            if nt <= 0.0 or ns <= 0.0:
                continue
            w_v = (ptx * dsx + pty * dsy + ptz * dsz) / (nt * ns)
            if w_v < 0.0:
                continue
            cdx = us - cx_s
            cdy = vs - cy_s
            w_i = 1.0 - np.sqrt(cdx * cdx + cdy * cdy) / cmax_s
            if w_i < 0.0:
                w_i = 0.0
            w_fr = (w_d * w_v * w_i) ** 5
            if w_fr <= 0.0:
                continue

            u0 = int(np.floor(us)); v0 = int(np.floor(vs))
            u1 = min(u0 + 1, ws - 1); v1 = min(v0 + 1, hs - 1)
            au = us - u0; av = vs - v0
            w00 = (1.0 - au) * (1.0 - av)
            w01 = au * (1.0 - av)
            w10 = (1.0 - au) * av
            w11 = au * av
            if not src_valid[v0, u0]: w00 = 0.0
            if not src_valid[v0, u1]: w01 = 0.0
            if not src_valid[v1, u0]: w10 = 0.0
            if not src_valid[v1, u1]: w11 = 0.0
            wn = w00 + w01 + w10 + w11
            if wn <= 0.0:
                continue
            inv_wn = 1.0 / wn
            accum_w[py, px] += w_fr
            accum_n[py, px] += 1
            for ch in range(8):
                val = (
                    w00 * src_feats[v0, u0, ch]
                    + w01 * src_feats[v0, u1, ch]
                    + w10 * src_feats[v1, u0, ch]
                    + w11 * src_feats[v1, u1, ch]
                ) * inv_wn
                accum_f[py, px, ch] += w_fr * val
