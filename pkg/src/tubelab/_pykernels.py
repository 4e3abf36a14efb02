"""Numpy implementations of the incidence kernels (used when the extension is absent).

Each array expression reproduces the scalar operation order of
``tubelab.geometry`` so counts agree exactly with the compiled path.
"""
from __future__ import annotations

import itertools

import numpy as np


def _segments(p, u, h):
    # vectorised segment_params over rows of p (m, d) sharing direction rows u (m, d)
    m, d = p.shape
    lo = np.full(m, -np.inf)
    hi = np.full(m, np.inf)
    ok = np.ones(m, dtype=bool)
    for c in range(d):
        uc = u[:, c]
        pc = p[:, c]
        zero = uc == 0.0
        ok &= ~(zero & ((pc < -h) | (pc > 1.0 + h)))
        with np.errstate(divide="ignore", invalid="ignore"):
            t0 = (-h - pc) / uc
            t1 = (1.0 + h - pc) / uc
        a = np.where(zero, -np.inf, np.minimum(t0, t1))
        b = np.where(zero, np.inf, np.maximum(t0, t1))
        lo = np.maximum(lo, a)
        hi = np.minimum(hi, b)
    ok &= lo <= hi
    return ok, lo, hi


def _dist2(x, p, u, lo, hi):
    d = x.shape[1]
    s = (x[:, 0] - p[:, 0]) * u[:, 0]
    for c in range(1, d):
        s += (x[:, c] - p[:, c]) * u[:, c]
    s = np.where(s < lo, lo, np.where(s > hi, hi, s))
    e = (x[:, 0] - p[:, 0]) - s * u[:, 0]
    acc = e * e
    for c in range(1, d):
        e = (x[:, c] - p[:, c]) - s * u[:, c]
        acc += e * e
    return acc


def _anchors(j, spacing, basis_k, d):
    a = np.full((len(j), d), 0.5)
    for i in range(basis_k.shape[0]):
        coef = j[:, i].astype(np.float64) * spacing
        a += coef[:, None] * basis_k[i][None, :]
    return a


def family_sweep(centers, diam, weights, width, dirs, basis, spacing, M, dir_start, tube_slot,
                 mask=None, out_tube=None, out_atom=None):
    n, d = centers.shape
    m = d - 1
    ntube = len(tube_slot)
    counts = np.zeros(ntube, dtype=np.int64)
    wsum = np.zeros(ntube, dtype=np.int64)
    written = 0
    if n == 0:
        return 0 if mask is not None else (counts, wsum)
    h = 0.5 * width
    r = 0.5 * (diam + width)
    rr = r * r
    R = r + 1e-9
    side = 2 * M + 1
    span = int(np.floor(2.0 * R.max() / spacing)) + 2
    box = np.array(list(itertools.product(range(span), repeat=m)), dtype=np.int64)
    aidx_all = np.repeat(np.arange(n), len(box))
    for k in range(len(dirs)):
        slots_k = tube_slot[dir_start[k]:dir_start[k + 1]]
        if len(slots_k) == 0:
            continue
        q = np.empty((n, m))
        for i in range(m):
            acc = (centers[:, 0] - 0.5) * basis[k, i, 0]
            for c in range(1, d):
                acc += (centers[:, c] - 0.5) * basis[k, i, c]
            q[:, i] = acc
        jlo = np.ceil((q - R[:, None]) / spacing).astype(np.int64)
        jhi = np.floor((q + R[:, None]) / spacing).astype(np.int64)
        j = (jlo[:, None, :] + box[None, :, :]).reshape(-1, m)
        keep = np.all((j <= np.repeat(jhi, len(box), axis=0)) & (j >= -M) & (j <= M), axis=1)
        j = j[keep]
        aidx = aidx_all[keep]
        slot = np.zeros(len(j), dtype=np.int64)
        for i in range(m):
            slot = slot * side + (j[:, i] + M)
        pos = np.searchsorted(slots_k, slot)
        hit = pos < len(slots_k)
        hit[hit] = slots_k[pos[hit]] == slot[hit]
        j, aidx, pos = j[hit], aidx[hit], pos[hit]
        if len(j) == 0:
            continue
        anc = _anchors(j, spacing, basis[k], d)
        u = np.broadcast_to(dirs[k], anc.shape)
        ok, lo, hi = _segments(anc, u, h)
        inc = ok & (_dist2(centers[aidx], anc, u, lo, hi) <= rr[aidx])
        tid = dir_start[k] + pos[inc]
        aidx = aidx[inc]
        if mask is not None:
            sel = mask[tid].astype(bool)
            cnt = int(sel.sum())
            # keep the compiled kernel's (atom, candidate) order within a direction
            order = np.lexsort((tid[sel], aidx[sel]))
            out_tube[written:written + cnt] = tid[sel][order]
            out_atom[written:written + cnt] = aidx[sel][order]
            written += cnt
        else:
            np.add.at(counts, tid, 1)
            np.add.at(wsum, tid, weights[aidx])
    if mask is not None:
        return written
    return counts, wsum


def index_sweep(t_dir, t_anchor, t_lo, t_hi, t_width, centers, diam, weights,
                cell_size, side, cell_start, cell_atoms, rmax):
    m = len(t_dir)
    d = centers.shape[1] if centers.ndim == 2 else t_dir.shape[1]
    counts = np.zeros(m, dtype=np.int64)
    wsum = np.zeros(m, dtype=np.int64)
    if len(centers) == 0:
        return counts, wsum
    strides = side ** np.arange(d - 1, -1, -1)
    for t in range(m):
        lo, hi = t_lo[t], t_hi[t]
        rho = 0.5 * (rmax + t_width[t]) + 0.5 * cell_size + 1e-12
        nsamp = int(np.ceil((hi - lo) / cell_size)) + 1
        step = (hi - lo) / (nsamp - 1) if nsamp > 1 else 0.0
        s = lo + np.arange(nsamp) * step
        pts = t_anchor[t][None, :] + s[:, None] * t_dir[t][None, :]
        clo = np.maximum(np.floor((pts - rho) / cell_size).astype(np.int64) + 1, 0)
        chi = np.minimum(np.floor((pts + rho) / cell_size).astype(np.int64) + 1, side - 1)
        cells = set()
        for a, b in zip(clo, chi):
            if np.any(a > b):
                continue
            for cc in itertools.product(*[range(x, y + 1) for x, y in zip(a, b)]):
                cells.add(int(np.dot(cc, strides)))
        if not cells:
            continue
        ids = np.unique(np.concatenate(
            [cell_atoms[cell_start[c]:cell_start[c + 1]] for c in cells]))
        if len(ids) == 0:
            continue
        x = centers[ids]
        p = np.broadcast_to(t_anchor[t], x.shape)
        u = np.broadcast_to(t_dir[t], x.shape)
        r = 0.5 * (diam[ids] + t_width[t])
        inc = _dist2(x, p, u, np.full(len(ids), lo), np.full(len(ids), hi)) <= r * r
        counts[t] = int(inc.sum())
        wsum[t] = int(weights[ids][inc].sum())
    return counts, wsum
