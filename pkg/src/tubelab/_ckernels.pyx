# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled incidence kernels.

Floating point operations follow ``tubelab.geometry`` step for step; the
build disables FMA contraction so results match the Python predicates
bit-for-bit.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, floor, INFINITY

cnp.import_array()

ctypedef cnp.float64_t f8
ctypedef cnp.int64_t i8


cdef inline bint _segment(const f8* p, const f8* u, int d, double h, double* lo, double* hi) noexcept nogil:
    cdef double a = -INFINITY
    cdef double b = INFINITY
    cdef double t0, t1, tmp
    cdef int i
    for i in range(d):
        if u[i] == 0.0:
            if p[i] < -h or p[i] > 1.0 + h:
                return False
            continue
        t0 = (-h - p[i]) / u[i]
        t1 = (1.0 + h - p[i]) / u[i]
        if t0 > t1:
            tmp = t0
            t0 = t1
            t1 = tmp
        if t0 > a:
            a = t0
        if t1 < b:
            b = t1
    if a > b:
        return False
    lo[0] = a
    hi[0] = b
    return True


cdef inline double _dist2(const f8* x, const f8* p, const f8* u, int d, double lo, double hi) noexcept nogil:
    cdef double s = 0.0
    cdef double acc = 0.0
    cdef double e
    cdef int i
    for i in range(d):
        s += (x[i] - p[i]) * u[i]
    if s < lo:
        s = lo
    elif s > hi:
        s = hi
    for i in range(d):
        e = (x[i] - p[i]) - s * u[i]
        acc += e * e
    return acc


cdef inline i8 _find(const i8* slots, i8 lo, i8 hi, i8 key) noexcept nogil:
    # lower bound of key in slots[lo:hi]
    cdef i8 mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if slots[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo


def family_sweep(f8[:, ::1] centers, f8[::1] diam, i8[::1] weights, double width,
                 f8[:, ::1] dirs, f8[:, :, ::1] basis, double spacing, i8 M,
                 i8[::1] dir_start, i8[::1] tube_slot,
                 cnp.uint8_t[::1] mask=None, i8[::1] out_tube=None, i8[::1] out_atom=None):
    """Per-tube incidence counts over an enumerated family.

    With ``mask`` and output buffers, records every incident (tube, atom)
    pair whose tube is masked instead of counting (returns number written).
    """
    cdef Py_ssize_t n = centers.shape[0]
    cdef int d = centers.shape[1]
    cdef Py_ssize_t ndir = dirs.shape[0]
    cdef Py_ssize_t ntube = tube_slot.shape[0]
    cdef i8[::1] counts = np.zeros(ntube, dtype=np.int64)
    cdef i8[::1] wsum = np.zeros(ntube, dtype=np.int64)
    cdef double h = 0.5 * width
    cdef double q[3]
    cdef i8 jlo[3]
    cdef i8 jhi[3]
    cdef i8 j[3]
    cdef double anchor[4]
    cdef double u[4]
    cdef double r, rr, R, lo, hi, coef, acc
    cdef Py_ssize_t k, a, i, c
    cdef i8 slot, pos, tid, side = 2 * M + 1, written = 0
    cdef int m = d - 1
    cdef bint record = mask is not None
    cdef bint done
    with nogil:
        for k in range(ndir):
            for c in range(d):
                u[c] = dirs[k, c]
            for a in range(n):
                r = 0.5 * (diam[a] + width)
                rr = r * r
                R = r + 1e-9
                for i in range(m):
                    acc = 0.0
                    for c in range(d):
                        acc += (centers[a, c] - 0.5) * basis[k, i, c]
                    q[i] = acc
                    jlo[i] = <i8>ceil((acc - R) / spacing)
                    jhi[i] = <i8>floor((acc + R) / spacing)
                    if jlo[i] < -M:
                        jlo[i] = -M
                    if jhi[i] > M:
                        jhi[i] = M
                    if jlo[i] > jhi[i]:
                        break
                else:
                    for i in range(m):
                        j[i] = jlo[i]
                    done = False
                    while not done:
                        slot = 0
                        for i in range(m):
                            slot = slot * side + (j[i] + M)
                        pos = _find(&tube_slot[0], dir_start[k], dir_start[k + 1], slot)
                        if pos < dir_start[k + 1] and tube_slot[pos] == slot:
                            for c in range(d):
                                anchor[c] = 0.5
                            for i in range(m):
                                coef = (<double>j[i]) * spacing
                                for c in range(d):
                                    anchor[c] += coef * basis[k, i, c]
                            if _segment(anchor, u, d, h, &lo, &hi):
                                if _dist2(&centers[a, 0], anchor, u, d, lo, hi) <= rr:
                                    tid = pos
                                    if record:
                                        if mask[tid]:
                                            out_tube[written] = tid
                                            out_atom[written] = a
                                            written += 1
                                    else:
                                        counts[tid] += 1
                                        wsum[tid] += weights[a]
                        # odometer over the candidate box
                        i = m - 1
                        while True:
                            j[i] += 1
                            if j[i] <= jhi[i]:
                                break
                            j[i] = jlo[i]
                            if i == 0:
                                done = True
                                break
                            i -= 1
    if record:
        return written
    return np.asarray(counts), np.asarray(wsum)


def index_sweep(f8[:, ::1] t_dir, f8[:, ::1] t_anchor, f8[::1] t_lo, f8[::1] t_hi, f8[::1] t_width,
                f8[:, ::1] centers, f8[::1] diam, i8[::1] weights,
                double cell_size, i8 side, i8[::1] cell_start, i8[::1] cell_atoms, double rmax):
    """Per-tube incidence counts using the bucket grid of a spatial index.

    Cells are indexed with a shift of one so coordinates run over
    ``[-1, side-2]`` in cell units.
    """
    cdef Py_ssize_t m = t_dir.shape[0]
    cdef Py_ssize_t n = centers.shape[0]
    cdef int d = centers.shape[1]
    cdef i8[::1] counts = np.zeros(m, dtype=np.int64)
    cdef i8[::1] wsum = np.zeros(m, dtype=np.int64)
    cdef i8[::1] stamp = np.full(max(n, 1), -1, dtype=np.int64)
    cdef double pt[4]
    cdef i8 clo[4]
    cdef i8 chi[4]
    cdef i8 cc[4]
    cdef Py_ssize_t t, c, nsamp, si, b, cell
    cdef double rho, step, lo, hi, r, s
    cdef bint done
    cdef i8 ia
    with nogil:
        for t in range(m):
            lo = t_lo[t]
            hi = t_hi[t]
            rho = 0.5 * (rmax + t_width[t]) + 0.5 * cell_size + 1e-12
            nsamp = <Py_ssize_t>ceil((hi - lo) / cell_size) + 1
            step = (hi - lo) / (nsamp - 1) if nsamp > 1 else 0.0
            for si in range(nsamp):
                s = lo + si * step
                for c in range(d):
                    pt[c] = t_anchor[t, c] + s * t_dir[t, c]
                    clo[c] = <i8>floor((pt[c] - rho) / cell_size) + 1
                    chi[c] = <i8>floor((pt[c] + rho) / cell_size) + 1
                    if clo[c] < 0:
                        clo[c] = 0
                    if chi[c] > side - 1:
                        chi[c] = side - 1
                    cc[c] = clo[c]
                if any_empty(clo, chi, d):
                    continue
                done = False
                while not done:
                    cell = 0
                    for c in range(d):
                        cell = cell * side + cc[c]
                    for b in range(cell_start[cell], cell_start[cell + 1]):
                        ia = cell_atoms[b]
                        if stamp[ia] == t:
                            continue
                        stamp[ia] = t
                        r = 0.5 * (diam[ia] + t_width[t])
                        if _dist2(&centers[ia, 0], &t_anchor[t, 0], &t_dir[t, 0], d, lo, hi) <= r * r:
                            counts[t] += 1
                            wsum[t] += weights[ia]
                    c = d - 1
                    while True:
                        cc[c] += 1
                        if cc[c] <= chi[c]:
                            break
                        cc[c] = clo[c]
                        if c == 0:
                            done = True
                            break
                        c -= 1
    return np.asarray(counts), np.asarray(wsum)


cdef inline bint any_empty(i8* lo, i8* hi, int d) noexcept nogil:
    cdef int c
    for c in range(d):
        if lo[c] > hi[c]:
            return True
    return False
