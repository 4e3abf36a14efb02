"""Pairwise-distinct tube families: a direction net crossed with an offset grid."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .geometry import Atom, Tube, atoms_distinct, check_dim
from .nets import DirectionNet, build_direction_net, orthonormal_complement
from ._pykernels import _anchors, _segments


@dataclass
class TubeFamily:
    """Enumerated tubes, stored compactly.

    Tube ``i`` has direction ``net.centers[tube_dir[i]]`` and anchor
    ``1/2 + sum_j offsets[i, j] * offset_spacing * basis[tube_dir[i], j]``.
    Tubes are ordered by direction index, then lexicographically by offset.
    """

    net: DirectionNet
    delta: float
    offset_spacing: float
    M: int
    basis: np.ndarray      # (ndir, d-1, d)
    dir_start: np.ndarray  # (ndir+1,) int64
    tube_slot: np.ndarray  # (n,) int64, slot index within its direction

    @property
    def d(self) -> int:
        return self.net.d

    def __len__(self) -> int:
        return len(self.tube_slot)

    @cached_property
    def tube_dir(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.net), dtype=np.int64), np.diff(self.dir_start))

    def offsets(self, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        side = 2 * self.M + 1
        slot = self.tube_slot[ids].copy()
        out = np.empty((len(ids), self.d - 1), dtype=np.int64)
        for i in range(self.d - 2, -1, -1):
            out[:, i] = slot % side - self.M
            slot //= side
        return out

    def arrays(self, ids=None):
        """(directions, anchors, lo, hi) for the given tube ids (all by default)."""
        ids = np.arange(len(self)) if ids is None else np.asarray(ids, dtype=np.int64)
        dirs_idx = self.tube_dir[ids]
        j = self.offsets(ids)
        anc = np.empty((len(ids), self.d))
        for k in np.unique(dirs_idx):
            sel = dirs_idx == k
            anc[sel] = _anchors(j[sel], self.offset_spacing, self.basis[k], self.d)
        u = self.net.centers[dirs_idx]
        _, lo, hi = _segments(anc, u, 0.5 * self.delta)
        return np.ascontiguousarray(u), anc, lo, hi

    def tube(self, i: int) -> Tube:
        k = int(np.searchsorted(self.dir_start, i, side="right") - 1)
        j = self.offsets([i])[0]
        anchor = [0.5] * self.d
        for a in range(self.d - 1):
            coef = float(j[a]) * self.offset_spacing
            for c in range(self.d):
                anchor[c] += coef * float(self.basis[k, a, c])
        return Tube(tuple(float(x) for x in self.net.centers[k]), tuple(anchor), self.delta)

    def tubes(self, ids=None) -> Iterator[Tube]:
        ids = range(len(self)) if ids is None else ids
        for i in ids:
            yield self.tube(int(i))

    def sweep(self, atoms: Sequence[Atom], mask=None):
        """Incidence counts per tube (and weighted sums) against ``atoms``."""
        centers, diam, weights = atom_arrays(atoms, self.d)
        return kernels.family_sweep(centers, diam, weights, self.delta, self.net.centers, self.basis,
                                    self.offset_spacing, self.M, self.dir_start, self.tube_slot)

    def incident_pairs(self, atoms: Sequence[Atom], mask: np.ndarray, total: int):
        """All incident (tube, atom) pairs for masked tubes, sorted by tube then atom."""
        centers, diam, weights = atom_arrays(atoms, self.d)
        out_t = np.empty(total, dtype=np.int64)
        out_a = np.empty(total, dtype=np.int64)
        n = kernels.family_sweep(centers, diam, weights, self.delta, self.net.centers, self.basis,
                                 self.offset_spacing, self.M, self.dir_start, self.tube_slot,
                                 np.ascontiguousarray(mask, dtype=np.uint8), out_t, out_a)
        order = np.lexsort((out_a[:n], out_t[:n]))
        return out_t[:n][order], out_a[:n][order]


def atom_arrays(atoms: Sequence[Atom], d: int):
    n = len(atoms)
    centers = np.empty((n, d))
    diam = np.empty(n)
    weights = np.empty(n, dtype=np.int64)
    for i, a in enumerate(atoms):
        centers[i] = a.center
        diam[i] = a.diameter
        weights[i] = a.weight
    return centers, diam, weights


def enumerate_tubes(net: DirectionNet, delta: float, offset_spacing: float | None = None) -> TubeFamily:
    """All tubes on the offset grid of every net direction that meet the cube."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0,1)")
    if offset_spacing is None:
        offset_spacing = 2.0 * delta
    if offset_spacing < 2.0 * delta:
        raise ValueError("offset_spacing must be at least 2*delta")
    d = net.d
    h = 0.5 * delta
    M = math.ceil(math.sqrt(d) * (0.5 + h) / offset_spacing)
    grid = np.array(list(itertools.product(range(-M, M + 1), repeat=d - 1)), dtype=np.int64)
    side = 2 * M + 1
    slots_all = np.zeros(len(grid), dtype=np.int64)
    for i in range(d - 1):
        slots_all = slots_all * side + (grid[:, i] + M)
    basis = np.empty((len(net), d - 1, d))
    starts = [0]
    chunks = []
    for k, u in enumerate(net.centers):
        basis[k] = orthonormal_complement(u)
        anc = _anchors(grid, offset_spacing, basis[k], d)
        ok, _, _ = _segments(anc, np.broadcast_to(u, anc.shape), h)
        chunks.append(slots_all[ok])
        starts.append(starts[-1] + int(ok.sum()))
    tube_slot = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    return TubeFamily(net, delta, offset_spacing, M, basis, np.array(starts, dtype=np.int64), tube_slot)


def build_family(d: int, delta: float, offset_spacing: float | None = None) -> TubeFamily:
    """Pairwise-distinct family: separated net, offset grid of spacing 2*delta."""
    check_dim(d)
    return enumerate_tubes(build_direction_net(d, delta, separated=True), delta, offset_spacing)


def tubes_through_pair(a1: Atom, a2: Atom, family: TubeFamily) -> int:
    if not atoms_distinct(a1, a2):
        raise ValueError("atoms must be distinct")
    counts, _ = family.sweep([a1, a2])
    return int(np.count_nonzero(counts == 2))


def random_tubes(d: int, delta: float, n: int, rng: np.random.Generator) -> list[Tube]:
    """Isotropic random lines meeting the cube: uniform direction, uniform offset."""
    h = 0.5 * delta
    radius = math.sqrt(d) * (0.5 + h)
    out: list[Tube] = []
    while len(out) < n:
        u = rng.normal(size=d)
        u /= np.linalg.norm(u)
        nz = np.nonzero(u)[0]
        if u[nz[-1]] < 0:
            u = -u
        basis = orthonormal_complement(u)
        # uniform point in the (d-1)-ball of the given radius
        g = rng.normal(size=d - 1)
        g *= radius * rng.random() ** (1.0 / (d - 1)) / np.linalg.norm(g)
        anchor = [0.5] * d
        for a in range(d - 1):
            coef = float(g[a])
            for c in range(d):
                anchor[c] += coef * float(basis[a, c])
        try:
            out.append(Tube(tuple(float(x) for x in u), tuple(anchor), delta))
        except ValueError:
            continue
    return out


def write_family(family: TubeFamily, fh) -> None:
    n = len(family)
    fh.write(f"{family.d} {family.delta!r} {family.offset_spacing!r} {n}\n")
    step = 1 << 16
    for lo in range(0, n, step):
        ids = np.arange(lo, min(n, lo + step))
        u, anc, _, _ = family.arrays(ids)
        for row_u, row_a in zip(u, anc):
            fh.write(" ".join(f"{x:.17g}" for x in row_u) + " "
                     + " ".join(f"{x:.17g}" for x in row_a) + " 1\n")


def read_tubes(fh) -> tuple[int, float, float, list[Tube]]:
    header = fh.readline().split()
    if len(header) != 4:
        raise ValueError("tube file header must be 'd delta offset_spacing n'")
    d, delta, spacing, n = int(header[0]), float(header[1]), float(header[2]), int(header[3])
    tubes = []
    for line in fh:
        if not line.strip():
            continue
        vals = line.split()
        if len(vals) != 2 * d + 1:
            raise ValueError(f"bad tube line: {line!r}")
        tubes.append(Tube(tuple(map(float, vals[:d])), tuple(map(float, vals[d:2 * d])), delta,
                          int(vals[2 * d])))
    if len(tubes) != n:
        raise ValueError(f"header announces {n} tubes, found {len(tubes)}")
    return d, delta, spacing, tubes
