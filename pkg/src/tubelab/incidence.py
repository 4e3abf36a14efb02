"""Richness and weighted incidence counts, the brute-force oracle, and S-thickening."""
from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from . import kernels
from ._pykernels import _dist2
from .geometry import Atom, Tube, atom_tube_incident
from .nets import build_direction_net, orthonormal_complement
from .tubes import TubeFamily, atom_arrays


@dataclass
class SpatialIndex:
    """Uniform bucket grid over the cube; each atom is listed in every cell its ball meets."""

    cell_size: float
    d: int
    side: int                 # cells per axis, including one padding cell on each side
    cell_start: np.ndarray    # CSR offsets, length side**d + 1
    cell_atoms: np.ndarray
    centers: np.ndarray
    diam: np.ndarray
    weights: np.ndarray

    @cached_property
    def buckets(self) -> dict[tuple[int, ...], list[int]]:
        """Non-empty buckets keyed by integer cell coordinates (``floor(x / cell_size)``)."""
        out = {}
        counts = np.diff(self.cell_start)
        for cell in np.nonzero(counts)[0]:
            coords = np.unravel_index(int(cell), (self.side,) * self.d)
            key = tuple(int(c) - 1 for c in coords)
            out[key] = self.cell_atoms[self.cell_start[cell]:self.cell_start[cell + 1]].tolist()
        return out

    @property
    def max_diameter(self) -> float:
        return float(self.diam.max()) if len(self.diam) else 0.0

    def __len__(self):
        return len(self.centers)


def build_spatial_index(atoms: Sequence[Atom], cell_size: float, d: int | None = None) -> SpatialIndex:
    if d is None:
        d = atoms[0].d if atoms else 2
    centers, diam, weights = atom_arrays(atoms, d)
    if len(atoms) and cell_size < diam.max():
        raise ValueError("cell_size must be at least the atom diameter")
    if cell_size <= 0:
        raise ValueError("cell_size must be positive")
    g = int(math.ceil(1.0 / cell_size))
    side = g + 2
    members = defaultdict(list)
    for i in range(len(atoms)):
        x = centers[i]
        r = 0.5 * diam[i]
        lo = np.floor((x - r) / cell_size).astype(int)
        hi = np.floor((x + r) / cell_size).astype(int)
        for cell in itertools.product(*[range(a, b + 1) for a, b in zip(lo, hi)]):
            # exact ball / closed box test
            box_lo = np.array(cell) * cell_size
            nearest = np.clip(x, box_lo, box_lo + cell_size)
            if float(((x - nearest) ** 2).sum()) <= r * r:
                flat = 0
                for c in cell:
                    flat = flat * side + (min(max(c, -1), g) + 1)
                members[flat].append(i)
    ncell = side ** d
    counts = np.zeros(ncell + 1, dtype=np.int64)
    for flat, ids in members.items():
        counts[flat + 1] = len(ids)
    cell_start = np.cumsum(counts)
    cell_atoms = np.empty(int(cell_start[-1]), dtype=np.int64)
    for flat, ids in members.items():
        cell_atoms[cell_start[flat]:cell_start[flat] + len(ids)] = ids
    return SpatialIndex(cell_size, d, side, cell_start, cell_atoms, centers, diam, weights)


def _tube_arrays(tubes: Sequence[Tube]):
    m = len(tubes)
    d = tubes[0].d if m else 2
    u = np.empty((m, d))
    p = np.empty((m, d))
    lo = np.empty(m)
    hi = np.empty(m)
    width = np.empty(m)
    w = np.empty(m, dtype=np.int64)
    for i, t in enumerate(tubes):
        seg = t.segment()
        u[i] = t.direction
        p[i] = t.anchor
        lo[i], hi[i] = seg
        width[i] = t.width
        w[i] = t.weight
    return u, p, lo, hi, width, w


def index_counts(tubes: Sequence[Tube], index: SpatialIndex):
    """(richness, weighted atom sum) per tube via the bucket grid."""
    if not tubes:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    u, p, lo, hi, width, _ = _tube_arrays(tubes)
    return kernels.index_sweep(u, p, lo, hi, width, index.centers, index.diam, index.weights,
                               index.cell_size, index.side, index.cell_start, index.cell_atoms,
                               index.max_diameter)


def richness(t: Tube, index: SpatialIndex) -> int:
    """Number of distinct atoms incident to ``t`` (weights ignored)."""
    return int(index_counts([t], index)[0][0])


def brute_force_richness(t: Tube, atoms: Sequence[Atom]) -> int:
    return sum(1 for a in atoms if atom_tube_incident(a, t))


def brute_force_counts(u, p, lo, hi, width, centers, diam, chunk: int = 1 << 20) -> np.ndarray:
    """Linear-scan richness for many tubes, vectorised over (tube, atom) pairs."""
    m, n = len(u), len(centers)
    out = np.zeros(m, dtype=np.int64)
    if m == 0 or n == 0:
        return out
    step = max(1, chunk // n)
    for i in range(0, m, step):
        sl = slice(i, min(m, i + step))
        k = sl.stop - sl.start
        ti = np.repeat(np.arange(k), n)
        ai = np.tile(np.arange(n), k)
        r = 0.5 * (diam[ai] + width[sl][ti])
        d2 = _dist2(centers[ai], p[sl][ti], u[sl][ti], lo[sl][ti], hi[sl][ti])
        out[sl] = np.bincount(ti, weights=(d2 <= r * r), minlength=k).astype(np.int64)
    return out


@dataclass
class RichnessProfile:
    """Per-tube richness with cumulative level counts ``|T_k|`` (richness >= k)."""

    per_tube: np.ndarray

    @cached_property
    def _cum(self) -> np.ndarray:
        if len(self.per_tube) == 0:
            return np.zeros(1, dtype=np.int64)
        hist = np.bincount(self.per_tube)
        return np.cumsum(hist[::-1])[::-1]

    @property
    def max_richness(self) -> int:
        return len(self._cum) - 1 if len(self.per_tube) else 0

    def count(self, k: int) -> int:
        if k < 0:
            raise ValueError("k must be non-negative")
        return int(self._cum[k]) if k < len(self._cum) else 0

    @property
    def levels(self) -> dict[int, int]:
        return {k: int(self._cum[k]) for k in range(1, len(self._cum))}

    def total_incidences(self) -> int:
        return int(self.per_tube.sum())

    def to_csv(self) -> str:
        rows = ["k,count"]
        for k in range(self.max_richness, 0, -1):
            rows.append(f"{k},{self.count(k)}")
        return "\n".join(rows) + "\n"


def richness_profile(atoms: Sequence[Atom], family: TubeFamily) -> RichnessProfile:
    counts, _ = family.sweep(atoms)
    return RichnessProfile(counts)


def rich_tubes(atoms: Sequence[Atom], family: TubeFamily, k: int):
    """Ids of family tubes with richness >= k, and the full profile."""
    if k < 1:
        raise ValueError("k must be at least 1")
    prof = richness_profile(atoms, family)
    return np.nonzero(prof.per_tube >= k)[0], prof


def incidence_count(atoms: Sequence[Atom], tubes: Union[Sequence[Tube], TubeFamily]) -> int:
    """Weighted incidence sum over all (atom, tube) pairs."""
    if not atoms or not len(tubes):
        return 0
    if isinstance(tubes, TubeFamily):
        _, wsum = tubes.sweep(atoms)
        return int(wsum.sum())
    cell = max(max(a.diameter for a in atoms), max(t.width for t in tubes))
    index = build_spatial_index(atoms, cell)
    _, wsum = index_counts(tubes, index)
    tw = np.array([t.weight for t in tubes], dtype=np.int64)
    return int((wsum * tw).sum())


@dataclass
class ThickenedSet:
    S: float
    elements: list

    def total_weight(self) -> int:
        return sum(e.weight for e in self.elements)

    def max_weight(self) -> int:
        return max((e.weight for e in self.elements), default=0)

    def __len__(self):
        return len(self.elements)


def _check_scale(S: float, delta: float) -> None:
    if S == 1.0:
        return
    if not 1.0 < S < 1.0 / delta:
        raise ValueError("S must lie in (1, 1/delta)")


def thicken_atoms(atoms: Sequence[Atom], S: float) -> ThickenedSet:
    """Snap centres to the S*delta grid and merge coinciding atoms."""
    if not atoms:
        return ThickenedSet(S, [])
    delta = atoms[0].diameter
    _check_scale(S, delta)
    if S == 1.0:
        return ThickenedSet(S, list(atoms))
    pitch = S * delta
    merged: dict[tuple[int, ...], int] = {}
    for a in atoms:
        key = tuple(int(math.floor(c / pitch)) for c in a.center)
        merged[key] = merged.get(key, 0) + a.weight
    out = []
    for key in sorted(merged):
        center = tuple(min(1.0, (i + 0.5) * pitch) for i in key)
        out.append(Atom(center, pitch, merged[key]))
    return ThickenedSet(S, out)


def thicken_tubes(tubes: Sequence[Tube], S: float) -> ThickenedSet:
    """Snap directions to an S*delta net and offsets to a 2*S*delta grid; merge coincident tubes.

    The offset coordinates of a tube are taken in its own orthonormal frame and
    reused verbatim in the frame of the snapped direction.
    """
    if not tubes:
        return ThickenedSet(S, [])
    delta = tubes[0].width
    _check_scale(S, delta)
    if S == 1.0:
        return ThickenedSet(S, list(tubes))
    width = S * delta
    d = tubes[0].d
    net = build_direction_net(d, width)
    u = np.array([t.direction for t in tubes])
    nearest = net.nearest(u)
    pitch = 2.0 * width
    merged: dict[tuple, int] = {}
    frames: dict[int, np.ndarray] = {}
    for t, k in zip(tubes, nearest):
        own = orthonormal_complement(np.array(t.direction))
        off = own @ (np.array(t.anchor) - 0.5)
        # fine grid offsets land on exact multiples of 2*delta; nudge against float noise
        key = (int(k),) + tuple(int(math.floor(o / pitch + 0.5 + 1e-9)) for o in off)
        merged[key] = merged.get(key, 0) + t.weight
    out = []
    for key in sorted(merged):
        k = key[0]
        if k not in frames:
            frames[k] = orthonormal_complement(net.centers[k])
        anchor = [0.5] * d
        for a, j in enumerate(key[1:]):
            coef = float(j) * pitch
            for c in range(d):
                anchor[c] += coef * float(frames[k][a, c])
        try:
            out.append(Tube(tuple(float(x) for x in net.centers[k]), tuple(anchor), width, merged[key]))
        except ValueError:
            # snapped axis left the expanded cube: keep the mass on the grid point nearest the centre
            out.append(_fallback_tube(net.centers[k], frames[k], key[1:], pitch, width, merged[key]))
    return ThickenedSet(S, _merge_equal(out))


def _fallback_tube(u, frame, j, pitch, width, weight) -> Tube:
    # largest shrink of the offset toward the centre that meets the cube; off-grid, so it never
    # lands on another snapped tube
    lam_ok, lam_bad = 0.0, 1.0
    for _ in range(60):
        lam = 0.5 * (lam_ok + lam_bad)
        try:
            _offset_tube(u, frame, j, lam * pitch, width, weight)
            lam_ok = lam
        except ValueError:
            lam_bad = lam
    return _offset_tube(u, frame, j, lam_ok * pitch, width, weight)


def _offset_tube(u, frame, j, pitch, width, weight) -> Tube:
    anchor = [0.5] * len(u)
    for a, x in enumerate(j):
        coef = float(x) * pitch
        for c in range(len(u)):
            anchor[c] += coef * float(frame[a, c])
    return Tube(tuple(float(x) for x in u), tuple(anchor), width, weight)


def _merge_equal(tubes: list[Tube]) -> list[Tube]:
    acc: dict[tuple, int] = {}
    for t in tubes:
        key = (t.direction, t.anchor)
        acc[key] = acc.get(key, 0) + t.weight
    width = tubes[0].width if tubes else 0.0
    return [Tube(u, p, width, w) for (u, p), w in acc.items()]
