"""D-cell partition, tubechens, and the rescaling maps used by the induction on scales."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._pykernels import _dist2, _segments
from .geometry import Atom, check_dim
from .nets import build_direction_net, orthonormal_complement
from .tubes import TubeFamily, atom_arrays


def cell_coords(x: np.ndarray, D: int) -> np.ndarray:
    """Cell index per coordinate; points on a face go to the lower cell."""
    idx = np.ceil(np.asarray(x, dtype=float) * D).astype(np.int64) - 1
    return np.clip(idx, 0, D - 1)


def flat_cell(idx: np.ndarray, D: int) -> np.ndarray:
    idx = np.atleast_2d(idx)
    out = np.zeros(len(idx), dtype=np.int64)
    for c in range(idx.shape[1]):
        out = out * D + idx[:, c]
    return out


@dataclass
class CellGrid:
    D: int
    d: int
    atom_cell: np.ndarray            # flat cell id per atom
    members: dict[int, np.ndarray]   # non-empty cells only

    @property
    def ncells(self) -> int:
        return self.D ** self.d

    def origin(self, cell_id: int) -> np.ndarray:
        idx = np.unravel_index(int(cell_id), (self.D,) * self.d)
        return np.array(idx, dtype=float) / self.D

    def atoms_in(self, cell_id: int) -> np.ndarray:
        return self.members.get(int(cell_id), np.zeros(0, dtype=np.int64))


def build_cell_grid(D: int, atoms: Sequence[Atom], d: int | None = None) -> CellGrid:
    if D < 1:
        raise ValueError("D must be at least 1")
    d = check_dim(atoms[0].d if d is None and atoms else (d or 2))
    centers = np.array([a.center for a in atoms], dtype=float).reshape(-1, d)
    ids = flat_cell(cell_coords(centers, D), D) if len(atoms) else np.zeros(0, dtype=np.int64)
    order = np.argsort(ids, kind="stable")
    uniq, starts = np.unique(ids[order], return_index=True)
    bounds = list(starts) + [len(ids)]
    members = {int(c): order[bounds[i]:bounds[i + 1]] for i, c in enumerate(uniq)}
    return CellGrid(D, d, ids, members)


@dataclass
class Tubechen:
    tube_id: int          # parent: smallest tube id in the class
    cell_id: int
    w: int
    m: int
    tubes: np.ndarray = field(repr=False)   # every rich tube containing this tubechen
    atoms: np.ndarray = field(repr=False)   # the incident atoms in the cell


def crossed_cells(lo, hi, p, u, D: int):
    """(row, cell) pairs for every cell an axis segment passes through inside the unit cube."""
    n, d = p.shape
    ok, clo, chi = _segments(p, u, 0.0)
    a = np.maximum(lo, clo)
    b = np.minimum(hi, chi)
    ok &= a < b
    planes = np.arange(1, D) / D
    cols = [a[:, None], b[:, None]]
    with np.errstate(divide="ignore", invalid="ignore"):
        for c in range(d):
            t = (planes[None, :] - p[:, c:c + 1]) / u[:, c:c + 1]
            t = np.where((t > a[:, None]) & (t < b[:, None]), t, np.nan)
            cols.append(t)
    brk = np.sort(np.concatenate(cols, axis=1), axis=1)     # nan sorts last
    mid = 0.5 * (brk[:, :-1] + brk[:, 1:])
    valid = ok[:, None] & ~np.isnan(mid) & (brk[:, 1:] > brk[:, :-1])
    rows, k = np.nonzero(valid)
    s = mid[rows, k]
    pts = p[rows] + s[:, None] * u[rows]
    return rows, flat_cell(cell_coords(pts, D), D)


def compute_tubechens(atoms: Sequence[Atom], family: TubeFamily, rich_ids, grid: CellGrid,
                      counts: np.ndarray | None = None) -> list[Tubechen]:
    """Split each rich tube into its cell pieces and group equal pieces.

    Two pieces are the same tubechen when they lie in the same cell and meet
    the same non-empty set of atoms there; pieces meeting no atom stay single.
    """
    rich_ids = np.asarray(rich_ids, dtype=np.int64)
    if len(rich_ids) == 0:
        return []
    if counts is None:
        counts, _ = family.sweep(atoms)
    mask = np.zeros(len(family), dtype=np.uint8)
    mask[rich_ids] = 1
    pt, pa = family.incident_pairs(atoms, mask, int(counts[rich_ids].sum()))
    pc = grid.atom_cell[pa]

    u, p, lo, hi = family.arrays(rich_ids)
    rows, cells = crossed_cells(lo, hi, p, u, grid.D)
    nc = grid.ncells
    piece_keys = np.unique(np.concatenate([rich_ids[rows] * nc + cells, pt * nc + pc]))

    # incident atoms per piece, in atom order
    pair_key = pt * nc + pc
    order = np.lexsort((pa, pair_key))
    pair_key, pa = pair_key[order], pa[order]
    uk, start = np.unique(pair_key, return_index=True)
    bounds = np.append(start, len(pair_key))

    groups: dict[tuple, list[int]] = {}
    atoms_of: dict[tuple, np.ndarray] = {}
    for i, key in enumerate(uk.tolist()):
        seg = pa[bounds[i]:bounds[i + 1]]
        sig = (key % nc,) + tuple(seg.tolist())
        groups.setdefault(sig, []).append(key // nc)
        atoms_of.setdefault(sig, seg)

    out = []
    for sig, tubes in groups.items():
        tubes_arr = np.array(sorted(tubes), dtype=np.int64)
        out.append(Tubechen(int(tubes_arr[0]), int(sig[0]), len(sig) - 1, len(tubes_arr), tubes_arr,
                            atoms_of[sig]))
    empty = np.setdiff1d(piece_keys, uk, assume_unique=True)
    none = np.zeros(0, dtype=np.int64)
    for key in empty.tolist():
        out.append(Tubechen(key // nc, key % nc, 0, 1, np.array([key // nc], dtype=np.int64), none))
    out.sort(key=lambda t: (t.tube_id, t.cell_id, -t.w))
    return out


@dataclass
class TubechenReport:
    k: int
    D: int
    n_rich: int
    incidences: int
    sum_wm: int
    sum_m: int
    identity_ok: bool
    lower_ok: bool
    multiplicity_ok: bool
    m_violations: int
    identity_violators: list = field(default_factory=list)
    short_tubes: list = field(default_factory=list)
    long_tubes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.identity_ok and self.lower_ok and self.multiplicity_ok


def check_tubechen_identities(tubechens: Sequence[Tubechen], rich_counts: Sequence[int], rich_ids,
                              k: int, D: int, d: int, lower_window: float = 1.0,
                              upper_window: float = 2.0) -> TubechenReport:
    """Exact identity, the k-rich lower bound, and the multiplicity window.

    ``rich_counts`` holds the richness of each tube in ``rich_ids``.
    """
    rich_ids = np.asarray(rich_ids, dtype=np.int64)
    rich_counts = np.asarray(rich_counts, dtype=np.int64)
    n = len(rich_ids)
    incidences = int(rich_counts.sum())
    pos = {int(t): i for i, t in enumerate(rich_ids)}
    per_w = np.zeros(n, dtype=np.int64)
    per_pieces = np.zeros(n, dtype=np.int64)
    sum_wm = 0
    sum_m = 0
    m_viol = 0
    cap = D ** (d - 1)
    for tc in tubechens:
        sum_wm += tc.w * tc.m
        sum_m += tc.m
        if not 1 <= tc.m <= cap:
            m_viol += 1
        for t in tc.tubes.tolist():
            per_w[pos[t]] += tc.w
            per_pieces[pos[t]] += 1
    bad = rich_ids[per_w != rich_counts].tolist()
    lo_lim = D / lower_window
    hi_lim = upper_window * math.sqrt(d) * D
    return TubechenReport(
        k, D, n, incidences, sum_wm, sum_m,
        identity_ok=sum_wm == incidences and not bad,
        lower_ok=k * n <= sum_wm,
        multiplicity_ok=lo_lim * n <= sum_m <= hi_lim * n,
        m_violations=m_viol,
        identity_violators=bad,
        short_tubes=rich_ids[per_pieces < lo_lim].tolist(),
        long_tubes=rich_ids[per_pieces > hi_lim].tolist(),
    )


def heavy_tubechen_fraction(tubechens: Sequence[Tubechen], k: int, D: int,
                            threshold_factor: float = 0.5) -> float:
    """Share of sum w*m carried by tubechens with w >= threshold_factor * k / D."""
    if threshold_factor <= 0:
        raise ValueError("threshold_factor must be positive")
    total = sum(t.w * t.m for t in tubechens)
    if total == 0:
        return 0.0
    cut = threshold_factor * k / D
    return sum(t.w * t.m for t in tubechens if t.w >= cut) / total


def write_tubechens(tubechens: Sequence[Tubechen], fh) -> None:
    fh.write("tube_id,cell_id,w,m\n")
    for t in tubechens:
        fh.write(f"{t.tube_id},{t.cell_id},{t.w},{t.m}\n")


@dataclass
class RescaledCell:
    cell_id: int
    D: int
    origin: np.ndarray
    atom_ids: np.ndarray
    local: np.ndarray      # unclamped images of the atom centres
    atoms: list[Atom]

    def to_local(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.origin) * self.D


def rescale_cell(grid: CellGrid, cell_id: int, atoms: Sequence[Atom]) -> RescaledCell:
    """Blow one cell up to the unit cube; delta-atoms become D*delta-atoms."""
    origin = grid.origin(cell_id)
    ids = grid.atoms_in(cell_id)
    local = (np.array([atoms[i].center for i in ids.tolist()], dtype=float).reshape(-1, grid.d)
             - origin) * grid.D
    out = []
    for i, x in zip(ids.tolist(), np.clip(local, 0.0, 1.0)):
        a = atoms[i]
        out.append(Atom(tuple(float(v) for v in x), a.diameter * grid.D, a.weight))
    return RescaledCell(int(cell_id), grid.D, origin, ids, local, out)


def rescaled_cell_richness(cell: RescaledCell, family: TubeFamily, tube_id: int) -> int:
    """Richness of the image of one family tube inside a rescaled cell.

    The parent's segment goes through the same affine map as the atoms, so
    this reproduces the tubechen weight of that piece.
    """
    n = len(cell.atoms)
    if n == 0:
        return 0
    u, p, lo, hi = family.arrays([tube_id])
    D = cell.D
    d = cell.local.shape[1]
    pp = np.broadcast_to((p[0] - cell.origin) * D, (n, d))
    uu = np.broadcast_to(u[0], (n, d))
    d2 = _dist2(cell.local, pp, uu, np.full(n, lo[0] * D), np.full(n, hi[0] * D))
    r = 0.5 * (np.array([a.diameter for a in cell.atoms]) + family.delta * D)
    return int((d2 <= r * r).sum())


@dataclass
class DTube:
    key: tuple
    direction: np.ndarray
    anchor: np.ndarray
    width: float
    tube_ids: np.ndarray


@dataclass
class RescaledDTube:
    tau: DTube
    atoms: list[Atom]             # weighted images of the tubechens parallel to tau
    tubechen_index: list[int]     # which input tubechen each atom came from
    tube_ids: np.ndarray          # rich delta-tubes assigned to tau
    tube_lines: np.ndarray        # (n, 2, d) images of their segment endpoints


def dtube_partition(family: TubeFamily, rich_ids, D: int) -> list[DTube]:
    """Assign each rich tube to one D*delta-tube: nearest coarse direction, then nearest offset."""
    rich_ids = np.asarray(rich_ids, dtype=np.int64)
    width = D * family.delta
    if not 0.0 < width < 1.0:
        raise ValueError("require D*delta < 1")
    if len(rich_ids) == 0:
        return []
    d = family.d
    net = build_direction_net(d, width)
    u, p, _, _ = family.arrays(rich_ids)
    k = net.nearest(u)
    groups: dict[tuple, list[int]] = {}
    frames: dict[int, np.ndarray] = {}
    for kk in np.unique(k).tolist():
        frames[kk] = orthonormal_complement(net.centers[kk])
        sel = np.nonzero(k == kk)[0]
        q = (p[sel] - 0.5) @ frames[kk].T
        j = np.floor(q / width + 0.5).astype(np.int64)
        for row, jj in zip(sel.tolist(), j.tolist()):
            groups.setdefault((kk,) + tuple(jj), []).append(int(rich_ids[row]))
    out = []
    for key in sorted(groups):
        kk = key[0]
        anchor = np.full(d, 0.5)
        for a, jj in enumerate(key[1:]):
            anchor = anchor + (jj * width) * frames[kk][a]
        out.append(DTube(key, net.centers[kk].copy(), anchor, width, np.array(groups[key], dtype=np.int64)))
    return out


def _dtube_map(tau: DTube, d: int):
    frame = orthonormal_complement(tau.direction)
    R = 0.5 * tau.width * (math.sqrt(d - 1) + math.sqrt(d) + 2.0)
    root = math.sqrt(d)

    def f(x):
        rel = np.atleast_2d(x) - tau.anchor
        along = (rel @ tau.direction + 0.5 * root) / root
        across = 0.5 + (rel @ frame.T) / (2.0 * R)
        return np.clip(np.column_stack([along, across]), 0.0, 1.0)

    return f


def rescale_dtube(tau: DTube, atoms: Sequence[Atom], family: TubeFamily,
                  tubechens: Sequence[Tubechen]) -> RescaledDTube:
    """Map tau onto the unit cube: its tubechens become weighted 1/D-atoms, its tubes 1/D-tubes.

    The first coordinate runs along tau, the rest across it; the cross-section
    is scaled so every assigned tube stays inside the image.
    """
    d = family.d
    D = tau.width / family.delta
    members = set(tau.tube_ids.tolist())
    f = _dtube_map(tau, d)
    centers, _, _ = atom_arrays(atoms, d)
    out_atoms, src = [], []
    diam = min(1.0 / D, 0.5)
    for i, tc in enumerate(tubechens):
        if tc.w == 0 or not members.intersection(tc.tubes.tolist()):
            continue
        c = f(centers[tc.atoms].mean(axis=0))[0]
        out_atoms.append(Atom(tuple(float(v) for v in c), diam, tc.w))
        src.append(i)
    ids = np.array(sorted(members), dtype=np.int64)
    if len(ids):
        u, p, lo, hi = family.arrays(ids)
        ends = np.stack([f(p + lo[:, None] * u), f(p + hi[:, None] * u)], axis=1)
    else:
        ends = np.zeros((0, 2, d))
    return RescaledDTube(tau, out_atoms, src, ids, ends)
