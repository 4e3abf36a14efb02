"""Atom configurations: well-spaced grids, corner grids, the sharpness boxes, random sets."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .geometry import Atom, check_dim

TAGS = ("wellspaced-grid", "corner-grid", "box-example", "slice-example", "uniform-random")


@dataclass(frozen=True)
class WellSpacedParams:
    W: float
    d: int
    delta: float
    jitter: float = 0.0
    seed: int = 0

    def __post_init__(self):
        check_dim(self.d)
        if not 1.0 < self.W < 1.0 / self.delta:
            raise ValueError("require 1 < W < 1/delta")
        if not 0.0 <= self.jitter < 1.0:
            raise ValueError("jitter must lie in [0, 1)")


@dataclass(frozen=True)
class ConfigurationLabel:
    tag: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown configuration {self.tag!r}; expected one of {TAGS}")


def gen_wellspaced_grid(p: WellSpacedParams) -> list[Atom]:
    """One atom per cell of side 1/W, displaced from the cell centre by jitter.

    Each coordinate moves by a uniform amount in ``±jitter*(1/W - delta)/2``,
    so the whole ball stays inside its own cell.
    """
    if p.delta >= 1.0 / p.W:
        raise ValueError("delta must be smaller than 1/W")
    n = int(math.floor(p.W))
    cell = 1.0 / p.W
    rng = np.random.default_rng(p.seed)
    amp = 0.5 * p.jitter * (cell - p.delta)
    atoms = []
    for idx in itertools.product(range(n), repeat=p.d):
        shift = rng.uniform(-amp, amp, p.d) if amp > 0 else np.zeros(p.d)
        # floor(W) cells of side 1/W fit in the cube; centre them as a block
        margin = 0.5 * (1.0 - n * cell)
        center = tuple(float(margin + (i + 0.5) * cell + s) for i, s in zip(idx, shift))
        atoms.append(Atom(center, p.delta))
    return atoms


def _delta_grid(k: int, delta: float, dims: int, d: int) -> list[Atom]:
    if k < 1:
        raise ValueError("k must be positive")
    if k * delta >= 1.0:
        raise ValueError("require k*delta < 1")
    atoms = []
    for idx in itertools.product(range(k), repeat=dims):
        c = [0.5 * delta] * (d - dims) + [(i + 0.5) * delta for i in idx]
        atoms.append(Atom(tuple(c), delta))
    return atoms


def gen_corner_grid(k: int, delta: float, d: int = 2) -> list[Atom]:
    """k x k atoms packed against the corner of the unit square.

    For d > 2 the grid spans the first two coordinates; the rest sit at delta/2.
    """
    check_dim(d)
    atoms = _delta_grid(k, delta, 2, 2)
    if d == 2:
        return atoms
    pad = (0.5 * delta,) * (d - 2)
    return [Atom(a.center + pad, delta) for a in atoms]


def gen_box_example(k: int, delta: float, d: int) -> list[Atom]:
    check_dim(d)
    return _delta_grid(k, delta, d, d)


def gen_slice_example(k: int, delta: float, d: int) -> list[Atom]:
    """The box example restricted to the hyperplane x1 = delta/2."""
    check_dim(d)
    return _delta_grid(k, delta, d - 1, d)


def gen_uniform_random(n: int, delta: float, d: int, seed: int = 0) -> list[Atom]:
    check_dim(d)
    if n < 0:
        raise ValueError("n must be non-negative")
    if n * delta ** d > 1.0:
        raise ValueError("n * delta^d must not exceed 1")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.5 * delta, 1.0 - 0.5 * delta, size=(n, d))
    return [Atom(tuple(map(float, row)), delta) for row in pts]


def generate(label: ConfigurationLabel) -> list[Atom]:
    p = dict(label.params)
    if label.tag == "wellspaced-grid":
        return gen_wellspaced_grid(WellSpacedParams(p["W"], p.get("d", 2), p["delta"],
                                                    p.get("jitter", 0.0), p.get("seed", 0)))
    if label.tag == "corner-grid":
        return gen_corner_grid(p["k"], p["delta"], p.get("d", 2))
    if label.tag == "box-example":
        return gen_box_example(p["k"], p["delta"], p.get("d", 2))
    if label.tag == "slice-example":
        return gen_slice_example(p["k"], p["delta"], p.get("d", 2))
    return gen_uniform_random(p["n"], p["delta"], p.get("d", 2), p.get("seed", 0))


def two_rich_sum(atoms: list[Atom], d: int | None = None) -> float:
    """Sum over unordered pairs of max(dist, delta)^-(d-1)."""
    if len(atoms) < 2:
        raise ValueError("need at least two atoms")
    d = atoms[0].d if d is None else d
    x = np.array([a.center for a in atoms])
    delta = max(a.diameter for a in atoms)
    total = 0.0
    cols = np.arange(len(x))
    for i in range(0, len(x) - 1, 512):
        blk = x[i:i + 512]
        diff = blk[:, None, :] - x[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        term = np.maximum(dist, delta) ** (-(d - 1))
        rows = np.arange(i, i + len(blk))
        total += float(term[cols[None, :] > rows[:, None]].sum())
    return total


def write_atoms(atoms: list[Atom], fh, d: int | None = None, delta: float | None = None) -> None:
    d = atoms[0].d if d is None else d
    delta = atoms[0].diameter if delta is None else delta
    fh.write(f"{d} {delta!r} {len(atoms)}\n")
    for a in atoms:
        fh.write(" ".join(f"{c:.17g}" for c in a.center) + f" {a.weight}\n")


def read_atoms(fh) -> tuple[int, float, list[Atom]]:
    header = fh.readline().split()
    if len(header) != 3:
        raise ValueError("atom file header must be 'd delta n'")
    d, delta, n = int(header[0]), float(header[1]), int(header[2])
    atoms = []
    for line in fh:
        if not line.strip():
            continue
        vals = line.split()
        if len(vals) != d + 1:
            raise ValueError(f"bad atom line: {line!r}")
        atoms.append(Atom(tuple(map(float, vals[:d])), delta, int(vals[d])))
    if len(atoms) != n:
        raise ValueError(f"header announces {n} atoms, found {len(atoms)}")
    return d, delta, atoms
