"""Measured counts against the rich-tube and incidence bounds, and log-log scaling fits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Atom, Tube
from .incidence import RichnessProfile, incidence_count, thicken_atoms, thicken_tubes

DEFAULT_WINDOW = 16.0
DEFAULT_EPSILON = 0.05

CSV_FIELDS = ("claim", "d", "delta", "W", "k", "S", "D", "seed", "measured", "formula", "constant", "pass")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


@dataclass
class BoundReport:
    claim: str
    measured: float
    formula: float
    constant: float
    params: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.measured <= self.constant * self.formula

    def row(self) -> str:
        p = self.params
        vals = [self.claim] + [_fmt(p.get(k)) for k in ("d", "delta", "W", "k", "S", "D", "seed")]
        vals += [_fmt(self.measured), _fmt(self.formula), _fmt(self.constant), _fmt(self.passed)]
        return ",".join(vals)


def write_reports(reports: Sequence[BoundReport], fh) -> None:
    fh.write(",".join(CSV_FIELDS) + "\n")
    for r in reports:
        fh.write(r.row() + "\n")


@dataclass
class ScalingFit:
    xs: np.ndarray
    ys: np.ndarray
    slope: float
    intercept: float
    residual: float


def fit_scaling(xs: Sequence[float], ys: Sequence[float]) -> ScalingFit:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if len(x) != len(y):
        raise ValueError("xs and ys differ in length")
    if len(x) < 3:
        raise ValueError("need at least 3 points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("scaling fit needs strictly positive values")
    lx, ly = np.log(x), np.log(y)
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = float(np.sqrt(np.mean((A @ coef - ly) ** 2)))
    return ScalingFit(x, y, float(coef[0]), float(coef[1]), res)


def richness_threshold(delta: float, n_atoms: int, d: int = 2, epsilon: float = DEFAULT_EPSILON,
                       C1: float = 4.0) -> float:
    return C1 * delta ** (-epsilon) * delta ** (d - 1) * n_atoms


def theorem_condition(k: float, delta: float, n_atoms: int, epsilon: float, C1: float, d: int = 2) -> bool:
    """Hypothesis on k under which the rich-tube bound is asserted."""
    return k >= richness_threshold(delta, n_atoms, d, epsilon, C1)


def theorem_ratio(t_k_count: int, n_atoms: int, k: int) -> float:
    """Constant implied by one instance: |T_k| k^3 / |A|^2."""
    if n_atoms < 1 or k < 2:
        raise ValueError("need n_atoms >= 1 and k >= 2")
    return t_k_count * float(k) ** 3 / float(n_atoms) ** 2


def k_zero(n_atoms: int, delta: float, d: int) -> float:
    return max(1.0, delta ** (d - 1) * n_atoms)


def corollary_bound(n_atoms: float, n_tubes: float, k0: float) -> float:
    if min(n_atoms, n_tubes, k0) < 0:
        raise ValueError("arguments must be nonnegative")
    return (float(n_atoms) * float(n_tubes)) ** (2.0 / 3.0) + k0 * n_tubes


def dyadic_levels(max_richness: int) -> list[int]:
    out, k = [], 1
    while k <= max_richness:
        out.append(k)
        k *= 2
    return out


def dyadic_incidence_bound(profile: RichnessProfile, n_atoms: int, constant: float | None = None) -> float:
    """Sum over k = 1, 2, 4, ... of k * min(|T_k|, C |A|^2 / k^3).

    Starting at 1 makes the sum dominate the incidence count: a tube of
    richness r in [2^j, 2^(j+1)) is counted 2^(j+1) - 1 >= r times.  By
    default C is the largest per-level constant, so each level uses its
    measured count.
    """
    levels = dyadic_levels(profile.max_richness)
    if not levels or n_atoms == 0:
        return 0.0
    if constant is None:
        constant = max(profile.count(k) * float(k) ** 3 / float(n_atoms) ** 2 for k in levels)
    return float(sum(k * min(profile.count(k), constant * n_atoms ** 2 / float(k) ** 3) for k in levels))


@dataclass
class PropositionTerms:
    term1: float
    term2: float
    measured: int
    S: float
    thickened_atoms: int
    thickened_tubes: int
    max_tube_weight: int

    @property
    def dominant(self) -> str:
        return "term1" if self.term1 >= self.term2 else "term2"

    def passed(self, window: float = DEFAULT_WINDOW) -> bool:
        return self.measured <= window * (math.sqrt(self.S) * self.term1 + self.term2)


def proposition_terms(atoms: Sequence[Atom], tubes: Sequence[Tube], S: float, d: int) -> PropositionTerms:
    """Both right-hand terms of the two-scale incidence bound, and the measured count."""
    if not atoms:
        return PropositionTerms(0.0, 0.0, 0, S, 0, 0, 0)
    delta = atoms[0].diameter
    if S != 1.0 and not 1.0 < S < 1.0 / delta:
        raise ValueError("S must lie in (1, 1/delta)")
    measured = incidence_count(atoms, tubes)
    sw2 = float(sum(a.weight ** 2 for a in atoms))
    ntube = sum(t.weight for t in tubes)
    term1 = math.sqrt(S * delta ** (-(d - 1)) * ntube * sw2)
    As = thicken_atoms(atoms, S)
    Ts = thicken_tubes(list(tubes), S)
    term2 = S ** (1 - d) * incidence_count(As.elements, Ts.elements)
    return PropositionTerms(term1, term2, measured, S, len(As), len(Ts), Ts.max_weight())
