"""Direction nets on the canonical hemisphere (lines through the origin)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import check_dim

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
# latitude/azimuth step of the default d=3 ring net, in units of the resolution;
# keeps the covering radius below the resolution at about 3.5/res^2 points
_D3_DEFAULT_STEP = 1.3
_SEPARATED_STEP = 1.0 + 1e-7


@dataclass(frozen=True)
class DirectionNet:
    d: int
    angular_resolution: float
    centers: np.ndarray  # (n, d), canonical unit rows
    separated: bool = False

    def __len__(self):
        return len(self.centers)

    def nearest(self, vecs) -> np.ndarray:
        """Index of the closest center (as lines) for each row of ``vecs``."""
        v = np.atleast_2d(np.asarray(vecs, dtype=float))
        out = np.empty(len(v), dtype=np.int64)
        for i in range(0, len(v), 2048):
            out[i:i + 2048] = np.argmax(np.abs(v[i:i + 2048] @ self.centers.T), axis=1)
        return out


def _ring_count(sep: float, sin_theta: float) -> int:
    # number of equally spaced points on a circle of colatitude theta whose
    # neighbours subtend an angle > sep
    if sin_theta <= 0.0:
        return 1
    x = math.sin(sep / 2.0) / sin_theta
    if x >= 1.0:
        return 1
    return max(1, math.ceil(math.pi / math.asin(x)) - 1)


def _s2_rings(sep: float, full: bool) -> np.ndarray:
    """Latitude-ring net on S^2 (or its upper hemisphere, antipodes identified)."""
    span = math.pi if full else math.pi / 2.0
    levels = max(1, math.ceil(span / sep) - 1)
    dt = span / levels
    pts = [(0.0, 0.0, 1.0)]
    for l in range(1, levels + 1):
        if full and l == levels:
            pts.append((0.0, 0.0, -1.0))
            continue
        if not full and l == levels:
            # equator: a half circle, since antipodal points coincide as lines
            n = max(1, math.ceil(math.pi / sep) - 1)
            step = math.pi / n
            for j in range(n):
                ph = j * step
                pts.append((math.cos(ph), math.sin(ph), 0.0))
            continue
        th = l * dt
        st, ct = math.sin(th), math.cos(th)
        n = _ring_count(sep, st)
        step = 2.0 * math.pi / n
        off = ((l * _GOLDEN) % 1.0) * step
        for j in range(n):
            ph = off + j * step
            pts.append((st * math.cos(ph), st * math.sin(ph), ct))
    return np.array(pts)


def _s3_levels(sep: float) -> np.ndarray:
    levels = max(1, math.ceil((math.pi / 2.0) / sep) - 1)
    dp = (math.pi / 2.0) / levels
    blocks = [np.array([[0.0, 0.0, 0.0, 1.0]])]
    for l in range(1, levels + 1):
        if l == levels:
            w = _s2_rings(sep, full=False)
            sp, cp = 1.0, 0.0
        else:
            psi = l * dp
            sp, cp = math.sin(psi), math.cos(psi)
            x = math.sin(sep / 2.0) / sp
            w = np.array([[0.0, 0.0, 1.0]]) if x >= 1.0 else _s2_rings(2.0 * math.asin(x) * _SEPARATED_STEP, True)
        blocks.append(np.hstack([sp * w, np.full((len(w), 1), cp)]))
    return np.vstack(blocks)


def _canonicalize_rows(p: np.ndarray) -> np.ndarray:
    p = p / np.linalg.norm(p, axis=1)[:, None]
    for row in p:
        nz = np.nonzero(row)[0]
        if len(nz) and row[nz[-1]] < 0:
            row *= -1.0
    return p


def build_direction_net(d: int, delta: float, separated: bool = False) -> DirectionNet:
    """Net of line directions at angular resolution ``delta``.

    The default net has pairwise angles above ``delta/2`` and covering radius
    at most ``delta``.  ``separated=True`` raises the pairwise angle strictly
    above ``delta`` (needed for pairwise-distinct tube families).
    """
    check_dim(d)
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0,1)")
    if d == 2:
        n = math.ceil(math.pi / delta - 1e-9)
        if separated:
            n -= 1
        n = max(n, 1)
        ang = np.arange(n) * (math.pi / n)
        centers = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        centers[0] = (1.0, 0.0)
    elif d == 3:
        step = _SEPARATED_STEP if separated else _D3_DEFAULT_STEP
        centers = _s2_rings(delta * step, full=False)
    else:
        centers = _s3_levels(delta * _SEPARATED_STEP)
    return DirectionNet(d, delta, _canonicalize_rows(centers), separated)


def pairwise_min_angle(centers: np.ndarray) -> float:
    best = 0.0
    n = len(centers)
    for i in range(0, n, 1024):
        g = np.abs(centers[i:i + 1024] @ centers.T)
        idx = np.arange(i, min(i + 1024, n))
        g[idx - i, idx] = 0.0
        best = max(best, float(g.max()) if g.size else 0.0)
    return math.acos(min(1.0, best))


def covering_radius_estimate(net: DirectionNet, samples: int = 100_000, seed: int = 0) -> float:
    """Largest angle from a random direction to the net (a lower bound on the true radius)."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(samples, net.d))
    x /= np.linalg.norm(x, axis=1)[:, None]
    best = np.empty(samples)
    for i in range(0, samples, 4096):
        best[i:i + 4096] = np.max(np.abs(x[i:i + 4096] @ net.centers.T), axis=1)
    return float(np.arccos(np.clip(best, 0.0, 1.0)).max())


def orthonormal_complement(u: np.ndarray) -> np.ndarray:
    """Rows spanning the hyperplane orthogonal to unit vector ``u`` (Householder)."""
    d = len(u)
    w = np.array(u, dtype=float)
    head = w[:-1]
    # u_d - 1 without cancellation
    w[-1] = -float(head @ head) / (1.0 + u[-1]) if u[-1] > -1.0 else -2.0
    nn = float(w @ w)
    h = np.eye(d)
    if nn > 0.0:
        h -= 2.0 * np.outer(w, w) / nn
    # columns of h map e_i -> orthonormal frame with e_d -> u
    return np.ascontiguousarray(h[:, :-1].T)
