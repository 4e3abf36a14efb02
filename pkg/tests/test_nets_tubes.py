import io
import math

import numpy as np
import pytest

from tubelab.geometry import Atom, tubes_distinct
from tubelab.nets import (build_direction_net, covering_radius_estimate, orthonormal_complement,
                          pairwise_min_angle)
from tubelab.tubes import build_family, enumerate_tubes, read_tubes, tubes_through_pair, write_family


def test_net_d2_examples():
    net = build_direction_net(2, math.pi / 8)
    assert len(net) == 8
    ang = np.sort(np.arctan2(net.centers[:, 1], net.centers[:, 0]))
    assert np.allclose(ang, np.arange(8) * math.pi / 8)
    assert len(build_direction_net(2, 1 / 256)) == 805


def test_net_d3_size_and_invariants():
    delta = 1 / 32
    net = build_direction_net(3, delta)
    assert 1024 / 4 <= len(net) <= 1024 * 4
    assert pairwise_min_angle(net.centers) > delta / 2
    assert covering_radius_estimate(net, 50_000) <= delta


@pytest.mark.parametrize("d,delta", [(2, 1 / 64), (3, 1 / 16), (4, 1 / 4)])
def test_separated_net_angles_exceed_delta(d, delta):
    net = build_direction_net(d, delta, separated=True)
    assert pairwise_min_angle(net.centers) > delta
    assert covering_radius_estimate(net, 20_000) <= delta


@pytest.mark.parametrize("d", [2, 3, 4])
def test_orthonormal_complement(d):
    rng = np.random.default_rng(d)
    for _ in range(50):
        u = rng.normal(size=d)
        u /= np.linalg.norm(u)
        b = orthonormal_complement(u)
        frame = np.vstack([b, u])
        assert np.allclose(frame @ frame.T, np.eye(d), atol=1e-12)


def test_tiny_family_pairwise_distinct():
    fam = build_family(2, 1 / 4, 1 / 2)
    tubes = list(fam.tubes())
    assert len(tubes) > 1
    for i in range(len(tubes)):
        for j in range(i + 1, len(tubes)):
            assert tubes_distinct(tubes[i], tubes[j])


def test_family_sizes(fam):
    assert 4096 / 16 <= len(fam(2, 1 / 64)) <= 4096 * 16
    assert 65536 / 16 <= len(fam(3, 1 / 16)) <= 65536 * 16


def test_rejects_small_offset_spacing():
    with pytest.raises(ValueError):
        enumerate_tubes(build_direction_net(2, 0.1), 0.1, 0.15)


def test_size_monotone_in_offset_spacing():
    net = build_direction_net(2, 1 / 32, separated=True)
    sizes = [len(enumerate_tubes(net, 1 / 32, s)) for s in (1 / 16, 1 / 12, 1 / 8, 1 / 4)]
    assert sizes == sorted(sizes, reverse=True)


def test_family_tube_matches_arrays(fam):
    f = fam(3, 1 / 16)
    ids = np.array([0, 17, len(f) // 2, len(f) - 1])
    u, anc, lo, hi = f.arrays(ids)
    for row, i in enumerate(ids):
        t = f.tube(int(i))
        assert np.array_equal(np.array(t.direction), u[row])
        assert np.array_equal(np.array(t.anchor), anc[row])
        assert t.segment() == (lo[row], hi[row])


@pytest.mark.parametrize("d,delta,x,target", [(2, 1 / 256, 1 / 2, 2), (2, 1 / 256, 1 / 16, 16), (3, 1 / 32, 1 / 4, 16)])
def test_tubes_through_pair_window(fam, d, delta, x, target):
    rng = np.random.default_rng(11)
    counts = []
    for _ in range(8):
        v = rng.normal(size=d)
        v /= np.linalg.norm(v)
        m = rng.uniform(0.3, 0.7, d)
        a1 = Atom(tuple(m - 0.5 * x * v), delta)
        a2 = Atom(tuple(m + 0.5 * x * v), delta)
        counts.append(tubes_through_pair(a1, a2, fam(d, delta)))
    mean = float(np.mean(counts))
    assert target / 16 <= mean <= target * 16


def test_pair_must_be_distinct(fam):
    a = Atom((0.5, 0.5), 1 / 256)
    with pytest.raises(ValueError):
        tubes_through_pair(a, a, fam(2, 1 / 256))


@pytest.mark.parametrize("d,delta", [(2, 1 / 64), (3, 1 / 16)])
def test_covering_property(fam, d, delta):
    """Random lines through the middle of the cube have a family member within angle delta, offset 2 delta."""
    f = fam(d, delta)
    rng = np.random.default_rng(5)
    n = 100_000 if d == 2 else 20_000
    u = rng.normal(size=(n, d))
    u /= np.linalg.norm(u, axis=1)[:, None]
    p = rng.uniform(0.3, 0.7, size=(n, d))
    k = f.net.nearest(u)
    ang = np.arccos(np.clip(np.abs(np.einsum("ij,ij->i", u, f.net.centers[k])), 0, 1))
    assert ang.max() <= delta
    q = np.einsum("ijk,ik->ij", f.basis[k], p - 0.5)
    j = np.rint(q / f.offset_spacing)
    assert np.abs(q - j * f.offset_spacing).max() <= 2 * delta
    # the rounded offset is an enumerated tube of that direction
    side = 2 * f.M + 1
    slot = np.zeros(n, dtype=np.int64)
    for i in range(d - 1):
        slot = slot * side + (j[:, i].astype(np.int64) + f.M)
    for kk, s in zip(k[:2000], slot[:2000]):
        row = f.tube_slot[f.dir_start[kk]:f.dir_start[kk + 1]]
        pos = np.searchsorted(row, s)
        assert pos < len(row) and row[pos] == s


def test_family_round_trip():
    f = build_family(2, 1 / 16)
    buf = io.StringIO()
    write_family(f, buf)
    buf.seek(0)
    d, delta, spacing, tubes = read_tubes(buf)
    assert (d, delta, spacing) == (2, 1 / 16, 1 / 8)
    assert tubes == list(f.tubes())


def test_read_tubes_rejects_bad_count():
    with pytest.raises(ValueError):
        read_tubes(io.StringIO("2 0.125 0.25 2\n1 0 0.5 0.5 1\n"))
