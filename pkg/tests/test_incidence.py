import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tubelab.configurations import (WellSpacedParams, gen_box_example, gen_corner_grid, gen_uniform_random,
                                    gen_wellspaced_grid)
from tubelab.geometry import Atom, Tube, atom_tube_incident
from tubelab.incidence import (RichnessProfile, brute_force_richness, build_spatial_index, incidence_count,
                               index_counts, rich_tubes, richness, thicken_atoms, thicken_tubes)
from tubelab.tubes import random_tubes


def test_empty_index():
    idx = build_spatial_index([], 0.1, d=2)
    assert len(idx) == 0 and idx.buckets == {}
    assert richness(Tube.through((0.5, 0.5), (1, 0), 0.1), idx) == 0


def test_single_atom_in_every_touched_bucket():
    idx = build_spatial_index([Atom((0.5, 0.5), 0.1)], 0.5)
    assert sorted(idx.buckets) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_index_rejects_small_cells():
    with pytest.raises(ValueError):
        build_spatial_index([Atom((0.5, 0.5), 0.1)], 0.05)


def test_wellspaced_bucket_load():
    atoms = gen_wellspaced_grid(WellSpacedParams(64, 2, 1 / 1024, 0.3, 0))
    idx = build_spatial_index(atoms, 1 / 64)
    assert max(len(v) for v in idx.buckets.values()) <= 4


def test_every_atom_in_exactly_the_buckets_it_meets():
    atoms = gen_uniform_random(60, 0.05, 2, seed=1)
    cs = 0.1
    idx = build_spatial_index(atoms, cs)
    for i, a in enumerate(atoms):
        r = a.diameter / 2
        for cell, members in idx.buckets.items():
            lo = np.array(cell) * cs
            near = np.clip(a.center, lo, lo + cs)
            meets = float(((np.array(a.center) - near) ** 2).sum()) <= r * r
            assert (i in members) == meets


def test_richness_examples():
    atoms = gen_corner_grid(3, 1 / 8)
    idx = build_spatial_index(atoms, 1 / 8)
    row = Tube.through((0.5, 1.5 / 8), (1, 0), 1 / 8)
    # a row tube also touches the two neighbouring rows: balls tangent to the tube boundary count
    assert richness(row, idx) == brute_force_richness(row, atoms) == 9
    diag = Tube.through((1 / 16, 1 / 16), (1, 1), 1 / 8)
    assert brute_force_richness(diag, atoms) >= 3
    assert richness(diag, idx) == brute_force_richness(diag, atoms)
    assert richness(Tube.through((0.9, 0.9), (1, 0), 1 / 8), idx) == 0


def test_corner_row_narrow_atoms():
    # with atoms narrower than the tube spacing, the row tube meets exactly its 3 atoms
    atoms = [Atom(((i + 0.5) / 8, (j + 0.5) / 8), 1 / 64) for i in range(3) for j in range(3)]
    row = Tube.through((0.5, 1.5 / 8), (1, 0), 1 / 64)
    assert brute_force_richness(row, atoms) == 3


def test_brute_force_trivial():
    t = Tube.through((0.5, 0.5), (1, 0), 0.1)
    assert brute_force_richness(t, []) == 0
    assert brute_force_richness(t, [Atom((0.3, 0.5), 0.1)]) == 1


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([2, 3]))
def test_index_matches_oracle_random(seed, d):
    rng = np.random.default_rng(seed)
    delta = 1 / 16
    atoms = gen_uniform_random(40, delta, d, seed)
    tubes = random_tubes(d, delta, 40, rng)
    idx = build_spatial_index(atoms, delta)
    fast = index_counts(tubes, idx)[0]
    assert fast.tolist() == [brute_force_richness(t, atoms) for t in tubes]


def test_rich_tubes_examples(fam):
    f = fam(2, 1 / 512)
    atoms = gen_corner_grid(8, 1 / 512)
    ids, prof = rich_tubes(atoms, f, 8)
    assert 4096 / 16 <= len(ids) <= 4096 * 16
    assert len(rich_tubes(atoms, f, 65)[0]) == 0
    with pytest.raises(ValueError):
        rich_tubes(atoms, f, 0)
    box = gen_box_example(4, 1 / 64, 2)
    ids, _ = rich_tubes(box, fam(2, 1 / 64), 4)
    assert 256 / 16 <= len(ids) <= 256 * 16


def test_profile_consistency(fam):
    f = fam(2, 1 / 64)
    atoms = gen_wellspaced_grid(WellSpacedParams(16, 2, 1 / 64, 0.3, 3))
    _, prof = rich_tubes(atoms, f, 1)
    levels = [prof.count(k) for k in range(prof.max_richness + 2)]
    assert all(a >= b for a, b in zip(levels, levels[1:]))
    assert prof.count(1) <= len(f)
    s = sum((prof.count(k) - prof.count(k + 1)) * k for k in range(1, prof.max_richness + 1))
    assert s == prof.total_incidences() == incidence_count(atoms, f)
    csv = prof.to_csv().splitlines()
    assert csv[0] == "k,count" and csv[1] == f"{prof.max_richness},{prof.count(prof.max_richness)}"


def test_incidence_count_examples():
    t = Tube.through((0.5, 0.5), (1, 0), 0.1, weight=2)
    assert incidence_count([Atom((0.3, 0.5), 0.1, 3)], [t]) == 6
    assert incidence_count([Atom((0.3, 0.9), 0.1, 3)], [t]) == 0


def test_incidence_count_box(fam):
    atoms = gen_box_example(4, 1 / 64, 2)
    f = fam(2, 1 / 64)
    ids, _ = rich_tubes(atoms, f, 4)
    inc = incidence_count(atoms, list(f.tubes(ids)))
    assert 1024 / 16 <= inc <= 1024 * 16


def test_thicken_atoms():
    atoms = gen_uniform_random(30, 1 / 64, 2, seed=0)
    assert thicken_atoms(atoms, 1.0).elements == atoms
    pair = [Atom((0.01, 0.01), 1 / 64), Atom((0.02, 0.02), 1 / 64)]
    th = thicken_atoms(pair, 4)
    assert len(th) == 1 and th.elements[0].weight == 2 and th.elements[0].diameter == 4 / 64
    with pytest.raises(ValueError):
        thicken_atoms(atoms, 64)
    with pytest.raises(ValueError):
        thicken_atoms(atoms, 0.5)


def test_thicken_wellspaced_keeps_all_atoms():
    atoms = gen_wellspaced_grid(WellSpacedParams(64, 2, 1 / 4096, 0.3, 0))
    th = thicken_atoms(atoms, 8)
    assert len(th) == len(atoms) and th.max_weight() == 1


def test_thicken_tubes_basic():
    t = Tube.through((0.5, 0.5), (1, 0), 1 / 64)
    th = thicken_tubes([t], 4)
    assert len(th) == 1 and th.elements[0].weight == 1
    par = [Tube.through((0.5, 0.5 + j / 64 * 2), (1, 0), 1 / 64) for j in range(-2, 2)]
    # offsets -4, -2, 0, 2 (in units of delta) share the bin [-4 delta, 4 delta) of width 2 S delta
    merged = thicken_tubes(par, 4)
    assert len(merged) == 1 and merged.elements[0].weight == 4


def test_thicken_full_family_weight_cap(fam):
    f = fam(2, 1 / 256)
    tubes = list(f.tubes())
    th = thicken_tubes(tubes, 4)
    assert th.total_weight() == len(tubes)
    assert th.max_weight() <= 16


def test_thickening_monotone(fam):
    atoms = gen_box_example(16, 1 / 256, 2)
    f = fam(2, 1 / 256)
    ids, _ = rich_tubes(atoms, f, 16)
    tubes = list(f.tubes(ids))
    base = incidence_count(atoms, tubes)
    for S in (2, 4):
        A = thicken_atoms(atoms, S)
        T = thicken_tubes(tubes, S)
        assert A.total_weight() == len(atoms) and T.total_weight() == len(tubes)
        assert incidence_count(A.elements, T.elements) >= base
