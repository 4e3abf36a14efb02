import io
import itertools
import math

import numpy as np
import pytest

from tubelab.configurations import (ConfigurationLabel, WellSpacedParams, gen_box_example, gen_corner_grid,
                                    gen_slice_example, gen_uniform_random, gen_wellspaced_grid, generate,
                                    read_atoms, two_rich_sum, write_atoms)
from tubelab.geometry import Atom, atoms_distinct


def test_wellspaced_exact_grid():
    atoms = gen_wellspaced_grid(WellSpacedParams(4, 2, 1 / 64))
    assert sorted(a.center for a in atoms) == sorted(
        ((2 * i + 1) / 8, (2 * j + 1) / 8) for i in range(4) for j in range(4))
    assert len(gen_wellspaced_grid(WellSpacedParams(4, 3, 1 / 64))) == 64


def test_wellspaced_jittered_distinct_and_one_per_cell():
    atoms = gen_wellspaced_grid(WellSpacedParams(16, 2, 1 / 256, 0.3, 1))
    assert len(atoms) == 256
    for a, b in itertools.combinations(atoms, 2):
        assert atoms_distinct(a, b)
    cells = {tuple(int(c * 16) for c in a.center) for a in atoms}
    assert len(cells) == 256


def test_wellspaced_rejects_bad_params():
    with pytest.raises(ValueError):
        WellSpacedParams(4, 2, 0.5)
    with pytest.raises(ValueError):
        WellSpacedParams(1, 2, 0.01)
    with pytest.raises(ValueError):
        WellSpacedParams(4, 2, 0.01, jitter=1.0)


def test_corner_grid():
    assert [a.center for a in gen_corner_grid(1, 1 / 8)] == [(1 / 16, 1 / 16)]
    atoms = gen_corner_grid(3, 1 / 8)
    assert len(atoms) == 9
    assert max(max(a.center) for a in atoms) == 2.5 / 8
    assert all(a.center[2] == 1 / 16 for a in gen_corner_grid(3, 1 / 8, 3))


def test_box_and_slice_sizes():
    assert len(gen_box_example(2, 1 / 8, 2)) == 4
    assert len(gen_box_example(3, 1 / 16, 3)) == 27
    line = gen_slice_example(5, 1 / 16, 2)
    assert len(line) == 5 and len({a.center[0] for a in line}) == 1
    plane = gen_slice_example(4, 1 / 32, 3)
    assert len(plane) == 16 and {a.center[0] for a in plane} == {1 / 64}
    with pytest.raises(ValueError):
        gen_box_example(8, 1 / 8, 2)


def test_uniform_random():
    assert gen_uniform_random(0, 1 / 128, 2) == []
    a = gen_uniform_random(1000, 1 / 128, 2, seed=7)
    assert len(a) == 1000 and a == gen_uniform_random(1000, 1 / 128, 2, seed=7)
    assert a != gen_uniform_random(1000, 1 / 128, 2, seed=8)


def test_generate_dispatch():
    atoms = generate(ConfigurationLabel("box-example", {"k": 2, "delta": 0.125, "d": 3}))
    assert len(atoms) == 8
    with pytest.raises(ValueError):
        ConfigurationLabel("nope")


def test_two_rich_sum_examples():
    assert two_rich_sum([Atom((0.25, 0.5), 0.01), Atom((0.75, 0.5), 0.01)]) == pytest.approx(2.0)
    assert two_rich_sum([Atom((0.25, 0.5, 0.5), 0.01), Atom((0.5, 0.5, 0.5), 0.01)]) == pytest.approx(16.0)


def test_two_rich_sum_matches_loop():
    atoms = gen_uniform_random(40, 1 / 64, 2, seed=2)
    ref = 0.0
    for a, b in itertools.combinations(atoms, 2):
        ref += max(math.dist(a.center, b.center), 1 / 64) ** -1
    assert two_rich_sum(atoms) == pytest.approx(ref, rel=1e-12)


def test_two_rich_sum_wellspaced_w32():
    atoms = gen_wellspaced_grid(WellSpacedParams(32, 2, 1 / 1024))
    n = len(atoms)
    c = two_rich_sum(atoms) / (n * n * math.log(n))
    assert 0 < c < 1


def test_atoms_round_trip():
    atoms = gen_uniform_random(20, 1 / 32, 3, seed=4)
    buf = io.StringIO()
    write_atoms(atoms, buf)
    buf.seek(0)
    d, delta, back = read_atoms(buf)
    assert (d, delta) == (3, 1 / 32) and back == atoms


def test_read_atoms_errors():
    with pytest.raises(ValueError):
        read_atoms(io.StringIO("2 0.1\n"))
    with pytest.raises(ValueError):
        read_atoms(io.StringIO("2 0.1 1\n0.5 0.5\n"))
