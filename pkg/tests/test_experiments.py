import io
import os

import pytest

from tubelab.cli import main
from tubelab.experiments import ConfigError, emit_plot_data, parse_config, read_rows, run_sweep


def test_parse_valid():
    cfg = parse_config("experiment=oracle-check\nd=2\ndelta=0.125\nseed=1")
    assert cfg.experiment == "oracle-check" and cfg.seed == 1 and cfg.values["delta"] == [0.125]


def test_parse_ranges_lists_fractions_comments():
    cfg = parse_config("# sweep\nexperiment=corner-grid\ndelta=1/128:1/1024:1/2  # four points\nk=4,8\n")
    assert cfg.values["delta"] == [1 / 128, 1 / 256, 1 / 512, 1 / 1024]
    assert cfg.values["k"] == [4, 8]
    assert len(cfg.tuples()) == 8


@pytest.mark.parametrize("text,msg", [
    ("experiment=oracle-check\nd=2\ndelta=2.0", "delta must lie in (0,1)"),
    ("experiment=theorem-sweep\nW=4\ndelta=0.5", "require W < 1/delta"),
    ("experiment=oracle-check\nd=2\ndelta=0.1\ncolour=red", "unknown key"),
    ("experiment=box-example\nd=2\ndelta=0.1", "missing required key 'k'"),
    ("experiment=box-example\nd=2\ndelta=0.1\nk=10", "require k*delta < 1"),
    ("experiment=proposition-check\nfamily=box-example\nd=2\ndelta=1/64\nk=4\nS=100", "S must lie in (1, 1/delta)"),
    ("experiment=oracle-check\nd=2\ndelta=0.1\nk=2.5", "k must be an integer"),
    ("experiment=oracle-check\nd=2\nd=3\ndelta=0.1", "duplicate key"),
])
def test_parse_errors(text, msg):
    with pytest.raises(ConfigError) as e:
        parse_config(text)
    assert msg in str(e.value)


def test_parse_error_names_line():
    with pytest.raises(ConfigError) as e:
        parse_config("experiment=oracle-check\nd=2\n\ndelta=2.0\n")
    assert str(e.value).startswith("line 4:")


def test_parse_rejects_mismatched_subcommand():
    with pytest.raises(ConfigError):
        parse_config("experiment=oracle-check\nd=2\ndelta=0.125", "pair-tubes")


def test_empty_range_gives_header_only(tmp_path):
    cfg = parse_config("experiment=corner-grid\ndelta=1/128:1/64:1/2\nk=8")
    res = run_sweep(cfg, 1, str(tmp_path))
    assert res.rows == [] and res.passed
    assert (tmp_path / "corner-grid.csv").read_text() == "d,delta,k,n_atoms,t_k,formula,ratio,incidences\n"


def test_oracle_random_tubes(tmp_path):
    cfg = parse_config("experiment=oracle-check\nd=2\ndelta=1/8\nk=3\nconfig=corner-grid\nn_tubes=50")
    res = run_sweep(cfg, 1, str(tmp_path))
    assert res.rows[0]["n_tubes"] == 50 and res.rows[0]["agree"] and res.passed


def test_pair_tubes_slope():
    cfg = parse_config("experiment=pair-tubes\nd=2\ndelta=1/256\nx=1/2:1/32:1/2\npairs=8")
    res = run_sweep(cfg)
    assert len(res.rows) == 5 and res.passed


def test_determinism_across_workers(tmp_path):
    text = "experiment=pair-tubes\nd=2\ndelta=1/64\nx=1/2:1/8:1/2\npairs=4\nseed=3"
    run_sweep(parse_config(text), 1, str(tmp_path / "a"))
    run_sweep(parse_config(text), 3, str(tmp_path / "b"))
    for name in ("pair-tubes.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_plot_data():
    buf = io.StringIO()
    emit_plot_data([], "x", "y", buf)
    assert buf.getvalue().startswith("# x=x y=y\n# loglog fit unavailable")
    rows = [dict(delta=str(1 / 2 ** i), t=str(2.0 ** i)) for i in range(1, 5)]
    buf = io.StringIO()
    emit_plot_data(rows, "delta", "t", buf)
    lines = buf.getvalue().splitlines()
    assert "slope=-1" in lines[1] and len(lines) == 6
    with pytest.raises(KeyError):
        emit_plot_data(rows, "delta", "nope", io.StringIO())


def test_cli_exit_codes(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("experiment=oracle-check\nd=2\ndelta=1/8\nk=3\n")
    assert main(["oracle-check", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    bad = tmp_path / "bad.cfg"
    bad.write_text("experiment=oracle-check\nd=2\ndelta=2\n")
    assert main(["oracle-check", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["no-such-command"]) == 2
    fail = tmp_path / "f.cfg"
    fail.write_text("experiment=box-example\nd=2\ndelta=1/64\nk=4\nwindow=1.01\n")
    assert main(["box-example", "--config", str(fail), "--out", str(tmp_path / "o")]) == 1


def test_cli_serialize_and_plot(tmp_path):
    a = tmp_path / "a.cfg"
    a.write_text("config=wellspaced-grid\nW=4\nd=2\ndelta=1/64\n")
    assert main(["serialize-atoms", "--config", str(a), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "atoms.txt").read_text().splitlines()[0] == "2 0.015625 16"
    t = tmp_path / "t.cfg"
    t.write_text("d=2\ndelta=1/8\n")
    assert main(["serialize-tubes", "--config", str(t), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "tubes.txt").read_text().startswith("2 0.125 0.25 ")
    c = tmp_path / "c.cfg"
    c.write_text("experiment=corner-grid\ndelta=1/64:1/256:1/2\nk=4\n")
    assert main(["corner-grid", "--config", str(c), "--out", str(tmp_path / "r")]) == 0
    out = tmp_path / "plot.dat"
    assert main(["plot-data", "--input", str(tmp_path / "r" / "corner-grid.csv"), "--x", "delta", "--y", "t_k",
                 "--out", str(out)]) == 0
    assert "slope=" in out.read_text().splitlines()[1]
    assert main(["plot-data", "--input", str(tmp_path / "r" / "corner-grid.csv"), "--x", "delta", "--y", "zz",
                 "--out", str(out)]) == 2
