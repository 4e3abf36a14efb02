"""Command-line front end."""
from __future__ import annotations

import argparse
import os
import sys

from .configurations import ConfigurationLabel, generate, write_atoms
from .experiments import EXPERIMENTS, ConfigError, emit_plot_data, parse_config, read_rows, run_sweep
from .tubes import build_family, write_family

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tubelab", description="Incidence experiments for delta-atoms and delta-tubes.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} sweep")
        p.add_argument("--config", required=True)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", default=None, help="output directory (default: config 'out' or ./results)")
    p = sub.add_parser("serialize-atoms", help="write a generated atom configuration")
    p.add_argument("--config", required=True,
                   help="key=value file with config=<tag> and its parameters (W, d, delta, k, n, jitter, seed)")
    p.add_argument("--out", default=".")
    p = sub.add_parser("serialize-tubes", help="write the enumerated tube family for d and delta")
    p.add_argument("--config", required=True, help="key=value file with d and delta")
    p.add_argument("--out", default=".")
    p = sub.add_parser("plot-data", help="two-column plot data from a results CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--out", default="-")
    return ap


def _simple_kv(text: str) -> dict:
    from fractions import Fraction

    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        if k == "config":
            out[k] = v
            continue
        try:
            f = Fraction(v)
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"line {lineno}: {k}: cannot parse number {v!r}") from None
        out[k] = int(f) if f.denominator == 1 and k != "delta" else float(f)
    return out


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        if args.cmd in EXPERIMENTS:
            with open(args.config) as fh:
                cfg = parse_config(fh.read(), args.cmd)
            if args.workers < 1:
                raise ConfigError("--workers must be positive")
            out = args.out or cfg.scalars.get("out") or "results"
            res = run_sweep(cfg, args.workers, out)
            for name, m, target, ok in res.checks:
                print(f"{'PASS' if ok else 'FAIL'} {name}: {m} (target {target})")
            print(f"wrote {os.path.join(out, cfg.experiment + '.csv')}")
            return EXIT_OK if res.passed else EXIT_FAIL
        if args.cmd == "serialize-atoms":
            with open(args.config) as fh:
                kv = _simple_kv(fh.read())
            tag = kv.pop("config", None)
            if tag is None:
                raise ConfigError("missing required key 'config'")
            atoms = generate(ConfigurationLabel(tag, kv))
            os.makedirs(args.out, exist_ok=True)
            path = os.path.join(args.out, "atoms.txt")
            with open(path, "w") as fh:
                write_atoms(atoms, fh, kv.get("d", 2), kv["delta"])
            print(f"wrote {len(atoms)} atoms to {path}")
            return EXIT_OK
        if args.cmd == "serialize-tubes":
            with open(args.config) as fh:
                kv = _simple_kv(fh.read())
            for key in ("d", "delta"):
                if key not in kv:
                    raise ConfigError(f"missing required key {key!r}")
            fam = build_family(int(kv["d"]), float(kv["delta"]))
            os.makedirs(args.out, exist_ok=True)
            path = os.path.join(args.out, "tubes.txt")
            with open(path, "w") as fh:
                write_family(fam, fh)
            print(f"wrote {len(fam)} tubes to {path}")
            return EXIT_OK
        if args.cmd == "plot-data":
            with open(args.input) as fh:
                rows, header = read_rows(fh)
            if args.out == "-":
                emit_plot_data(rows, args.x, args.y, sys.stdout, header)
            else:
                with open(args.out, "w") as fh:
                    emit_plot_data(rows, args.x, args.y, fh, header)
            return EXIT_OK
    except (ConfigError, KeyError, ValueError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
