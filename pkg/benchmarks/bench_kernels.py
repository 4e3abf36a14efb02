"""Compare the compiled and numpy kernel backends on the same workloads.

Run:  python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from tubelab import kernels
from tubelab.configurations import WellSpacedParams, gen_uniform_random, gen_wellspaced_grid
from tubelab.incidence import build_spatial_index, index_counts
from tubelab.tubes import build_family, random_tubes


def timed(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def workloads():
    fam = build_family(2, 1 / 512)
    grid = gen_wellspaced_grid(WellSpacedParams(32, 2, 1 / 512, 0.3, 0))
    yield f"family sweep d=2 delta=1/512 ({len(fam)} tubes, {len(grid)} atoms)", lambda: fam.sweep(grid)

    fam3 = build_family(3, 1 / 16)
    pts3 = gen_uniform_random(400, 1 / 16, 3, seed=0)
    yield f"family sweep d=3 delta=1/16 ({len(fam3)} tubes, {len(pts3)} atoms)", lambda: fam3.sweep(pts3)

    atoms = gen_uniform_random(5000, 1 / 256, 2, seed=1)
    tubes = random_tubes(2, 1 / 256, 2000, np.random.default_rng(2))
    index = build_spatial_index(atoms, 1 / 256)
    yield f"index sweep d=2 ({len(tubes)} tubes, {len(atoms)} atoms)", lambda: index_counts(tubes, index)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'workload':60s} {'cython s':>10s} {'python s':>10s} {'speedup':>8s}")
    for name, fn in workloads():
        kernels.use("cython")
        tc, rc = timed(fn, args.repeat)
        kernels.use("python")
        tp, rp = timed(fn, args.repeat)
        same = all(np.array_equal(a, b) for a, b in zip(rc, rp))
        print(f"{name:60s} {tc:10.4f} {tp:10.4f} {tp / tc:7.1f}x" + ("" if same else "  OUTPUT MISMATCH"))
    kernels.use("cython")


if __name__ == "__main__":
    main()
