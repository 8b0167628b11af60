"""Compiled kernels against their numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0] [--json out.json]

Each kernel runs on identical inputs under both backends; the table reports
the best wall time of ``--repeat`` runs and the speedup of the compiled build.
"""
import argparse
import json
import time

import numpy as np

from atol import _backend, _pykernels


def cases(scale):
    rng = np.random.default_rng(0)
    n = max(1, int(200_000 * scale))
    pts, w = rng.random((n, 2)), rng.random(n)
    centers = rng.random((100, 2))
    sigmas = np.full(100, 0.05)
    m = max(1, n // 1000)
    offsets = np.linspace(0, n, m + 1).astype(np.int64)
    n_orbits = max(1, int(500 * scale))
    x0, y0 = rng.random(n_orbits), rng.random(n_orbits)
    r = rng.choice([2.5, 3.5, 4.0, 4.1, 4.3], size=n_orbits)
    nt = max(10, int(3500 * scale))
    X, y = rng.random((nt, 100)), rng.integers(0, 5, size=nt)
    sample = rng.integers(0, nt, size=nt)

    def macqueen(k):
        c = centers.copy()
        k.macqueen_pass(pts, w, c, np.zeros(len(c)), 1024)

    def tree(k):
        k.build_tree(X, y, sample, 5, 10, 2, -1, 1)

    return {
        "assign": lambda k: k.assign(pts, centers),
        "lloyd_step": lambda k: k.lloyd_step(pts, w, centers),
        "macqueen_pass": macqueen,
        "contrast_transform": lambda k: k.contrast_transform(pts, w, offsets, centers, sigmas, 0),
        "orbits": lambda k: k.orbits(x0, y0, r, 1000),
        "build_tree": tree,
    }


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0, help="multiplies every input size")
    ap.add_argument("--json", help="write results here")
    args = ap.parse_args(argv)
    if not _backend.COMPILED_AVAILABLE:
        raise SystemExit("compiled kernels not built; run `pip install -e . --no-build-isolation`")
    compiled = _backend.get_backend("compiled")
    rows = []
    print(f"{'kernel':<20}{'python s':>12}{'compiled s':>12}{'speedup':>10}")
    for name, fn in cases(args.scale).items():
        tp = best_time(lambda: fn(_pykernels), args.repeat)
        tc = best_time(lambda: fn(compiled), args.repeat)
        rows.append({"kernel": name, "python_s": tp, "compiled_s": tc, "speedup": tp / tc})
        print(f"{name:<20}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"scale": args.scale, "repeat": args.repeat, "results": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
