"""Compiled vs pure-Python kernel timings.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs on the same inputs under both backends; the table reports
the best wall time of ``--repeat`` runs and the speed-up.  Outputs are checked
for agreement before timing.
"""
import argparse
import time

import numpy as np

from eegaffect import _core


def forest_problem(n=200, d=16, seed=0):
    rng = np.random.default_rng(seed)
    X = np.ascontiguousarray(rng.normal(size=(n, d)))
    y = (X[:, 0] + 0.5 * rng.normal(size=n) > 0).astype(np.int64)
    w = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.int64)
    return X, y, w


def svm_problem(n=300, d=25, seed=1):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = np.where(X[:, 0] + 0.3 * rng.normal(size=n) > 0, 1.0, -1.0)
    return np.ascontiguousarray(np.c_[X, np.ones(n)]), y


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    try:
        cy = _core.backend("cython")
    except ImportError:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    py = _core.backend("python")

    X, y, w = forest_problem()
    Xs, ys = svm_problem()
    tree = cy.grow_tree(X, y, w, 2, 4, 1, 42)
    cases = {
        "grow_tree (200x16)": lambda k: k.grow_tree(X, y, w, 2, 4, 1, 42),
        "tree_leaf_votes (200 rows)": lambda k: k.tree_leaf_votes(*tree, X),
        "svm_dual_cd (300x26)": lambda k: k.svm_dual_cd(Xs, ys, 1.0, 200, 1e-4, 7),
    }
    for a, b in zip(cy.grow_tree(X, y, w, 2, 4, 1, 42), py.grow_tree(X, y, w, 2, 4, 1, 42)):
        assert a.tobytes() == b.tobytes(), "backends disagree on grow_tree"

    print(f"{'kernel':<28}{'cython':>12}{'python':>12}{'speed-up':>10}")
    for name, fn in cases.items():
        tc = best_of(lambda: fn(cy), args.repeat)
        tp = best_of(lambda: fn(py), args.repeat)
        print(f"{name:<28}{tc * 1e3:>10.3f}ms{tp * 1e3:>10.3f}ms{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
