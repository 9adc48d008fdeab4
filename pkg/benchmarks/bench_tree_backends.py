#!/usr/bin/env python3
"""Benchmark the compiled tree kernels against the pure-numpy fallback.

Times tree induction and the permutation-importance evaluation loop (the two
places the kernels dominate) on synthetic data shaped like the pipeline's
large-error subsets, and verifies both backends grow identical trees.

Usage: python3 benchmarks/bench_tree_backends.py [--rows 600] [--cols 40] [--repeats 5]
"""

import argparse
import time

import numpy as np

import amrule.tree_rules as tr
from amrule.tree_rules import fit_tree, permutation_importance, python_backend


def make_data(rows, cols, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(rows, cols))
    X[rng.random(X.shape) < 0.25] = 0.0  # placeholder density like real encodings
    y = np.where(X[:, 0] + 0.5 * X[:, 3] - X[:, 7] > 0, 1, -1)
    flip = rng.random(rows) < 0.15
    y[flip] = -y[flip]
    return X, y


def run_backend(backend, X, y, depth, K, repeats):
    original = tr._backend
    tr._backend = backend
    try:
        t_fit = time.perf_counter()
        for _ in range(repeats):
            tree = fit_tree((X, y), depth=depth)
        t_fit = (time.perf_counter() - t_fit) / repeats

        t_imp = time.perf_counter()
        for _ in range(repeats):
            permutation_importance(tree.predict_labels, X, y, K=K, seed=1)
        t_imp = (time.perf_counter() - t_imp) / repeats
    finally:
        tr._backend = original
    return tree, t_fit, t_imp


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=600)
    parser.add_argument("--cols", type=int, default=40)
    parser.add_argument("--depth", type=int, default=8)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--importance-repeats", type=int, default=10)
    args = parser.parse_args()

    X, y = make_data(args.rows, args.cols)
    backends = [("python", python_backend())]
    if tr.BACKEND == "compiled":
        backends.append(("compiled", tr.active_backend()))
    else:
        print("compiled backend not built; benchmarking the fallback only")

    results = {}
    trees = {}
    for name, backend in backends:
        tree, t_fit, t_imp = run_backend(backend, X, y, args.depth,
                                         args.importance_repeats, args.repeats)
        results[name] = (t_fit, t_imp)
        trees[name] = tree
        print(f"{name:>9}: fit_tree {t_fit * 1e3:8.2f} ms   "
              f"permutation_importance {t_imp * 1e3:8.2f} ms")

    if len(trees) == 2:
        a, b = trees["python"], trees["compiled"]
        identical = (np.array_equal(a.feature, b.feature)
                     and np.array_equal(a.threshold, b.threshold)
                     and np.array_equal(a.predict_classes(X), b.predict_classes(X)))
        print(f"backends grow identical trees: {identical}")
        sp_fit = results["python"][0] / results["compiled"][0]
        sp_imp = results["python"][1] / results["compiled"][1]
        print(f"speedup: fit_tree x{sp_fit:.1f}, permutation_importance x{sp_imp:.1f}")


if __name__ == "__main__":
    main()
