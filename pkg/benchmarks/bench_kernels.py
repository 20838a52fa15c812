"""Time the compiled and numpy min-distance kernels on concept-sized problems.

    python benchmarks/bench_kernels.py --bags 100 --bag-size 50 --d 2 --repeats 5
"""

import argparse
import timeit

import numpy as np

from dsmil import _kernels_py, kernels
from dsmil.data import generate_concept_dataset


def _inputs(n_bags, bag_size, d, seed):
    if d == 2:
        ds = generate_concept_dataset(n_pos=n_bags // 2, n_neg=n_bags - n_bags // 2, bag_size=bag_size, seed=seed)
        X, off = ds.stacked()
    else:
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n_bags * bag_size, d))
        off = np.arange(0, X.shape[0] + 1, bag_size, dtype=np.int64)
    return np.ascontiguousarray(X), off


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--bags", type=int, default=100)
    ap.add_argument("--bag-size", type=int, default=50)
    ap.add_argument("--d", type=int, nargs="+", default=[2, 32])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    impls = {"python": _kernels_py.min_dist_tables}
    if kernels.BACKEND == "cython":
        from dsmil import _kernels

        impls["cython"] = _kernels.min_dist_tables
    else:
        print("compiled kernel not built; timing the numpy fallback only")

    print(f"{'d':>5} {'backend':>8} {'best [ms]':>10} {'speedup':>8}  identical")
    for d in args.d:
        X, off = _inputs(args.bags, args.bag_size, d, args.seed)
        ref = impls["python"](X, off, X, off)
        best = {}
        for name, fn in impls.items():
            best[name] = min(timeit.repeat(lambda: fn(X, off, X, off), number=1, repeat=args.repeats))
            out = fn(X, off, X, off)
            same = all(np.array_equal(a, b) for a, b in zip(out, ref))
            print(f"{d:>5} {name:>8} {best[name] * 1e3:>10.2f} {best['python'] / best[name]:>8.2f}  {same}")


if __name__ == "__main__":
    main()
