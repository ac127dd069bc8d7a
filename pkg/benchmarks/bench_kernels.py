"""Compare the compiled and pure-Python alignment kernels.

    python benchmarks/bench_kernels.py [--sizes 100 300 1000] [--repeat 3]

Both backends are fed the same random chord masks; results are checked for
bit equality before timings are printed.
"""

import argparse
import timeit

import numpy as np

from perfforge import kernels


def random_masks(rng, n):
    masks = np.zeros((n, 2), dtype=np.uint64)
    for row in masks:
        for pitch in rng.choice(np.arange(36, 96), size=rng.integers(1, 5), replace=False):
            row[pitch // 64] |= np.uint64(1) << np.uint64(pitch % 64)
    return masks


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[100, 300, 1000])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--gap", type=float, default=0.75)
    args = parser.parse_args(argv)

    backends = kernels.available_backends()
    rng = np.random.default_rng(0)
    print(f"backends: {', '.join(sorted(backends))} (default: {kernels.BACKEND})")
    print(f"{'n':>6} {'backend':>8} {'jaccard ms':>11} {'dtw ms':>9}")
    for n in args.sizes:
        a, b = random_masks(rng, n), random_masks(rng, n)
        reference = None
        for name in sorted(backends):
            impl = backends[name]
            dist = impl.jaccard_matrix(a, b)
            cost, steps = impl.dtw_fill(dist, args.gap)
            if reference is None:
                reference = (dist, cost, steps)
            else:
                for got, want in zip((dist, cost, steps), reference):
                    np.testing.assert_array_equal(got, want)
            number = 1 if name == "python" else 20
            jt = min(timeit.repeat(lambda: impl.jaccard_matrix(a, b), number=number, repeat=args.repeat)) / number
            dt = min(timeit.repeat(lambda: impl.dtw_fill(dist, args.gap), number=number, repeat=args.repeat)) / number
            print(f"{n:>6} {name:>8} {jt * 1e3:>11.3f} {dt * 1e3:>9.3f}")


if __name__ == "__main__":
    main()
