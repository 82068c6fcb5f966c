"""Compare the compiled match kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--block 128x128] [--repeat 20]

Runs each kernel on identical id blocks, checks that both implementations
return the same pairs, and reports the best time of ``--repeat`` runs.
"""
import argparse
import sys
import timeit

import numpy as np

from semjoin import _kernels_py, kernels


def _block(text):
    a, _, b = text.partition("x")
    return int(a), int(b or a)


def _cases(b1, b2, sigma):
    ids1 = np.arange(b1, dtype=np.int64)
    ids2 = np.arange(10_000, 10_000 + b2, dtype=np.int64)
    return {
        "lattice_pairs": ((ids1, ids2, sigma, 0.25, 0.75), {}),
        "hash_pairs": ((ids1, ids2, sigma, 7), {}),
        "emitted_prefix": ((int(sigma * b1 * b2) + 5, 2, int(sigma * b1 * b2), 1), {}),
    }


def _same(a, b):
    if isinstance(a, tuple) and len(a) == 2 and isinstance(a[0], np.ndarray):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return a == b


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--block", type=_block, default=(128, 128), help="batch sizes as B1xB2")
    ap.add_argument("--sigma", type=float, default=0.01)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)

    compiled = kernels.compiled()
    if compiled is None:
        print("compiled extension not built; only the numpy fallback is available")
    impls = {"numpy": _kernels_py}
    if compiled is not None:
        impls["cython"] = compiled

    b1, b2 = args.block
    print(f"block {b1}x{b2}, sigma {args.sigma}, best of {args.repeat}")
    print(f"{'kernel':<16}" + "".join(f"{name + ' (us)':>16}" for name in impls) + f"{'speedup':>10}")
    status = 0
    for name, (a, kw) in _cases(b1, b2, args.sigma).items():
        results, times = {}, {}
        for impl, mod in impls.items():
            fn = getattr(mod, name)
            results[impl] = fn(*a, **kw)
            number = max(1, 2000 // (b1 * b2 // 256 + 1))
            best = min(timeit.repeat(lambda: fn(*a, **kw), number=number, repeat=args.repeat))
            times[impl] = best / number * 1e6
        if len(results) == 2 and not _same(results["numpy"], results["cython"]):
            print(f"MISMATCH in {name}")
            status = 1
        speed = f"{times['numpy'] / times['cython']:>9.1f}x" if "cython" in times else f"{'-':>10}"
        print(f"{name:<16}" + "".join(f"{times[i]:>16.2f}" for i in impls) + speed)
    return status


if __name__ == "__main__":
    sys.exit(main())
