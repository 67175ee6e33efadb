"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py --n 1000000 --repeat 5
"""

import argparse
import time

import numpy as np

from bitextfilter import kernels
from bitextfilter.toy import toy_corpus


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def cases(n, seed):
    rng = np.random.default_rng(seed)
    scores = np.round(rng.random(n), 4)
    ids = rng.permutation(n).astype(np.int64)
    keys = kernels.sortable_keys(scores)
    texts = [p.src for p in toy_corpus(2000)] * max(1, n // 20_000)
    return {
        "sortable_keys": lambda: kernels.sortable_keys(scores),
        "prefix_histogram": lambda: kernels.prefix_histogram(keys, 0, 0, 16),
        "top_k_mask": lambda: kernels.top_k_mask(scores, ids, n // 2),
        "token_counts": lambda: kernels.token_counts(texts),
        "char_counts": lambda: kernels.char_counts(texts),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1_000_000, help="number of scores")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = sorted(kernels.BACKENDS)
    previous = kernels.backend()
    results = {}
    for name in backends:
        kernels.set_backend(name)
        for kernel, fn in cases(args.n, args.seed).items():
            results[kernel, name] = best_of(fn, args.repeat)
    kernels.set_backend(previous)

    print(f"n={args.n}  best of {args.repeat}  (ms)")
    header = f"{'kernel':18}" + "".join(f"{b:>10}" for b in backends)
    if "cython" in backends:
        header += f"{'speedup':>10}"
    print(header)
    for kernel in cases(10, 0):
        row = f"{kernel:18}" + "".join(f"{1e3 * results[kernel, b]:>10.2f}" for b in backends)
        if "cython" in backends:
            row += f"{results[kernel, 'python'] / results[kernel, 'cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
