"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 3]

Both backends get identical inputs and generator states, and their outputs
are checked for equality before timing is reported.
"""
import argparse
import time

import numpy as np

from derange import _pykernels
from derange.combinatorics import completion_table, cycle_count_distribution
from derange.rng import seed_from

try:
    from derange import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases():
    cyc64 = np.array([(i + 1) % 64 for i in range(64)], dtype=np.int32)
    nu = cycle_count_distribution(64).padded()
    sample = _pykernels.sis_batch(seed_from(1).to_array(), 8, 3000)
    good = sample[0][sample[1].astype(bool)]
    table = completion_table(8)
    return [
        ("below_block n=1000 x 20000", "below_block", (1000, 20000)),
        ("sattolo_batch n=64 x 2000", "sattolo_batch", (64, 2000)),
        ("walk_batch n=64 mix=128 x 500", "walk_batch", (cyc64, 128, 500, False)),
        ("sis_batch n=64 x 2000", "sis_batch", (64, 2000)),
        ("sis_fail_count n=64 x 2000", "sis_fail_count", (64, 2000)),
        ("reject_batch n=64 x 500", "reject_batch", (64, 500)),
        ("mixing_time_average n=64 runs=50", "mixing_time_average", (64, 50, 128, nu)),
        ("rank_derangements n=8 x ~2900", "rank_derangements", (good, table)),
    ]


def timed(module, name, args, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        if name == "rank_derangements":
            t0 = time.perf_counter()
            out = getattr(module, name)(*args)
        else:
            state = seed_from(7).to_array()
            t0 = time.perf_counter()
            out = getattr(module, name)(state, *args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _ckernels is None:
        raise SystemExit("compiled kernels not built; run pip install -e . --no-build-isolation")
    print(f"{'kernel':<36} {'python s':>10} {'cython s':>10} {'speedup':>9}  equal")
    for label, name, a in cases():
        tp, op = timed(_pykernels, name, a, args.repeat)
        tc, oc = timed(_ckernels, name, a, args.repeat)
        print(f"{label:<36} {tp:>10.4f} {tc:>10.5f} {tp / tc:>8.0f}x  {same(op, oc)}")


if __name__ == "__main__":
    main()
