"""Compare the numba and numpy backends of the hot kernels.

    python3 benchmarks/bench_kernels.py [--trials 100000] [--repeat 3]

Each kernel runs once to warm up (numba compiles on first call), then the
best of ``--repeat`` timings is reported. Outputs are checked for equality.
"""

from __future__ import annotations

import argparse
import time
from fractions import Fraction

import numpy as np

from twochoice import kernels
from twochoice.fractional import run_fractional
from twochoice.instance import gen_adversarial_waterlevel
from twochoice.randomness import SmallBiasSpace
from twochoice.verify import plan_arrays
from twochoice.rounding import build_plan


def best_of(fn, args, repeat):
    fn(*args)
    best = float("inf")
    out = None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, out


def cases(trials: int):
    trace = run_fractional("water", gen_adversarial_waterlevel(5))
    arrays = plan_arrays(build_plan(trace, "maximal"))
    rng = np.random.default_rng(0)
    T = trace.inst.T
    uA, uB = rng.random((trials, T)), rng.random((trials, T))
    yield "simulate_plan", (trace.inst.n, *arrays, uA, uB)

    space = SmallBiasSpace(2 * 2 * T, 8, Fraction(1, 1 << 20))
    seeds = space.seeds
    xs = rng.integers(0, 1 << seeds.s, size=trials // 10, dtype=np.uint64)
    ys = rng.integers(0, 1 << seeds.s, size=trials // 10, dtype=np.uint64)
    yield "powering_words", (xs, ys, seeds.s, seeds.poly, space.h)

    R = kernels.powering_words(xs, ys, seeds.s, seeds.poly, space.h)
    yield "parity_bits", (np.ascontiguousarray(space.vec.packed), R)

    codes = rng.integers(0, 1 << 40, size=trials, dtype=np.int64)
    counts = np.ones(trials, dtype=np.int64)
    yield "pattern_counts", (codes, counts, np.array([1, 7, 19, 33], dtype=np.int64))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=100_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if kernels.numba_kernels is None:
        raise SystemExit("numba is unavailable or disabled; nothing to compare")
    print(f"{'kernel':<16}{'numpy_s':>10}{'numba_s':>10}{'speedup':>9}  equal")
    for name, call_args in cases(args.trials):
        t_np, out_np = best_of(kernels.numpy_kernels[name], call_args, args.repeat)
        t_nb, out_nb = best_of(kernels.numba_kernels[name], call_args, args.repeat)
        equal = np.array_equal(out_np, out_nb)
        print(f"{name:<16}{t_np:>10.4f}{t_nb:>10.4f}{t_np / t_nb:>9.1f}  {equal}")


if __name__ == "__main__":
    main()
