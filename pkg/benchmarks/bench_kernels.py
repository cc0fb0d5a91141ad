"""Time the numba kernels against the pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs on the same inputs under both implementations; outputs are
checked for equality before timing so a speedup never hides a mismatch.
The first numba call (compilation or cache load) is excluded.
"""

import argparse
import time

import numpy as np

from malmetrics.kernels import numba_impl, numpy_impl


def cases(rng):
    m, n = 200_000, 47
    labels = (rng.random((m, n)) < 0.3).astype(np.uint8)
    counts = numpy_impl.vote_counts(labels)
    votes = (2 * counts >= n).astype(np.uint8)
    truth = (rng.random(m) < 0.58).astype(np.uint8)
    fp = rng.uniform(0.0, 0.25, n)
    fn = rng.uniform(0.0, 0.9, n)
    u = rng.random((m, n))
    jitter = rng.random((m, n))
    h = np.minimum(0.2, np.minimum(fp, 1 - fp))
    probs = rng.random(47)
    mc_u = rng.random((100_000, 47))
    return {
        "vote_counts": (labels,),
        "z_counts": (labels, votes),
        "poisson_binomial_pmf": (probs,),
        "leave_one_out_pmfs": (probs,),
        "count_sums": (mc_u, probs),
        "bernoulli_from_truth": (u, truth, fp, fn),
        "perturbed_from_truth": (u, jitter, truth, fp, fn, h, np.minimum(0.2, np.minimum(fn, 1 - fn))),
    }


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if numba_impl is None:
        print("numba path unavailable (not installed or disabled); nothing to compare")
        return
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<24}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, inputs in cases(rng).items():
        ref, fast = getattr(numpy_impl, name), getattr(numba_impl, name)
        expected = ref(*inputs)
        got = fast(*inputs)  # warm-up: compile or load from cache
        if not np.array_equal(expected, got):
            raise SystemExit(f"{name}: numba output differs from numpy")
        t_np = best_of(ref, inputs, args.repeat)
        t_nb = best_of(fast, inputs, args.repeat)
        print(f"{name:<24}{t_np * 1e3:>12.2f}{t_nb * 1e3:>12.2f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
