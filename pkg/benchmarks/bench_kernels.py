"""Timing comparison of the compiled and numpy kernel lanes.

Generates one synthetic corpus, then times each hot kernel in both lanes
on identical inputs and prints per-kernel wall times with the speedup
ratio.  Run from anywhere:

    python3 benchmarks/bench_kernels.py [--threads N] [--mean-size M] [--repeat R]
"""

import argparse
import time

import numpy as np

from threadlik import GenConfig, ModelSpec, generate_dataset, lognormal_size_histogram
from threadlik._kernels import _pure

try:
    from threadlik._kernels import _speedups
except ImportError:
    _speedups = None

ALPHA, TAU, BETA = 0.31, 0.98, float(np.exp(2.39))


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(lane, name, fn, repeat, results):
    seconds, out = _time(fn, repeat)
    results.setdefault(name, {})[lane.IMPL] = seconds
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, default=2000)
    ap.add_argument("--mean-size", type=float, default=50.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    spec = ModelSpec.full(ALPHA, TAU, BETA)
    hist = lognormal_size_histogram(args.mean_size, 1.0)
    data = generate_dataset(
        spec, GenConfig(count=args.threads, size_histogram=hist, rng_seed=0)
    )
    concat, lengths = data.parents_concat, data.lengths
    sizes = data.sizes
    n_draws = int(np.maximum(sizes - 2, 0).sum())
    u = np.random.default_rng(1).random(n_draws)
    print(f"corpus: {data.n_threads} threads, {data.n_nodes} nodes")

    lanes = [_pure] if _speedups is None else [_pure, _speedups]
    if _speedups is None:
        print("compiled lane unavailable; timing the numpy lane only")

    results: dict = {}
    reference: dict = {}
    for lane in lanes:
        flat = bench(lane, "flatten_steps", lambda: lane.flatten_steps(concat, lengths),
                     args.repeat, results)
        cnt, age, isroot, tt, t_counts, offsets = flat
        bench(lane, "nll_grad",
              lambda: lane.nll_grad(cnt, age, isroot, t_counts, ALPHA, TAU, BETA, True),
              args.repeat, results)
        bench(lane, "sample_block", lambda: lane.sample_block(sizes, ALPHA, TAU, BETA, u),
              args.repeat, results)
        bench(lane, "final_degrees_flat", lambda: lane.final_degrees_flat(concat, lengths),
              args.repeat, results)
        bench(lane, "depths_flat", lambda: lane.depths_flat(concat, lengths),
              args.repeat, results)
        bench(lane, "subtree_sizes_flat", lambda: lane.subtree_sizes_flat(concat, lengths),
              args.repeat, results)
        outputs = {
            "nll": lane.nll_grad(cnt, age, isroot, t_counts, ALPHA, TAU, BETA, True)[0],
            "samples": lane.sample_block(sizes, ALPHA, TAU, BETA, u).sum(),
        }
        if not reference:
            reference.update(outputs)
        else:
            for key, val in outputs.items():
                drift = abs(val - reference[key]) / max(1.0, abs(reference[key]))
                assert drift < 1e-9, f"lanes disagree on {key}: {drift}"

    width = max(len(n) for n in results)
    header = f"{'kernel':<{width}}  " + "".join(f"{lane.IMPL:>12}" for lane in lanes)
    if len(lanes) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for name, times in results.items():
        row = f"{name:<{width}}  " + "".join(
            f"{times[lane.IMPL] * 1e3:>10.2f}ms" for lane in lanes
        )
        if len(lanes) == 2:
            row += f"{times['pure'] / times['compiled']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
