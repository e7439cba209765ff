"""Compare the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from ckptagg import _kernels
from ckptagg._kernels import _fallback
from ckptagg.model import CheckpointSet, ClusterSpec, StripeLayout
from ckptagg.simulator import Scenario
from ckptagg.strategies import STRATEGIES, StrategyConfig

try:
    from ckptagg._kernels import _ckernels
except ImportError:
    _ckernels = None


def conflict_inputs(n, rng):
    lengths = rng.integers(1, 3 << 20, size=n)
    offsets = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    return ([0] * n, offsets.tolist(), lengths.tolist(),
            rng.integers(0, 64, size=n).tolist(), 1 << 20)


def simulate_all(impl):
    saved = _kernels.fluid_run
    _kernels.fluid_run = impl.fluid_run
    try:
        cluster = ClusterSpec(8, 8)
        ckpts = CheckpointSet.uniform(cluster, 4_000_000, 1)
        for name in STRATEGIES:
            Scenario(cluster, ckpts, StripeLayout(), StrategyConfig(name)).run()
    finally:
        _kernels.fluid_run = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(0)
    sizes = rng.integers(0, 1 << 30, size=200_000).tolist()
    conf = conflict_inputs(200_000, rng)
    cases = [
        ("exclusive_scan (200k ranks)", lambda m: m.exclusive_scan(sizes)),
        ("endpoint_conflicts (200k extents)", lambda m: m.endpoint_conflicts(*conf)),
        ("simulate 4 strategies (8x8, 4 MB)", simulate_all),
    ]
    print(f"{'kernel':38s} {'python s':>10s} {'cython s':>10s} {'speedup':>8s}")
    for label, fn in cases:
        py = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat))
        cy = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat))
        print(f"{label:38s} {py:10.4f} {cy:10.4f} {py / cy:7.1f}x")


if __name__ == "__main__":
    main()
