"""Benchmark the sampler kernels with and without jit compilation.

Runs the same workload in two fresh interpreters, one with numba
enabled and one with ``SECTORSHARE_NO_NUMBA=1``, then prints a
comparison table. The draw digests must match: the backends share one
code path and differ only in execution speed.

Usage::

    python3 benchmarks/bench_kernels.py [--chains N] [--iters N]
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import subprocess
import sys
import time


def child(chains: int, iters: int) -> None:
    from sectorshare.kernels import NUMBA_ENABLED
    from sectorshare.model import PriorConfig
    from sectorshare.sampler import run_mcmc, SamplerConfig
    from sectorshare.simulate import SimConfig, simulate_dataset

    sim = simulate_dataset(SimConfig(seed=88, n_countries=4, n_regions=2))
    cfg = SamplerConfig(
        seed=5, n_chains=chains, n_warmup=iters, n_samples=iters
    )
    t0 = time.perf_counter()
    draws = run_mcmc(sim.dataset, sim.bases, sim.rho, PriorConfig(), cfg)
    first = time.perf_counter() - t0

    t0 = time.perf_counter()
    draws = run_mcmc(sim.dataset, sim.bases, sim.rho, PriorConfig(), cfg)
    steady = time.perf_counter() - t0

    print(
        json.dumps(
            {
                "backend": "numba" if NUMBA_ENABLED else "numpy",
                "first_s": first,
                "steady_s": steady,
                "digest": hashlib.sha256(draws.draws.tobytes()).hexdigest(),
            }
        )
    )


def run_child(no_numba: bool, chains: int, iters: int) -> dict:
    env = dict(os.environ)
    env.pop("SECTORSHARE_NO_NUMBA", None)
    if no_numba:
        env["SECTORSHARE_NO_NUMBA"] = "1"
    proc = subprocess.run(
        [sys.executable, __file__, "--as-child", "--chains", str(chains),
         "--iters", str(iters)],
        env=env,
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        sys.stderr.write(proc.stderr)
        raise SystemExit(proc.returncode)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--chains", type=int, default=2)
    ap.add_argument("--iters", type=int, default=1000,
                    help="warmup and retained iterations per chain")
    ap.add_argument("--as-child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.as_child:
        child(args.chains, args.iters)
        return 0

    print(f"workload: 4 countries, 5 methods, {args.chains} chains, "
          f"{args.iters}+{args.iters} iterations")
    results = [
        run_child(no_numba=False, chains=args.chains, iters=args.iters),
        run_child(no_numba=True, chains=args.chains, iters=args.iters),
    ]
    print(f"{'backend':<8} {'first call (s)':>15} {'steady state (s)':>17}")
    for r in results:
        print(f"{r['backend']:<8} {r['first_s']:>15.2f} {r['steady_s']:>17.2f}")
    jit, plain = results
    print(f"steady-state speedup: {plain['steady_s'] / jit['steady_s']:.1f}x")
    match = jit["digest"] == plain["digest"]
    print(f"draw digests match: {'yes' if match else 'NO'}")
    return 0 if match else 1


if __name__ == "__main__":
    sys.exit(main())
