"""Compare the compiled and pure-Python ensemble kernels.

Usage: python3 benchmarks/bench_backends.py [--n 1000] [--J 200] [--repeats 3]
"""
import argparse
import time

import numpy as np

from rkhs_streamci._backend import BACKENDS
from rkhs_streamci.bootstrap import BootstrapEnsemble
from rkhs_streamci.simulate import ExperimentConfig, gen_stream, harness_basis
from rkhs_streamci.schedules import steps


def time_backend(name, basis, x, y, gam, J, repeats):
    best = np.inf
    for _ in range(repeats):
        ens = BootstrapEnsemble(basis, J, seed=1, capacity=x.size, workers=1, backend=name)
        t0 = time.perf_counter()
        ens.ingest_many(x, y, gam)
        best = min(best, time.perf_counter() - t0)
    return best, ens.eval_averaged_all(np.linspace(0, 1, 25))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--J", type=int, default=200)
    p.add_argument("--repeats", type=int, default=3)
    args = p.parse_args()

    cfg = ExperimentConfig(n=args.n, checkpoints=[args.n])
    x, y = gen_stream(cfg, 0)
    gam = steps(cfg.schedule, args.n, horizon=args.n)
    basis = harness_basis()
    results = {name: time_backend(name, basis, x, y, gam, args.J, args.repeats) for name in sorted(BACKENDS)}
    print(f"n={args.n} J={args.J} basis dim={basis.dim}")
    print(f"{'backend':<10}{'seconds':>10}{'updates/s':>14}")
    for name, (sec, _) in results.items():
        print(f"{name:<10}{sec:>10.3f}{args.n * (args.J + 1) / sec:>14.0f}")
    if len(results) == 2:
        (_, a), (_, b) = results["compiled"], results["python"]
        print(f"speedup {results['python'][0] / results['compiled'][0]:.2f}x, "
              f"max abs difference {np.max(np.abs(a - b)):.2e}")


if __name__ == "__main__":
    main()
