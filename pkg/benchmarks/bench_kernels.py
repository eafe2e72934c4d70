"""Compare the compiled simplex kernel with the numpy fallback.

Two workloads: a batch of random bounded LPs, and a distortion-grid sweep on
the five-node scenario (the sweep solves two clearing LPs per grid point).
Both kernels must return identical objective values; the script checks that
before reporting timings.

    python benchmarks/bench_kernels.py [--lps 300] [--repeat 3]
"""
import argparse
import statistics
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from damreg.lp import _kernel, solve  # noqa: E402
from damreg.scenarios import fivenode, scaled_estimate  # noqa: E402
from damreg.strategy import GridSpec, best_response_sweep  # noqa: E402
from oracles import random_lp  # noqa: E402


def timed(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def random_batch(n, seed=1):
    rng = np.random.default_rng(seed)
    return [random_lp(rng, max_vars=12, max_rows=12) for _ in range(n)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lps", type=int, default=300)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    if "cython" not in _kernel.KERNELS:
        print("compiled kernel not built; only the numpy fallback is available")
        return 1

    lps = random_batch(args.lps)
    s = fivenode()
    est = scaled_estimate(s, price=1.2)
    grid = GridSpec()
    rows = []
    results = {}
    for name in ("python", "cython"):
        _kernel.BACKEND = name
        t_lp, sols = timed(lambda: [solve(lp) for lp in lps], args.repeat)
        t_sw, sweep = timed(lambda: best_response_sweep(s, est, grid), 1)
        results[name] = ([x.objective_value for x in sols], [p.profit_proposed for p in sweep.points])
        rows.append((name, t_lp, t_sw))

    same = results["python"] == results["cython"]
    print(f"{'kernel':<8} {'random LPs (s)':>15} {'fivenode sweep (s)':>19}")
    for name, t_lp, t_sw in rows:
        print(f"{name:<8} {t_lp:>15.3f} {t_sw:>19.3f}")
    (_, py_lp, py_sw), (_, cy_lp, cy_sw) = rows
    print(f"speedup  {py_lp / cy_lp:>14.1f}x {py_sw / cy_sw:>18.1f}x")
    print(f"identical results: {same}")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
