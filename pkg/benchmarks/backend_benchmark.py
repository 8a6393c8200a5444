"""Benchmark the compiled (numba) vs pure-numpy Lorenz integration kernels.

The backend is chosen at import time from the CES_BACKEND environment
variable, so each timing runs in a fresh subprocess. Usage:

    python3 benchmarks/backend_benchmark.py [--repeats 3]
"""

import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json
import time

import numpy as np

from ces.backends import active_backend
from ces.models.lorenz import Lorenz63Model, Lorenz96Model

cases = {}

m63 = Lorenz63Model(spinup=30.0, horizon=20.0, step=0.01)
theta63 = np.log([28.0, 8.0 / 3.0])
m63.time_average(theta63, m63.default_state())  # warm-up (includes JIT compile)
t0 = time.perf_counter()
m63.time_average(theta63, m63.default_state())
cases["lorenz63 (5000 steps, dim 3)"] = time.perf_counter() - t0

m96 = Lorenz96Model(K=36, L=10, spinup=2.0, horizon=10.0, step=0.005)
theta96 = np.array([1.0, 10.0, np.log(10.0), 10.0])
m96.time_average(theta96, m96.default_state())  # warm-up
t0 = time.perf_counter()
m96.time_average(theta96, m96.default_state())
cases["lorenz96 (2400 steps, dim 396)"] = time.perf_counter() - t0

print(json.dumps({"backend": active_backend(), "cases": cases}))
"""


def run_backend(backend: str) -> dict:
    env = dict(os.environ, CES_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", _WORKER], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3,
                        help="Timing repetitions per backend (best is reported).")
    args = parser.parse_args()

    results = {}
    for backend in ("numpy", "numba"):
        best = {}
        for _ in range(args.repeats):
            timing = run_backend(backend)
            assert timing["backend"] == backend
            for case, seconds in timing["cases"].items():
                best[case] = min(best.get(case, float("inf")), seconds)
        results[backend] = best

    width = max(len(c) for c in results["numpy"])
    print(f"{'case':<{width}}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}")
    for case in results["numpy"]:
        t_np = results["numpy"][case]
        t_nb = results["numba"][case]
        print(f"{case:<{width}}  {t_np:>9.4f}s  {t_nb:>9.4f}s  {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
