"""Compare the numba-compiled kernels with the pure-numpy fallback.

Each backend runs in its own interpreter because EMHD_DISABLE_NUMBA is read
at import time.

Run: python benchmarks/bench_kernels.py [--steps 20000] [--evals 20000]
"""

import argparse
import json
import os
import subprocess
import sys
import time

WORKER = r"""
import json, sys, time
import numpy as np
from emhd import _jit
from emhd.energy import build_saturated_pmsm, reference_saturated_params
from emhd.dynamics import Resistances
from emhd.sim import ConstantDq, ConstantTorque, Scenario, simulate

steps, evals = int(sys.argv[1]), int(sys.argv[2])
H = build_saturated_pmsm(reference_saturated_params())
x = np.array([0.2, 0.05, 0.0, 0.0, 0.0, 0.0, 0.3])
H.derivatives(x)  # compile or load from cache
t0 = time.perf_counter()
for _ in range(evals):
    H.derivatives(x)
t_eval = time.perf_counter() - t0

x0 = np.zeros(8); x0[0] = 0.155
def run(n):
    sc = Scenario(H, x0, n * 1e-5, 1e-5, scheme="star+no_rotor", source=ConstantDq((0.0, 60.0)),
                  load=ConstantTorque(1.0), resistances=Resistances(2.1))
    return simulate(sc)
run(10)
t0 = time.perf_counter()
traj = run(steps)
t_sim = time.perf_counter() - t0
print(json.dumps({"numba": _jit.NUMBA_ENABLED, "eval_us": 1e6 * t_eval / evals,
                  "sim_s": t_sim, "final_rho": float(traj.rho[-1])}))
"""


def run_backend(disable: bool, steps: int, evals: int) -> dict:
    env = dict(os.environ)
    env.pop("EMHD_DISABLE_NUMBA", None)
    if disable:
        env["EMHD_DISABLE_NUMBA"] = "1"
    out = subprocess.run(
        [sys.executable, "-c", WORKER, str(steps), str(evals)],
        env=env, check=True, capture_output=True, text=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--steps", type=int, default=20000, help="RK4 steps of the startup run")
    p.add_argument("--evals", type=int, default=20000, help="energy derivative evaluations")
    args = p.parse_args()

    t0 = time.perf_counter()
    fast = run_backend(False, args.steps, args.evals)
    slow = run_backend(True, args.steps, args.evals)
    print(f"{'backend':<10}{'H eval (us)':>14}{'simulate (s)':>15}")
    for name, r in (("numba", fast), ("numpy", slow)):
        print(f"{name:<10}{r['eval_us']:>14.2f}{r['sim_s']:>15.3f}")
    print(f"speedup eval x{slow['eval_us'] / fast['eval_us']:.1f}, simulate x{slow['sim_s'] / fast['sim_s']:.1f}")
    same = abs(fast["final_rho"] - slow["final_rho"]) <= 1e-12 * max(1.0, abs(fast["final_rho"]))
    print(f"final rho agrees: {same} ({fast['final_rho']!r} vs {slow['final_rho']!r})")
    print(f"wall {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
