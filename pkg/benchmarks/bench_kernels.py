"""Compare the compiled chain kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--ticks N]

Times fk, fk_jacobian and tool_wrench_torques on both backends over the same
random postures, checks they agree, then times a full simulator run in a
subprocess per backend (the backend is chosen at import).
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from endohaptics import _chain_py
from endohaptics.kinematics import default_arm

try:
    from endohaptics import _chain as _chain_c
except ImportError:
    _chain_c = None

SIM_SNIPPET = """
import time
from endohaptics.kinematics import BACKEND
from endohaptics.teleop.sim import InputScript, Scenario, SpringWall, run_scenario
from endohaptics.teleop.transport import TransportModel
sc = Scenario(
    duration_ms={ticks},
    noise_sigma=0.02,
    noise_seed=7,
    transport=TransportModel(12.0, 5.0, 0.02, seed=3),
    environment=SpringWall(0.15, point=(0, 0, -4), lever=(1.5, -2.0)),
    inputs=InputScript("pose", ((0, 0, 0, 0), ({ticks}, 20, -10, -40)), grip=((0, 0.0), ({ticks}, 8.0))),
)
start = time.perf_counter()
run_scenario(sc, None)
print(BACKEND, time.perf_counter() - start)
"""


def kernel_cases(backend, arm, postures):
    chain = arm.chain
    return {
        "fk": lambda: [backend.fk(q, *chain) for q in postures],
        "fk_jacobian": lambda: [backend.fk_jacobian(q, *chain) for q in postures],
        "tool_wrench_torques": lambda: [backend.tool_wrench_torques(q, *chain, 2.0, 30.0, -20.0) for q in postures],
    }


def bench_kernels(repeat: int) -> None:
    arm = default_arm()
    postures = list(np.random.default_rng(0).uniform(arm.lower, arm.upper, size=(1000, 7)))
    backends = {"python": _chain_py}
    if _chain_c is not None:
        backends["cython"] = _chain_c
    else:
        print("compiled extension not built; timing the fallback only")

    results = {}
    for name, backend in backends.items():
        for case, fn in kernel_cases(backend, arm, postures).items():
            best = min(timeit.repeat(fn, number=1, repeat=repeat))
            results[name, case] = best / len(postures)

    if _chain_c is not None:
        worst = 0.0
        for q in postures[:100]:
            a = _chain_py.fk_jacobian(q, *arm.chain)
            b = _chain_c.fk_jacobian(q, *arm.chain)
            worst = max(worst, *(float(np.max(np.abs(x - y))) for x, y in zip(a, b)))
        print(f"max backend disagreement (fk_jacobian): {worst:.2e}")

    print(f"{'kernel':<22}{'python us':>12}{'cython us':>12}{'speedup':>10}")
    for case in ("fk", "fk_jacobian", "tool_wrench_torques"):
        py = results["python", case] * 1e6
        if ("cython", case) in results:
            cy = results["cython", case] * 1e6
            print(f"{case:<22}{py:>12.2f}{cy:>12.2f}{py / cy:>9.1f}x")
        else:
            print(f"{case:<22}{py:>12.2f}{'-':>12}{'-':>10}")


def bench_sim(ticks: int) -> None:
    snippet = SIM_SNIPPET.format(ticks=ticks)
    envs = [("python", {"ENDOHAPTICS_PURE_PYTHON": "1"})]
    if _chain_c is not None:
        envs.append(("cython", {}))
    print(f"\nsimulator, {ticks} ticks")
    for label, extra in envs:
        env = {k: v for k, v in os.environ.items() if k != "ENDOHAPTICS_PURE_PYTHON"}
        env.update(extra)
        out = subprocess.run([sys.executable, "-c", snippet], env=env, capture_output=True, text=True, check=True)
        backend, seconds = out.stdout.split()
        assert backend == label, (backend, label)
        print(f"{label:<8}{float(seconds):8.2f} s  {ticks / float(seconds):10.0f} ticks/s")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--ticks", type=int, default=10_000)
    args = parser.parse_args()
    bench_kernels(args.repeat)
    bench_sim(args.ticks)


if __name__ == "__main__":
    main()
