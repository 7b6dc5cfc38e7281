"""Compare filter+smooth+forecast wall time with and without numba.

Each backend runs in a fresh interpreter because the backend is fixed at
import time by KDGLM_NUMBA. The first (compiling) call is excluded.

    python3 benchmarks/bench_jit.py --repeats 5
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
import kdglm
from kdglm import polynomial, harmonic, build_structure, simulate, filter_series, smooth, forecast

def shapes():
    m1 = build_structure([polynomial(2, 0.95), harmonic(4, 1, 0.975), harmonic(4, 2, 0.975)],
                         "poisson", 1)
    s1 = simulate(m1, np.diag([1e-3, 0, 1e-3, 1e-3, 1e-3, 1e-3]),
                  np.array([2.0, 0, 0.5, 0, 0.2, 0]), 35, seed=7)
    yield "poisson T=35 p=6", m1, s1.y, None
    blocks = []
    for i in range(2):
        blocks += [polynomial(2, 0.95, targets=(i,)), harmonic(12, 1, 0.975, targets=(i,))]
    m2 = build_structure(blocks, "multinomial", 2)
    th0 = np.array([0.3, 0, 0.3, 0, -0.2, 0, 0.2, 0])
    s2 = simulate(m2, np.eye(8) * 5e-4, th0, 161, seed=7, trials=200)
    yield "multinomial T=161 d=2 p=8", m2, kdglm.ObservationSeries(s2.y, s2.trials), 200

def run(model, ys, trials):
    tr = filter_series(model, ys)
    smooth(tr)
    forecast(tr.last, model, 12, trials=trials)

repeats = int(sys.argv[1])
out = {"backend": kdglm.backend()}
for name, model, ys, trials in shapes():
    t0 = time.perf_counter(); run(model, ys, trials); first = time.perf_counter() - t0
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter(); run(model, ys, trials); times.append(time.perf_counter() - t0)
    out[name] = {"first": first, "best": min(times), "median": float(np.median(times))}
print(json.dumps(out))
"""


def measure(flag, repeats):
    env = dict(os.environ, KDGLM_NUMBA=flag)
    proc = subprocess.run([sys.executable, "-c", WORKER, str(repeats)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    jit = measure("1", args.repeats)
    ref = measure("0", args.repeats)
    print(f"{'shape':<28}{'numba (s)':>12}{'numpy (s)':>12}{'speedup':>10}{'first call':>12}")
    for name in jit:
        if name == "backend":
            continue
        a, b = jit[name]["median"], ref[name]["median"]
        print(f"{name:<28}{a:>12.4f}{b:>12.4f}{b / a:>10.2f}{jit[name]['first']:>12.3f}")


if __name__ == "__main__":
    main()
