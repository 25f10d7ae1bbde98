"""Time the numba kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because the choice is fixed at import.
Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
import scipy.sparse as sp
from cavgraph import kernels, spin1

repeat = int(sys.argv[1])


def best(fn):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


X = np.random.default_rng(0).normal(size=(20000, 8))
op = spin1.build_operator("qyz")
H = spin1.hamiltonian(40, -1.0, 1.0).tocsr()
psi = spin1.all_zero_state(40).amplitudes
out = {
    "backend": kernels.BACKEND,
    "loo_covariances n=20000 d=8": best(lambda: kernels.loo_covariances(X)),
    "collective_coo N=120": best(lambda: kernels.collective_coo(120, op)),
    "rk4_propagate N=40 x2000 steps": best(lambda: kernels.rk4_propagate(H.indptr, H.indices, H.data.astype(complex), psi, 1e-3, 2000)),
}
print(json.dumps(out))
"""


def run(backend_off: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env["CAVGRAPH_NO_NUMBA"] = "1" if backend_off else "0"
    proc = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    fast, slow = run(False, args.repeat), run(True, args.repeat)
    print(f"{'kernel':34s} {fast['backend']:>10s} {slow['backend']:>10s} {'speedup':>8s}")
    for key in fast:
        if key == "backend":
            continue
        print(f"{key:34s} {fast[key] * 1e3:8.2f}ms {slow[key] * 1e3:8.2f}ms {slow[key] / fast[key]:7.1f}x")


if __name__ == "__main__":
    main()
