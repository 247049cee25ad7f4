"""Time the numba and numpy kernel backends on the same workloads.

Each backend runs in a fresh interpreter because the choice is fixed at
import time by ``EXPSTAB_BACKEND``. Usage::

    python benchmarks/bench_backends.py [--horizon 800] [--dimension 3] [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from expstab import kernels
from expstab.certificates import classify
from expstab.evolution import build_norm_table
from expstab.zoo import paper_example, random_family

H, d, repeat = int(sys.argv[1]), int(sys.argv[2]), int(sys.argv[3])
fam = random_family(7, d, 0.5)
mats = np.ascontiguousarray(fam.stack(H))
x = np.ones(d)
dense = kernels.sweep_matrix_log_norms(mats, 2)

def best(fn):
    fn()  # warm-up (compilation for numba)
    times = []
    for _ in range(repeat):
        t = time.perf_counter(); fn(); times.append(time.perf_counter() - t)
    return min(times)

out = {
    "backend": kernels.BACKEND,
    "matrix_sweep_linf": best(lambda: kernels.sweep_matrix_log_norms(mats, 2)),
    "matrix_sweep_l2": best(lambda: kernels.sweep_matrix_log_norms(mats, 1)),
    "vector_sweep": best(lambda: kernels.sweep_vector_log_norms(mats, x, 2)),
    "envelope_fits": best(lambda: kernels.row_envelope_slopes(dense[: H // 2 + 1], 0, 8)),
    "classify_paper_example": best(lambda: classify(paper_example(0.1), H)),
}
print(json.dumps(out))
"""


def run(backend, args):
    env = dict(os.environ, EXPSTAB_BACKEND=backend)
    proc = subprocess.run([sys.executable, "-c", WORKER, str(args.horizon), str(args.dimension),
                           str(args.repeat)], env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=int, default=800)
    ap.add_argument("--dimension", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    results = [run(b, args) for b in ("numba", "numpy")]
    keys = [k for k in results[0] if k != "backend"]
    print(f"horizon={args.horizon} dimension={args.dimension} (best of {args.repeat}, seconds)")
    print(f"{'workload':<24}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for k in keys:
        a, b = results[0][k], results[1][k]
        print(f"{k:<24}{a:>12.4f}{b:>12.4f}{b / a:>10.1f}x")
    if results[0]["backend"] != "numba":
        print("note: numba unavailable, both columns used numpy")


if __name__ == "__main__":
    main()
