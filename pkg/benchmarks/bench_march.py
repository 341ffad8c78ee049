"""Time the block theta-march with and without numba.

The kernel flag is read at import, so each mode runs in a fresh interpreter
with ``DEGCTRL_DISABLE_NUMBA`` set accordingly. Compilation is excluded by a
warm-up call.

    python3 benchmarks/bench_march.py [--sizes 60x120,200x400] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from degctrl import _kernels
from degctrl.operators import CoefficientSpec, SystemConfig, coupled_blocks

out = {"numba": _kernels.USE_NUMBA, "runs": []}
repeat = int(sys.argv[2])
for size in sys.argv[1].split(","):
    nx, nt = (int(v) for v in size.split("x"))
    cfg = SystemConfig(0.5, 0.75, 1.0, omega1=(0.4, 0.7), b21=CoefficientSpec(1.0, (0.4, 0.7)), nx=nx, nt=nt)
    lo, di, up = coupled_blocks(cfg.mesh(), cfg)
    x0 = np.random.default_rng(0).standard_normal((nx - 1, 2))
    forcing = np.zeros((nt + 1, nx - 1, 2))
    _kernels.theta_march(lo, di, up, 1.0, cfg.dt, x0, forcing)  # warm-up / compile
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        states, ok = _kernels.theta_march(lo, di, up, 1.0, cfg.dt, x0, forcing)
        best = min(best, time.perf_counter() - t0)
    out["runs"].append({"nx": nx, "nt": nt, "seconds": best, "checksum": float(np.sum(states))})
print(json.dumps(out))
"""


def run_mode(disable: bool, sizes: str, repeat: int) -> dict:
    env = dict(os.environ)
    env["DEGCTRL_DISABLE_NUMBA"] = "1" if disable else "0"
    res = subprocess.run(
        [sys.executable, "-c", CHILD, sizes, str(repeat)], env=env, capture_output=True, text=True, check=True
    )
    return json.loads(res.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="60x120,200x400,400x800")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    jit = run_mode(False, args.sizes, args.repeat)
    pure = run_mode(True, args.sizes, args.repeat)
    print(f"{'nx':>5} {'nt':>5} {'numba [s]':>12} {'python [s]':>12} {'speedup':>9} {'same result':>12}")
    for a, b in zip(jit["runs"], pure["runs"]):
        same = abs(a["checksum"] - b["checksum"]) <= 1e-12 * max(1.0, abs(b["checksum"]))
        print(f"{a['nx']:>5} {a['nt']:>5} {a['seconds']:>12.5f} {b['seconds']:>12.5f} "
              f"{b['seconds'] / a['seconds']:>9.1f} {str(same):>12}")
    if not jit["numba"]:
        print("note: numba unavailable, both columns used the interpreted kernels")


if __name__ == "__main__":
    main()
