"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 12,16,20] [--repeat 5]

Each backend runs in its own interpreter (the choice is made at import), and
reports the best of ``--repeat`` timings for sector construction and for one
Hamiltonian application.
"""
import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, math, sys, timeit
import numpy as np
from starkprobe._backend import BACKEND, kernels
from starkprobe.basis import BINOM
from starkprobe.hamiltonian import coupling

sizes, repeat = json.loads(sys.argv[1]), int(sys.argv[2])
out = {"backend": BACKEND, "rows": []}
for L in sizes:
    N = L // 2
    dim = math.comb(L, N)
    c = np.array([0.0] + [coupling(1.0, d) for d in range(1, L)])
    t_enum = min(timeit.repeat(lambda: kernels.enumerate_states(L, N, dim), number=1, repeat=repeat))
    states = kernels.enumerate_states(L, N, dim)
    t_diag = min(timeit.repeat(lambda: kernels.diagonal_terms(states, L, c), number=1, repeat=repeat))
    t_hops = min(timeit.repeat(lambda: kernels.hop_structure(states, L, BINOM), number=1, repeat=repeat))
    zz, fw = kernels.diagonal_terms(states, L, c)
    indptr, indices = kernels.hop_structure(states, L, BINOM)
    v = np.random.default_rng(0).standard_normal(dim)
    w = np.empty(dim)
    n = max(1, int(2e6 // dim))
    t_mv = min(timeit.repeat(lambda: kernels.apply_hamiltonian(zz, indptr, indices, 2.0, v, w), number=n, repeat=repeat)) / n
    out["rows"].append({"L": L, "dim": dim, "enumerate": t_enum, "diagonal": t_diag, "hops": t_hops, "matvec": t_mv})
print(json.dumps(out))
"""


def run(backend, sizes, repeat):
    env = dict(os.environ)
    env.pop("STARKPROBE_PURE_PYTHON", None)
    if backend == "python":
        env["STARKPROBE_PURE_PYTHON"] = "1"
    proc = subprocess.run(
        [sys.executable, "-c", CHILD, json.dumps(sizes), str(repeat)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(proc.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="12,16,20")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]
    fast = run("cython", sizes, args.repeat)
    slow = run("python", sizes, args.repeat)
    if fast["backend"] != "cython":
        print("compiled extension not available; both columns use the fallback")
    cols = ("enumerate", "diagonal", "hops", "matvec")
    print(f"{'L':>3} {'dim':>9}  " + "  ".join(f"{c:>22}" for c in cols))
    for a, b in zip(fast["rows"], slow["rows"]):
        cells = [f"{a[c] * 1e3:8.3f}/{b[c] * 1e3:8.3f} ms x{b[c] / a[c]:4.1f}" for c in cols]
        print(f"{a['L']:>3} {a['dim']:>9}  " + "  ".join(f"{s:>22}" for s in cells))
    print("(compiled / fallback, speed-up)")


if __name__ == "__main__":
    main()
