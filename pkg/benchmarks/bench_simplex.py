"""Compare the numba and pure-numpy simplex kernels.

Each backend runs in its own interpreter because the kernel is chosen at
import time from SCENRED_NUMBA. Besides wall time the script checks that both
backends report the same pivot counts, which the reward relies on.

    python benchmarks/bench_simplex.py --repeat 3
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
from scenred import _accel
from scenred.core import ReducedSelection, build_extensive_form, gen_cflp
from scenred.mip import MipProblem, Solver, solve_lp

args = json.loads(sys.argv[1])
out = {"backend": _accel.backend_name(), "cases": []}

def random_lp(m, n, seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.0, 1.0, (m, n))
    return MipProblem.build(-rng.uniform(0.5, 1.5, n), A, A.sum(axis=1) * 0.3, lo=np.zeros(n), hi=np.ones(n))

cases = [("lp %dx%d" % (m, n), lambda m=m, n=n: solve_lp(random_lp(m, n, 7)))
         for m, n in args["sizes"]]
inst = gen_cflp(5, 10, 30, 1)
for k in args["ks"]:
    p = build_extensive_form(inst, ReducedSelection.uniform(list(range(k))))
    cases.append(("cflp_5_10_30 k=%d" % k, lambda p=p: Solver(cache_size=0).mip(p)))

for name, fn in cases:
    fn()  # warm-up, includes jit compilation
    times = []
    for _ in range(args["repeat"]):
        t = time.perf_counter()
        res = fn()
        times.append(time.perf_counter() - t)
    out["cases"].append({"name": name, "seconds": min(times), "pivots": res.work.simplex_pivots,
                         "nodes": res.work.bnb_nodes, "objective": res.objective})
print(json.dumps(out))
"""


def run_backend(flag, payload):
    env = dict(os.environ, SCENRED_NUMBA=flag)
    t = time.perf_counter()
    proc = subprocess.run([sys.executable, "-c", WORKER, json.dumps(payload)], env=env,
                          capture_output=True, text=True, check=True)
    res = json.loads(proc.stdout.strip().splitlines()[-1])
    res["total_seconds"] = time.perf_counter() - t
    return res


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--sizes", default="40x80,120x240",
                    help="comma-separated MxN random LP sizes")
    ap.add_argument("--ks", default="1", help="reduced CFLP scenario counts")
    args = ap.parse_args(argv)
    payload = {"repeat": args.repeat,
               "sizes": [[int(v) for v in s.split("x")] for s in args.sizes.split(",") if s],
               "ks": [int(k) for k in args.ks.split(",") if k]}
    fast = run_backend("1", payload)
    slow = run_backend("0", payload)
    print(f"{'case':<22}{'numba s':>10}{'numpy s':>10}{'speedup':>9}{'pivots':>9}  same-work")
    agree = True
    for a, b in zip(fast["cases"], slow["cases"]):
        same = a["pivots"] == b["pivots"] and a["nodes"] == b["nodes"]
        agree &= same
        print(f"{a['name']:<22}{a['seconds']:>10.4f}{b['seconds']:>10.4f}"
              f"{b['seconds'] / a['seconds']:>9.1f}{a['pivots']:>9d}  {'yes' if same else 'NO'}")
    print(f"backends: {fast['backend']} vs {slow['backend']}; work counts agree: {agree}")
    return 0 if agree else 1


if __name__ == "__main__":
    sys.exit(main())
