"""Compiled kernels vs the pure-Python fallback.

Each workload runs in a child process, once with numba and once with
DYNPERC_DISABLE_JIT=1, so the fallback is pure throughout (inner kernels
included).  The compiled timing excludes the first, compiling, call.

    python benchmarks/bench_kernels.py [--repeat 3] [--only simulate,bridges]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def _workloads():
    import numpy as np

    from dynperc import Params
    from dynperc.anatomy import sample_er_graph
    from dynperc.couplings import run_full_coupling
    from dynperc.estimators import degree_hit0_samples, visit_counts
    from dynperc.seeding import replica_rng
    from dynperc.sim import init_environment, make_system
    from dynperc.structure import Graph, core_of, removal_edge_counts

    def simulate():
        P = Params(60, 2.0, 1.0)
        rng = replica_rng(1, 0)
        env = init_environment(P, "stationary", rng)
        make_system(P, env, [0], rng).advance(100.0)

    g = sample_er_graph(20_000, 2 / 20_000, replica_rng(2, 0))

    def bridges():
        removal_edge_counts(g)

    def core():
        core_of(g)

    P6 = Params(6, 2.0, 1.0)
    a0 = (0, init_environment(P6, "all_open"))
    b0 = (5, init_environment(P6, "all_closed"))

    def coupling():
        for r in range(200):
            run_full_coupling(P6, a0, b0, 50.0, 3, r)

    def degree_chain():
        degree_hit0_samples(Params(200, 2.0, 1.0), 100, 4)

    ring = Graph(50, [(i, (i + 1) % 50) for i in range(50)])
    in_a = np.arange(50) < 5

    def visits():
        visit_counts(ring, in_a, 20_000, 10, 5)

    return {"simulate": simulate, "bridges": bridges, "core": core, "coupling": coupling,
            "degree_chain": degree_chain, "visits": visits}


def worker(names, repeat):
    from dynperc._jit import JIT_ENABLED

    work = _workloads()
    out = {}
    for name in names:
        fn = work[name]
        if JIT_ENABLED:
            fn()  # compile
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
        out[name] = best
    print(json.dumps(out))


def _child(disable, names, repeat):
    env = dict(os.environ, DYNPERC_DISABLE_JIT=disable)
    r = subprocess.run([sys.executable, __file__, "--worker", "--only", ",".join(names),
                        "--repeat", str(repeat)], env=env, capture_output=True, text=True,
                       check=True)
    return json.loads(r.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--only", default="simulate,bridges,core,coupling,degree_chain,visits")
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    names = [s for s in args.only.split(",") if s]
    if args.worker:
        worker(names, args.repeat)
        return
    jit = _child("0", names, args.repeat)
    py = _child("1", names, args.repeat)
    print(f"{'kernel':<14}{'numba [s]':>12}{'python [s]':>12}{'speedup':>10}")
    for name in names:
        print(f"{name:<14}{jit[name]:>12.4f}{py[name]:>12.4f}{py[name] / jit[name]:>10.1f}")


if __name__ == "__main__":
    main()
