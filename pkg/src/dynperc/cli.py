"""Command-line experiment runner.

Every output starts with ``# key=value`` lines holding the tool version, the
subcommand and the fully resolved configuration (master seed included), then
the CSV or JSON body.  Identical configurations give identical bytes; wall
time is only written with ``--wall-time``.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .params import Params

COMMANDS = ("simulate", "structure", "couple", "mix", "anatomy", "oracle")

# resolved-config keys with their types and defaults, per subcommand
COMMON = {"n": (int, None), "lam": (float, 2.0), "seed": (int, 0)}
SPECS = {
    "simulate": {"mu": (float, 1.0), "t_max": (float, 10.0), "start": (int, 0),
                 "walkers": (int, 1), "env_mode": (str, "stationary"), "replica": (int, 0)},
    "structure": {"c_star": (float, 0.05), "C_star": (float, 20.0)},
    "couple": {"mu": (float, 1.0), "t_max": (float, 100.0), "replicas": (int, 100),
               "start_a": (str, "0:all_open"), "start_b": (str, "last:all_closed")},
    "mix": {"mu": (float, 1.0), "times": (str, None), "replicas": (int, 1000),
            "target": (str, "walk"), "start": (int, 0), "env_mode": (str, "stationary"),
            "estimator": (str, None)},
    "anatomy": {"replicas": (int, 200)},
    "oracle": {"mu": (float, 1.0), "times": (str, "1,5,25"), "start": (int, 0),
               "env_mode": (str, "all_closed")},
}


HELP = {
    "start": "walker start vertex",
    "walkers": "number of independent walkers",
    "env_mode": "initial environment: stationary, all_open or all_closed",
    "replica": "replica index within the master seed",
    "c_star": "good-graph constant c*",
    "C_star": "good-graph constant C*",
    "start_a": "first system's start as vertex:env_mode (vertex may be 'last')",
    "start_b": "second system's start as vertex:env_mode",
    "target": "walk, full_system or environment_count",
    "estimator": "plugin, symmetric (walk) or threshold (environment_count)",
}


class UsageError(Exception):
    pass


class ExperimentConfig(dict):
    """Fully resolved configuration of one subcommand (master seed included)."""

    def __init__(self, command: str, values: dict):
        super().__init__(values)
        self.command = command


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dynperc", description="Dynamical percolation experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="plain-text key=value file; flags override it")
        sp.add_argument("--out", help="output path (default: $DYNPERC_OUT_DIR/<command>.<ext> or stdout)")
        sp.add_argument("--wall-time", action="store_true", help="record wall time in the header")
        sp.add_argument("--n", type=int, dest="n", help="number of vertices (required)")
        sp.add_argument("--lambda", type=float, dest="lam", help="mean degree, p = lambda/n")
        sp.add_argument("--seed", type=int, help="64-bit master seed")
        keys = SPECS[name]
        if "mu" in keys:
            sp.add_argument("--mu", type=float, help="edge refresh rate")
        if "t_max" in keys:
            sp.add_argument("--t-max", type=float, dest="t_max", help="time horizon")
        if "times" in keys:
            sp.add_argument("--times", help="comma-separated times")
        if "replicas" in keys:
            sp.add_argument("--replicas", type=int, help="number of replicas")
        if name == "anatomy":
            sp.add_argument("--per-replica", dest="per_replica_out",
                            help="also write per-replica statistics as CSV to this path")
        for k, (typ, _) in keys.items():
            if k in ("mu", "t_max", "times", "replicas"):
                continue
            sp.add_argument("--" + k.replace("_", "-"), dest=k, type=typ, help=HELP.get(k))
    return ap


def _read_config(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k, eq, v = line.partition("=")
            if not eq:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            k = k.strip().replace("-", "_")
            out["lam" if k == "lambda" else k] = v.strip()
    return out


def resolve(args: argparse.Namespace) -> ExperimentConfig:
    keys = {**COMMON, **SPECS[args.command]}
    cfg = _read_config(args.config) if args.config else {}
    unknown = set(cfg) - set(keys)
    if unknown:
        raise UsageError(f"unknown config keys for {args.command}: {sorted(unknown)}")
    out = {}
    for k, (typ, default) in keys.items():
        v = getattr(args, k, None)
        if v is None and k in cfg:
            try:
                v = typ(cfg[k])
            except ValueError as exc:
                raise UsageError(f"bad value for {k}: {cfg[k]!r}") from exc
        out[k] = default if v is None else v
    if out["n"] is None:
        raise UsageError("--n is required")
    return ExperimentConfig(args.command, out)


def _times(s: str | None) -> np.ndarray:
    if not s:
        raise UsageError("--times is required")
    try:
        t = np.array([float(x) for x in s.split(",") if x.strip()])
    except ValueError as exc:
        raise UsageError(f"bad --times {s!r}") from exc
    if t.size == 0 or np.any(t < 0) or np.any(np.diff(t) < 0):
        raise UsageError("--times must be nonnegative and ascending")
    return t


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def _header(command: str, cfg: dict, extra: dict, wall: float | None) -> str:
    lines = [f"# tool=dynperc", f"# version={__version__}", f"# command={command}"]
    lines += [f"# {k}={_fmt(v)}" for k, v in sorted(cfg.items())]
    lines += [f"# {k}={_fmt(v)}" for k, v in extra.items()]
    if wall is not None:
        lines.append(f"# wall_time={wall:.3f}")
    return "\n".join(lines) + "\n"


def write_atomic(path: str, text: str) -> None:
    """Write to a temporary file in the target directory, then rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        os.chmod(tmp, 0o644)
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_output(text: str) -> tuple[dict, str]:
    """Split an output file into its metadata header and body."""
    meta, body = {}, []
    for line in text.splitlines(keepends=True):
        if line.startswith("#") and not body:
            k, _, v = line[1:].strip().partition("=")
            meta[k] = v
        else:
            body.append(line)
    return meta, "".join(body)


# --- subcommands -------------------------------------------------------------------------
def _params(cfg, mu=None) -> Params:
    n, lam = cfg["n"], cfg["lam"]
    return Params(n, lam, cfg.get("mu", 1.0) if mu is None else mu)


def _run_simulate(cfg):
    from .seeding import replica_rng
    from .sim import init_environment, make_system

    P = _params(cfg)
    rng = replica_rng(cfg["seed"], cfg["replica"])
    env = init_environment(P, cfg["env_mode"], rng)
    sys_ = make_system(P, env, [cfg["start"]] * cfg["walkers"], rng)
    log = sys_.advance(cfg["t_max"], log=True)
    extra = {"events": len(log.time), "final_positions": " ".join(map(str, sys_.pos)),
             "final_open": env.open_count}
    return extra, log.to_csv(), "csv"


def _run_structure(cfg):
    from .anatomy import sample_er_graph
    from .seeding import replica_rng
    from .structure import GoodGraphConstants, structure_report

    n = cfg["n"]
    g = sample_er_graph(n, cfg["lam"] / n, replica_rng(cfg["seed"], 0))
    rep = structure_report(g, GoodGraphConstants(c_star=cfg["c_star"], C_star=cfg["C_star"]))
    return {}, rep.to_json(sort_keys=True) + "\n", "json"


def _start(spec: str, P: Params, rng):
    from .sim import init_environment

    x, _, mode = spec.partition(":")
    x = P.n - 1 if x == "last" else int(x)
    if not 0 <= x < P.n:
        raise UsageError(f"start vertex {x} out of range")
    return x, init_environment(P, mode or "stationary", rng)


def _run_couple(cfg):
    from .couplings import records_to_csv, run_full_coupling
    from .seeding import replica_rng

    P = _params(cfg)
    if P.n < 3:
        raise UsageError("couple needs n >= 3")
    recs = []
    for r in range(cfg["replicas"]):
        rng = replica_rng(cfg["seed"], r, 2)
        a = _start(cfg["start_a"], P, rng)
        b = _start(cfg["start_b"], P, rng)
        rec, _, _ = run_full_coupling(P, a, b, cfg["t_max"], cfg["seed"], r)
        recs.append(rec)
    co = sum(r.coalesced for r in recs)
    return {"coalesced": co}, records_to_csv(recs), "csv"


def _run_mix(cfg):
    from .estimators import estimates_to_csv, mixing_curve

    P = _params(cfg)
    times = _times(cfg["times"])
    est = cfg["estimator"] or ("threshold" if cfg["target"] == "environment_count" else "plugin")
    try:
        curve = mixing_curve(P, cfg["target"], times, cfg["replicas"], cfg["seed"],
                             start=cfg["start"], env_mode=cfg["env_mode"], estimator=est)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return {"estimator_used": est}, estimates_to_csv(curve), "csv"


def _run_anatomy(cfg):
    from .anatomy import compare_anatomy_vs_er

    try:
        rep = compare_anatomy_vs_er(cfg["n"], cfg["lam"], cfg["replicas"], cfg["seed"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return {}, rep.to_json(sort_keys=True) + "\n", "json", rep.to_csv()


def _run_oracle(cfg):
    from .oracle import build_generator, stationarity_residual, transient_distribution
    from .sim import init_environment

    P = _params(cfg)
    if P.n > 5:
        raise UsageError("oracle needs n <= 5")
    spec = build_generator(P)
    res, db = stationarity_residual(spec)
    env = init_environment(P, cfg["env_mode"], np.random.default_rng(cfg["seed"]))
    start = spec.index(cfg["start"], env.bitmask())
    pi = spec.stationary()
    rows = ["time,tv_to_stationary"]
    for t in _times(cfg["times"]):
        d = transient_distribution(spec, start, float(t))
        rows.append(f"{float(t)!r},{float(0.5 * np.abs(d - pi).sum())!r}")
    extra = {"stationarity_residual": float(res), "detailed_balance_max": float(db)}
    return extra, "\n".join(rows) + "\n", "csv"


RUNNERS = {"simulate": _run_simulate, "structure": _run_structure, "couple": _run_couple,
           "mix": _run_mix, "anatomy": _run_anatomy, "oracle": _run_oracle}


def run(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    t0 = time.perf_counter()
    try:
        cfg = resolve(args)
        if "mu" in cfg and not (cfg["mu"] >= 0 and math.isfinite(cfg["mu"])):
            raise UsageError("--mu must be finite and nonnegative")
        extra, body, ext, *side = RUNNERS[args.command](cfg)
    except (UsageError, ValueError, OSError) as exc:
        ap.print_usage(sys.stderr)
        print(f"dynperc {args.command}: error: {exc}", file=sys.stderr)
        return 2
    wall = time.perf_counter() - t0
    text = _header(args.command, cfg, extra, wall if args.wall_time else None) + body
    out = args.out
    if out is None and os.environ.get("DYNPERC_OUT_DIR"):
        out = os.path.join(os.environ["DYNPERC_OUT_DIR"], f"{args.command}.{ext}")
    if out is None:
        sys.stdout.write(text)
    else:
        write_atomic(out, text)
    if getattr(args, "per_replica_out", None):
        write_atomic(args.per_replica_out, _header(args.command, cfg, extra, None) + side[0])
    if not args.wall_time:
        print(f"dynperc {args.command}: done in {wall:.2f}s", file=sys.stderr)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
