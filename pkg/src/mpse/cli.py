"""Command-line front end.

Subcommands::

    mpse run CONFIG.json           multi-seed optimisation from a JSON config
    mpse gen KIND --out DIR        write a synthetic instance
    mpse bench --sweep n|K ...     timing and success-rate sweep
    mpse stress --embedding E --projections P D1.csv ...
    mpse init D1.csv ... --out DIR smart initialisation only

Exit codes: 0 on success, 1 on invalid input, 2 when every seed diverged.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import io
from .core import (
    DivergenceDetected,
    MPSEError,
    OptimizerConfig,
    ProjectionStack,
)
from .datasets import (
    circle_square_instance,
    clusters_instance,
    distances_from_points,
    graph_dissimilarity,
    scalability_instance,
)
from .optimizer import InitConfig, run, smart_initialize
from .projections import random_stack, standard_viewpoints
from .stress import mpse_stress

logger = logging.getLogger("mpse")

DEFAULT_SEEDS = 10
_SOLVER_FIELDS = {f.name for f in fields(OptimizerConfig)} - {"seed", "mode"}
_INIT_FIELDS = {"init_T": "T", "init_c": "c", "proj_starts": "proj_starts"}
_CONFIG_FIELDS = (
    {"mode", "dissimilarities", "generator", "projections", "output", "seeds", "X0", "Q0"}
    | _SOLVER_FIELDS
    | set(_INIT_FIELDS)
)


class ConfigError(MPSEError):
    """A run configuration failed validation; the message names the field."""

    def __init__(self, field, message):
        super().__init__(f"config field {field!r}: {message}")
        self.field = field


# ---------------------------------------------------------------- run config


def _resolve(base, path):
    path = Path(path)
    return path if path.is_absolute() else base / path


def _generate(spec, seed):
    """Relations (and true projections, when known) from a generator spec."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    rng = np.random.default_rng(spec.pop("seed", seed))
    n = int(spec.pop("n", 100))
    if kind == "ball":
        _, P, D = scalability_instance(n, int(spec.pop("k", 3)), rng)
    elif kind == "circle-square":
        _, D = circle_square_instance(n, rng)
        P = None
    elif kind == "clusters":
        _, D = clusters_instance(n, int(spec.pop("k", 3)), float(spec.pop("separation", 6.0)), rng)
        P = None
    else:
        raise ConfigError("generator", f"unknown kind {kind!r}")
    if spec:
        raise ConfigError("generator", f"unexpected keys {sorted(spec)}")
    return D, P


def _projection_spec(spec, K, p, q, base, truth=None):
    if not isinstance(spec, str):
        raise ConfigError("projections", "expected a string such as 'standard' or 'file:P.json'")
    kind, _, arg = spec.partition(":")
    if kind == "truth":
        if truth is None:
            raise ConfigError("projections", "'truth' needs a generator that knows its views")
        return truth
    if kind == "standard":
        if K > 3 or (p, q) != (3, 2):
            raise ConfigError("projections", "standard provides three 2x3 views")
        return ProjectionStack(standard_viewpoints(3).matrices[:K])
    if kind == "angles":
        m = int(arg) if arg else K
        if m < K:
            raise ConfigError("projections", f"angles:{m} gives fewer views than {K} relations")
        return ProjectionStack(standard_viewpoints(m).matrices[:K])
    if kind == "random":
        return random_stack(K, q, p, np.random.default_rng(int(arg or 0)))
    if kind == "file":
        P = io.read_projections(_resolve(base, arg))
        if P.K != K:
            raise ConfigError("projections", f"file has {P.K} views for {K} relations")
        return P
    raise ConfigError("projections", f"unknown projection spec {spec!r}")


def load_config(path, default_seed=0):
    """Parse and validate a run configuration.

    Returns a dict with ``D``, ``P``, ``X0``, ``Q0``, ``cfg`` (an
    :class:`OptimizerConfig` with ``seed=None``), ``init``, ``seeds`` and
    ``output``.
    """
    path = Path(path)
    base = path.parent
    try:
        raw = io.read_json(path)
    except (OSError, ValueError) as exc:
        raise ConfigError("<file>", str(exc)) from exc
    if not isinstance(raw, dict):
        raise ConfigError("<file>", "top level must be a JSON object")
    unknown = sorted(set(raw) - _CONFIG_FIELDS)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")

    mode = raw.get("mode", "fixed")
    if mode not in ("fixed", "varying"):
        raise ConfigError("mode", f"must be 'fixed' or 'varying', got {mode!r}")

    if ("dissimilarities" in raw) == ("generator" in raw):
        raise ConfigError("dissimilarities", "give exactly one of 'dissimilarities' or 'generator'")
    P_true = None
    if "dissimilarities" in raw:
        files = raw["dissimilarities"]
        if not isinstance(files, list) or not files:
            raise ConfigError("dissimilarities", "expected a non-empty list of files")
        try:
            D = [io.load_relation(_resolve(base, f)) for f in files]
        except (OSError, ValueError) as exc:
            raise ConfigError("dissimilarities", str(exc)) from exc
    else:
        D, P_true = _generate(raw["generator"], default_seed)
    if len({d.n for d in D}) != 1:
        raise ConfigError("dissimilarities", "relations cover different object counts")
    n, K = D[0].n, len(D)

    solver = {k: raw[k] for k in _SOLVER_FIELDS if k in raw}
    init_kw = {v: raw[k] for k, v in _INIT_FIELDS.items() if k in raw}

    X0 = None
    if "X0" in raw:
        try:
            X0 = io.read_embedding(_resolve(base, raw["X0"]))
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError("X0", str(exc)) from exc
        if X0.n != n:
            raise ConfigError("X0", f"has {X0.n} points, relations cover {n}")
        solver.setdefault("init", "given")
    p = X0.p if X0 is not None else 3

    P = None
    if mode == "fixed":
        if "projections" not in raw:
            raise ConfigError("projections", "required in fixed mode")
        try:
            P = _projection_spec(raw["projections"], K, p, 2, base, P_true)
        except (OSError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("projections", str(exc)) from exc
        if P.p != p:
            raise ConfigError("projections", f"views act on R^{P.p}, embedding is in R^{p}")
    Q0 = None
    if "Q0" in raw:
        if mode != "varying":
            raise ConfigError("Q0", "only used in varying mode")
        try:
            Q0 = io.read_projections(_resolve(base, raw["Q0"]))
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError("Q0", str(exc)) from exc
        if Q0.K != K:
            raise ConfigError("Q0", f"has {Q0.K} views for {K} relations")
    q = P.q if P is not None else (Q0.q if Q0 is not None else 2)

    for key, value in solver.items():
        try:
            OptimizerConfig(**{key: value})
        except (ValueError, TypeError) as exc:
            raise ConfigError(key, str(exc)) from exc
    cfg = OptimizerConfig(mode=mode, seed=None, **solver)
    if cfg.init == "given" and X0 is None:
        raise ConfigError("X0", "init 'given' needs an X0 file")
    try:
        init = InitConfig(strategy=cfg.init, radius=cfg.init_radius, d1=p, d2=q, **init_kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError("init", str(exc)) from exc

    seeds = raw.get("seeds", list(range(default_seed, default_seed + DEFAULT_SEEDS)))
    if (
        not isinstance(seeds, list)
        or not seeds
        or not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds)
    ):
        raise ConfigError("seeds", "expected a non-empty list of nonnegative integers")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds", "seeds must be distinct")
    output = _resolve(base, raw.get("output", "out"))
    return {
        "D": D, "P": P, "P_true": P_true, "X0": X0, "Q0": Q0,
        "cfg": cfg, "init": init, "seeds": seeds, "output": output,
    }


def _solve(job):
    """Worker body for one seed; returns ``(seed, status, result)``."""
    seed, conf = job
    cfg = OptimizerConfig(**{**conf["cfg"].to_dict(), "seed": seed})
    try:
        res = run(conf["D"], cfg, P=conf["P"], X0=conf["X0"], Q0=conf["Q0"], init=conf["init"])
        return seed, "ok", res
    except DivergenceDetected as exc:
        return seed, "diverged", exc.result


def _map(fn, jobs, n_jobs):
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def cmd_run(config_path, jobs=1, seed=0):
    """Run every seed of a config and write per-seed and summary files."""
    try:
        conf = load_config(config_path, default_seed=seed)
    except MPSEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = io.ensure_dir(conf["output"])
    outcomes = _map(_solve, [(s, conf) for s in conf["seeds"]], jobs)

    entries = []
    best = None
    for s, status, res in outcomes:
        if res is not None:
            obj = res.to_dict()
            obj["seed"] = s
            obj["status"] = status
            io.write_json(obj, out / f"seed_{s}.json")
            io.write_trace(res.trace, out / f"seed_{s}_trace.csv")
        total = None if res is None else res.report.total
        entries.append({"seed": s, "status": status, "total_stress": total})
        if status == "ok" and (best is None or total < best[1].report.total):
            best = (s, res)
        logger.info("seed %d: %s, total stress %s", s, status, total)

    summary = {
        "mode": conf["cfg"].mode,
        "config": conf["cfg"].to_dict(),
        "init": asdict(conf["init"]),
        "seeds": entries,
        "best_seed": None if best is None else best[0],
        "stress": None if best is None else best[1].report.to_dict(),
        "result_file": None if best is None else f"seed_{best[0]}.json",
    }
    io.write_json(summary, out / "summary.json")
    if best is None:
        print("error: every seed diverged", file=sys.stderr)
        return 2
    print(f"best seed {best[0]}: total stress {best[1].report.total!r}")
    return 0


# ----------------------------------------------------------------------- gen


def cmd_gen(kind, out, n=100, k=3, seed=0, separation=6.0, inputs=()):
    """Write a synthetic instance to ``out``; returns an exit code."""
    rng = np.random.default_rng(seed)
    out = Path(out)
    if kind == "ball":
        X, P, D = scalability_instance(n, k, rng)
        io.ensure_dir(out)
        io.write_json(X.to_dict(), out / "groundtruth.json")
        io.write_projections(P, out / "projections.json")
    elif kind == "circle-square":
        pts, D = circle_square_instance(n, rng)
        io.ensure_dir(out)
        for name, p in zip(("circle", "square"), pts):
            io.write_points(p, out / f"{name}.csv")
    elif kind == "clusters":
        if n % 2:
            print("error: clusters needs an even --n", file=sys.stderr)
            return 1
        pts, D = clusters_instance(n, k, separation, rng)
        io.ensure_dir(out)
        for j, p in enumerate(pts):
            io.write_points(p, out / f"points_{j}.csv")
    elif kind == "from-points":
        if not inputs:
            print("error: from-points needs input point files", file=sys.stderr)
            return 1
        try:
            D = [distances_from_points(io.read_points(f).coords) for f in inputs]
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        if len({d.n for d in D}) != 1:
            print("error: point files differ in length", file=sys.stderr)
            return 1
        io.ensure_dir(out)
    elif kind == "from-graph":
        if len(inputs) != 1:
            print("error: from-graph needs one graph file", file=sys.stderr)
            return 1
        try:
            g = io.read_graph(inputs[0])
            D = [graph_dissimilarity(g, name) for name in g.names]
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        io.ensure_dir(out)
    else:
        print(f"error: unknown instance kind {kind!r}", file=sys.stderr)
        return 1
    for j, d in enumerate(D):
        io.write_dissimilarity(d, out / f"dist_{j}.csv")
    return 0


# --------------------------------------------------------------------- bench

BENCH_FIELDS = ("sweep", "n", "K", "instances", "mean_time", "std_time", "success_fraction")


def _bench_one(job):
    n, K, inst_seed, cfg, init = job
    X, P, D = scalability_instance(n, K, np.random.default_rng(inst_seed))
    start = time.perf_counter()
    try:
        res = run(D, cfg, P=P if cfg.mode == "fixed" else None, init=init)
    except DivergenceDetected as exc:
        res = exc.result
    elapsed = time.perf_counter() - start
    return elapsed, res.report.total


def bench(sweep, values, fixed, instances=10, threshold=1e-3, cfg=None, init=None, seed=0,
          jobs=1):
    """Mean wall time and success fraction per sweep cell.

    ``sweep`` is ``'n'`` or ``'K'``; ``fixed`` is the value of the other
    parameter. Instance ``i`` of every cell uses seed ``seed + i`` for both
    the instance and the solver. Timing covers the solver call only.
    """
    if sweep not in ("n", "K"):
        raise MPSEError(f"sweep must be 'n' or 'K', got {sweep!r}")
    cfg = OptimizerConfig(T=100, c=0.01) if cfg is None else cfg
    jobs_list = []
    for v in values:
        n, K = (v, fixed) if sweep == "n" else (fixed, v)
        for i in range(instances):
            c = OptimizerConfig(**{**cfg.to_dict(), "seed": seed + i})
            jobs_list.append((n, K, seed + i, c, init))
    outcomes = _map(_bench_one, jobs_list, jobs)
    rows = []
    for idx, v in enumerate(values):
        n, K = (v, fixed) if sweep == "n" else (fixed, v)
        cell = outcomes[idx * instances:(idx + 1) * instances]
        t = np.array([o[0] for o in cell])
        ok = np.array([o[1] < threshold for o in cell])
        rows.append({
            "sweep": sweep, "n": n, "K": K, "instances": instances,
            "mean_time": float(t.mean()), "std_time": float(t.std()),
            "success_fraction": float(ok.mean()),
        })
    return rows


def write_bench(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def read_bench(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for key in ("n", "K", "instances"):
            r[key] = int(r[key])
        for key in ("mean_time", "std_time", "success_fraction"):
            r[key] = float(r[key])
    return rows


# -------------------------------------------------------------- stress, init


def cmd_stress(embedding, projections, dissimilarities, stream=None):
    """Print the labelled stress report; returns an exit code."""
    stream = sys.stdout if stream is None else stream
    try:
        X = io.read_embedding(embedding)
        P = io.read_projections(projections)
        D = [io.load_relation(f) for f in dissimilarities]
        report = mpse_stress(X, P, D)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"total: {report.total!r}", file=stream)
    print(f"sqrt_total: {report.sqrt_total!r}", file=stream)
    print(f"raw_total: {report.raw_total!r}", file=stream)
    for k, s in enumerate(report.per_perspective):
        print(f"perspective_{k}: {s!r}", file=stream)
        print(f"perspective_{k}_sqrt: {float(np.sqrt(s))!r}", file=stream)
    return 0


def cmd_init(dissimilarities, out, p=3, q=2, T=100, c=1.0, mu0=1.0, seed=0, proj_starts=5):
    """Smart initialisation only; writes ``X0.json`` and ``Q0.json``."""
    try:
        D = [io.load_relation(f) for f in dissimilarities]
        cfg = OptimizerConfig(T=T, c=c, mu0=mu0, seed=seed, mode="varying", init="smart")
        init = InitConfig(strategy="smart", d1=p, d2=q, proj_starts=proj_starts)
        X, Q = smart_initialize(D, init, cfg)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = io.ensure_dir(out)
    io.write_json(X.to_dict(), out / "X0.json")
    io.write_projections(Q, out / "Q0.json")
    return 0


# ------------------------------------------------------------------- parser


def _int_list(text):
    return [int(v) for v in text.replace(",", " ").split()]


def build_parser():
    parser = argparse.ArgumentParser(prog="mpse", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes")
    parser.add_argument(
        "--deterministic", action=argparse.BooleanOptionalAction, default=True,
        help="fixed-order reductions (always on; kept for interface stability)",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    # subcommands accept --seed too; it overrides the global one when given
    seed_kw = dict(type=int, default=argparse.SUPPRESS, help="seed for this command")

    p_run = sub.add_parser("run", help="optimise from a JSON config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", **seed_kw)

    p_gen = sub.add_parser("gen", help="write a synthetic instance")
    p_gen.add_argument("kind", help="ball, circle-square, clusters, from-points or from-graph")
    p_gen.add_argument("inputs", nargs="*", help="input files for from-points / from-graph")
    p_gen.add_argument("--n", type=int, default=100)
    p_gen.add_argument("--k", type=int, default=3)
    p_gen.add_argument("--separation", type=float, default=6.0)
    p_gen.add_argument("--out", default=".")
    p_gen.add_argument("--seed", **seed_kw)

    p_bench = sub.add_parser("bench", help="timing and success-rate sweep")
    p_bench.add_argument("--sweep", choices=("n", "K"), default="n")
    p_bench.add_argument("--values", type=_int_list, default=None,
                         help="comma separated sweep values")
    p_bench.add_argument("--n", type=int, default=200, help="n for a K sweep")
    p_bench.add_argument("--k", type=int, default=3, help="K for an n sweep")
    p_bench.add_argument("--instances", type=int, default=10)
    p_bench.add_argument("--threshold", type=float, default=1e-3)
    p_bench.add_argument("--mode", choices=("fixed", "varying"), default="fixed")
    p_bench.add_argument("--init", choices=("random", "smart"), default="random")
    p_bench.add_argument("--T", type=int, default=100)
    p_bench.add_argument("--c", type=float, default=0.01)
    p_bench.add_argument("--mu0", type=float, default=1.0)
    p_bench.add_argument("--out", default="bench.csv")
    p_bench.add_argument("--seed", **seed_kw)

    p_stress = sub.add_parser("stress", help="report the stress of an embedding")
    p_stress.add_argument("--embedding", required=True)
    p_stress.add_argument("--projections", required=True)
    p_stress.add_argument("dissimilarities", nargs="+")

    p_init = sub.add_parser("init", help="smart initialisation only")
    p_init.add_argument("dissimilarities", nargs="+")
    p_init.add_argument("--p", type=int, default=3)
    p_init.add_argument("--q", type=int, default=2)
    p_init.add_argument("--T", type=int, default=100)
    p_init.add_argument("--c", type=float, default=1.0)
    p_init.add_argument("--mu0", type=float, default=1.0)
    p_init.add_argument("--proj-starts", type=int, default=5)
    p_init.add_argument("--out", default=".")
    p_init.add_argument("--seed", **seed_kw)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 1
    if args.command == "run":
        return cmd_run(args.config, jobs=args.jobs, seed=args.seed)
    if args.command == "gen":
        if args.n < 1 or args.k < 1:
            print("error: --n and --k must be positive", file=sys.stderr)
            return 1
        return cmd_gen(args.kind, args.out, n=args.n, k=args.k, seed=args.seed,
                       separation=args.separation, inputs=args.inputs)
    if args.command == "bench":
        fixed = args.k if args.sweep == "n" else args.n
        values = args.values
        if values is None:
            values = list(range(100, 1001, 100)) if args.sweep == "n" else list(range(1, 9))
        try:
            cfg = OptimizerConfig(T=args.T, c=args.c, mu0=args.mu0, mode=args.mode,
                                  init=args.init)
            rows = bench(args.sweep, values, fixed, args.instances, args.threshold, cfg,
                         seed=args.seed, jobs=args.jobs)
        except MPSEError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        write_bench(rows, args.out)
        return 0
    if args.command == "stress":
        return cmd_stress(args.embedding, args.projections, args.dissimilarities)
    return cmd_init(args.dissimilarities, args.out, p=args.p, q=args.q, T=args.T, c=args.c,
                    mu0=args.mu0, seed=args.seed, proj_starts=args.proj_starts)


if __name__ == "__main__":
    sys.exit(main())
