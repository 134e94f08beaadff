"""Command-line front end: ``run``, ``sweep``, ``estimate`` and ``race``.

Exit codes: 0 on success, 2 on configuration errors, 3 on numerical errors.
The config file is a JSON object with NetworkConfig fields, either at top
level or under ``"scenario"``; an optional ``"solver"`` object sets
SolverOptions fields.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .errors import ConfigError, DomainError, NumericalError
from .metrics import Weights, objective
from .scenario import NetworkConfig, make_scenario
from .solvers import ALGORITHMS, SolverOptions

_SOLVER_KEYS = {"lambda_strategy", "rel_tol", "max_iters", "time_limit_s", "bisection_tol",
                "bisection_max_iters", "init", "record_every", "restart_on_decrease"}


def _load(path):
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    scen = data.get("scenario", {k: v for k, v in data.items() if k != "solver"})
    solver = data.get("solver", {})
    unknown = set(solver) - _SOLVER_KEYS
    if unknown:
        raise ConfigError(f"unknown solver fields: {sorted(unknown)}")
    return NetworkConfig.from_dict(scen), solver


def _options(solver: dict, args, **extra) -> SolverOptions:
    kw = dict(solver)
    for name in ("max_iters", "time_limit_s", "lambda_strategy"):
        value = getattr(args, name, None)
        if value is not None:
            kw[name] = value
    if getattr(args, "tol", None) is not None:
        kw["rel_tol"] = args.tol
    kw.update(extra)
    try:
        return SolverOptions(**kw)
    except (TypeError, DomainError) as exc:
        raise ConfigError(str(exc)) from None


def _algorithms(text: str) -> tuple:
    algs = tuple(a.strip() for a in text.split(",") if a.strip())
    bad = [a for a in algs if a not in ALGORITHMS]
    if bad or not algs:
        raise ConfigError(f"algorithms must be drawn from {ALGORITHMS}, got {text!r}")
    return algs


def _report(summary: dict, bits: bool) -> None:
    unit, scale = ("bits", harness.NATS_TO_BITS) if bits else ("nats", 1.0)
    for entry in summary["trials"]:
        for alg, info in entry["runs"].items():
            if "error" in info:
                print(f"trial {entry['trial']} {alg}: error: {info['error']}")
                continue
            flag = " (truncated)" if info["truncated"] else ""
            print(f"trial {entry['trial']} {alg}: objective {info['final_objective']:.6g}, "
                  f"sum rate {info['sum_rate_nats'] * scale:.6g} {unit}, "
                  f"sum Fisher {info['sum_fisher']:.6g}, {info['iterations']} iterations{flag}")


def _any_error(summary: dict):
    for entry in summary["trials"]:
        for info in entry["runs"].values():
            if "error" in info:
                return info["error"]
    return None


def cmd_run(args) -> int:
    cfg, solver = _load(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    spec = harness.ExperimentSpec(cfg, _options(solver, args), (args.algorithm,), 1, output_dir=args.out)
    res = harness.run_experiment(spec, bits=args.bits)
    _report(res.summary, args.bits)
    err = _any_error(res.summary)
    if err:
        raise NumericalError(err)
    return 0


def cmd_race(args) -> int:
    cfg, solver = _load(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    opts = _options(solver, args)
    spec = harness.ExperimentSpec(cfg, opts, _algorithms(args.algorithms), 1, output_dir=args.out)
    res = harness.run_experiment(spec, bits=args.bits)
    traces = {alg: tr for (t, alg), tr in res.traces.items()}
    rows = harness.race_table(traces)
    out = Path(args.out)
    with (out / "race.csv").open("w") as fh:
        fh.write("algorithm,fraction,threshold,time_s,iterations\n")
        for r in rows:
            t = "" if r["time_s"] is None else repr(r["time_s"])
            it = "" if r["iterations"] is None else str(r["iterations"])
            fh.write(f"{r['algorithm']},{r['fraction']},{r['threshold']!r},{t},{it}\n")
    _report(res.summary, args.bits)
    for r in rows:
        if r["fraction"] == 0.99:
            t = "never" if r["time_s"] is None else f"{r['time_s']:.3f} s"
            print(f"{r['algorithm']}: 99% of best objective at {t}")
    return 0


def cmd_sweep(args) -> int:
    cfg, solver = _load(args.config)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    try:
        values = [int(v) if args.param == "N_t" else float(v) for v in values]
    except ValueError:
        raise ConfigError(f"sweep values must be numbers, got {args.values!r}") from None
    spec = harness.ExperimentSpec(cfg, _options(solver, args), _algorithms(args.algorithms), 1,
                                  sweep={"parameter": args.param, "values": values})
    rows = harness.sweep(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rate_col = "sum_rate_bits" if args.bits else "sum_rate_nats"
    scale = harness.NATS_TO_BITS if args.bits else 1.0
    with (out / "sweep.csv").open("w") as fh:
        fh.write(f"{args.param},algorithm,{rate_col},sum_fisher,objective,iterations,truncated\n")
        for r in rows:
            fh.write(f"{r['value']!r},{r['algorithm']},{r['sum_rate'] * scale!r},{r['sum_fisher']!r},"
                     f"{r['objective']!r},{r['iterations']},{str(r['truncated']).lower()}\n")
    harness.write_summary_json({"build_stamp": harness.build_stamp(), "config": cfg.to_dict(),
                                "sweep": spec.sweep, "seed": cfg.seed,
                                "child_seeds": [{t: harness.child_seed(cfg.seed, 0, t)
                                                 for t in ("scenario", "init")}],
                                "any_truncated": any(r["truncated"] for r in rows), "rows": rows},
                               out / "summary.json")
    print(f"wrote {len(rows)} rows to {out / 'sweep.csv'}")
    return 0


def cmd_estimate(args) -> int:
    cfg, _ = _load(args.config)
    W, meta = harness.read_beamformers_json(args.beamformers)
    seed = int(meta.get("scenario_seed", cfg.seed))
    _, ch = make_scenario(cfg, seed)
    L, K, _, Nt, _ = ch.dims
    if W.shape != (L, K, Nt, cfg.streams):
        raise ConfigError(f"beamformer shape {W.shape} does not match config {(L, K, Nt, cfg.streams)}")
    rep = harness.run_estimation(ch, W, cfg.seed, int(meta.get("trial", 0)), points=args.points,
                                 halfwidth=args.halfwidth)
    rough = harness.rough_report(ch)
    position = args.position or "custom"
    alg = meta.get("algorithm", "unknown")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    harness.write_summary_json({"build_stamp": harness.build_stamp(), "config": cfg.to_dict(),
                                "scenario_seed": seed, "echo_seed": harness.child_seed(cfg.seed, 0, "echo"),
                                "report": rep.to_dict(), "rough": rough.to_dict(),
                                "objective": objective(ch.for_design(), W, Weights.from_config(cfg)).to_dict()},
                               out / "estimation.json")
    harness.write_estimation_csv([
        {"algorithm": "rough", "position": position, "mse": rough.mean_sq_err, "maxse": rough.max_sq_err},
        {"algorithm": alg, "position": position, "mse": rep.mean_sq_err, "maxse": rep.max_sq_err},
    ], out / "estimation.csv")
    print(f"{alg}: mean squared error {rep.mean_sq_err:.3e} rad^2 (rough prior {rough.mean_sq_err:.3e})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isacfp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", required=True)
        sp.add_argument("--bits", action="store_true", help="report rates in bits instead of nats")
        if seed:
            sp.add_argument("--seed", type=int)

    def solver_flags(sp, need_time=False):
        sp.add_argument("--max-iters", dest="max_iters", type=int)
        sp.add_argument("--time-limit-s", dest="time_limit_s", type=float, required=need_time)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--lambda-strategy", dest="lambda_strategy", choices=("max", "trace", "frobenius"))

    sp = sub.add_parser("run", help="run one algorithm")
    common(sp)
    sp.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    solver_flags(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="sweep one scenario parameter")
    common(sp, seed=False)
    sp.add_argument("--param", required=True, choices=sorted(harness.SWEEP_PARAMS))
    sp.add_argument("--values", required=True)
    sp.add_argument("--algorithms", default=",".join(ALGORITHMS))
    solver_flags(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("estimate", help="estimate DoAs under stored beamformers")
    common(sp, seed=False)
    sp.add_argument("--beamformers", required=True)
    sp.add_argument("--position", help="label for the target position column")
    sp.add_argument("--points", type=int, default=401)
    sp.add_argument("--halfwidth", type=float, default=0.1)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("race", help="race algorithms from a shared start")
    common(sp)
    sp.add_argument("--algorithms", required=True)
    solver_flags(sp, need_time=True)
    sp.set_defaults(func=cmd_race)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
