"""Seeded experiment orchestration and machine-readable outputs.

Every random stream is derived from ``(seed, trial, tag)`` through
``numpy.random.SeedSequence`` spawn keys, so one integer reproduces a whole
experiment. Beamformers are designed on response matrices built at the
rough DoAs; echoes for estimation are synthesized at the true DoAs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, NumericalError
from .estimator import EstimationReport, estimate_theta, synthesize_echo
from .metrics import Weights, objective
from .scenario import ChannelSet, NetworkConfig, make_scenario, write_positions_csv
from .solvers import ALGORITHMS, IterationTrace, SolverOptions, TraceRow, init_beamformers, run

__all__ = [
    "TRACE_HEADER",
    "TARGET_POSITIONS",
    "SWEEP_PARAMS",
    "ExperimentSpec",
    "ExperimentResult",
    "child_seed",
    "build_stamp",
    "beamformer_hash",
    "run_experiment",
    "sweep",
    "sweep_tradeoff",
    "time_to_threshold",
    "race_table",
    "run_estimation",
    "write_trace_csv",
    "read_trace_csv",
    "write_summary_json",
    "write_beamformers_json",
    "read_beamformers_json",
    "write_estimation_csv",
]

TRACE_HEADER = ("iter", "elapsed_s", "objective", "sum_rate_nats", "sum_fisher")
NATS_TO_BITS = 1.0 / math.log(2.0)

# target positions used for the estimation study, in meters
TARGET_POSITIONS = {
    "a": (500.0, -1000.0),
    "b": (300.0, -900.0),
    "c": (800.0, 900.0),
    "d": (500.0, 500.0),
    "e": (100.0, -300.0),
}

# sweep parameter -> NetworkConfig field
SWEEP_PARAMS = {
    "omega": "rate_weights",
    "beta": "sensing_weights",
    "P_dbm": "power_budget_dbm",
    "N_t": "tx_antennas",
}

_TAGS = {"scenario": 0, "init": 1, "echo": 2}


def child_seed(seed: int, trial: int, tag: str) -> int:
    """64-bit seed for stream ``tag`` of ``trial``, derived by SeedSequence spawn key."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(trial), _TAGS[tag]))
    return int(ss.generate_state(1, np.uint64)[0])


def build_stamp() -> str:
    """``<version>+<short hash of the package sources>``."""
    h = hashlib.sha1()
    for path in sorted(Path(__file__).parent.glob("*.py")):
        h.update(path.name.encode())
        h.update(path.read_bytes())
    return f"{__version__}+{h.hexdigest()[:12]}"


def beamformer_hash(W: np.ndarray) -> str:
    W = np.ascontiguousarray(W, dtype=np.complex128)
    return hashlib.sha256(repr(W.shape).encode() + W.tobytes()).hexdigest()


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: NetworkConfig = field(default_factory=NetworkConfig)
    solver: SolverOptions = field(default_factory=SolverOptions)
    algorithms: tuple = ALGORITHMS
    trials: int = 1
    sweep: dict | None = None         # {"parameter": name, "values": [...]}
    output_dir: str | Path | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        algs = tuple(self.algorithms)
        if not algs:
            raise ConfigError("at least one algorithm is required")
        for a in algs:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}")
        object.__setattr__(self, "algorithms", algs)
        if self.sweep is not None:
            if self.sweep.get("parameter") not in SWEEP_PARAMS:
                raise ConfigError(f"sweep parameter must be one of {sorted(SWEEP_PARAMS)}")
            if not list(self.sweep.get("values", [])):
                raise ConfigError("sweep values must be nonempty")

    @property
    def seed(self) -> int:
        return self.scenario.seed


@dataclass
class ExperimentResult:
    traces: dict = field(default_factory=dict)        # (trial, algorithm) -> IterationTrace
    beamformers: dict = field(default_factory=dict)   # (trial, algorithm) -> W
    channels: dict = field(default_factory=dict)      # trial -> ChannelSet
    summary: dict = field(default_factory=dict)


def _trace_name(trial: int, algorithm: str) -> str:
    return f"trace_t{trial:03d}_{algorithm}.csv"


def run_experiment(spec: ExperimentSpec, write: bool = True, bits: bool = False) -> ExperimentResult:
    """Run every algorithm of ``spec`` on every trial from a shared start.

    Solver failures are recorded per (trial, algorithm) and do not abort
    the remaining runs. With ``write`` and an ``output_dir``, one trace CSV
    per run, the final beamformers and ``summary.json`` are written.
    """
    cfg = spec.scenario
    weights = Weights.from_config(cfg)
    out = Path(spec.output_dir) if (write and spec.output_dir is not None) else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    res = ExperimentResult()
    trials = []
    for t in range(spec.trials):
        seeds = {tag: child_seed(spec.seed, t, tag) for tag in ("scenario", "init")}
        topo, ch = make_scenario(cfg, seeds["scenario"])
        design = ch.for_design()
        res.channels[t] = ch
        W0 = init_beamformers(cfg, design, spec.solver.init, np.random.default_rng(seeds["init"]))
        entry = {"trial": t, "seeds": seeds, "init_hash": beamformer_hash(W0), "runs": {}}
        if out is not None and t == 0:
            write_positions_csv(topo, out / "positions.csv")
        for alg in spec.algorithms:
            try:
                W, trace = run(alg, design, cfg, weights, spec.solver, W0=W0)
            except NumericalError as exc:
                entry["runs"][alg] = {"error": str(exc), "iteration": exc.iteration}
                continue
            res.traces[(t, alg)] = trace
            res.beamformers[(t, alg)] = W
            final = objective(design, W, weights)
            run_info = {
                "final_objective": final.weighted_sum,
                "sum_rate_nats": final.sum_rate,
                "sum_fisher": final.sum_fisher,
                "iterations": trace.iterations,
                "wall_time_s": trace.rows[-1].elapsed_s,
                "stop_reason": trace.stop_reason,
                "truncated": trace.truncated,
            }
            if bits:
                run_info["sum_rate_bits"] = final.sum_rate * NATS_TO_BITS
            entry["runs"][alg] = run_info
            if out is not None:
                write_trace_csv(trace, out / _trace_name(t, alg))
                write_beamformers_json(W, out / f"beamformers_t{t:03d}_{alg}.json",
                                       meta={"algorithm": alg, "trial": t,
                                             "scenario_seed": seeds["scenario"]})
        trials.append(entry)
    res.summary = {
        "build_stamp": build_stamp(),
        "config": cfg.to_dict(),
        "solver": _solver_dict(spec.solver),
        "algorithms": list(spec.algorithms),
        "seed": spec.seed,
        "child_seeds": [e["seeds"] for e in trials],
        "any_truncated": any(r.get("truncated", False) for e in trials for r in e["runs"].values()),
        "trials": trials,
    }
    if out is not None:
        write_summary_json(res.summary, out / "summary.json")
    return res


def _solver_dict(opts: SolverOptions) -> dict:
    return {
        "lambda_strategy": opts.lambda_strategy.cli_name,
        "rel_tol": opts.rel_tol,
        "max_iters": opts.max_iters,
        "time_limit_s": opts.time_limit_s,
        "bisection_tol": opts.bisection_tol,
        "bisection_max_iters": opts.bisection_max_iters,
        "init": opts.init,
        "record_every": opts.record_every,
        "restart_on_decrease": opts.restart_on_decrease,
    }


def sweep(spec: ExperimentSpec) -> list[dict]:
    """Rerun ``spec`` once per sweep value; one row per (value, trial, algorithm).

    The scenario seed is held fixed across values so only the swept
    parameter changes.
    """
    if spec.sweep is None:
        raise ConfigError("spec has no sweep")
    name = spec.sweep["parameter"]
    rows = []
    for value in spec.sweep["values"]:
        cfg = spec.scenario.replace(**{SWEEP_PARAMS[name]: _coerce(name, value)})
        sub = ExperimentSpec(cfg, spec.solver, spec.algorithms, spec.trials)
        res = run_experiment(sub, write=False)
        for entry in res.summary["trials"]:
            for alg, info in entry["runs"].items():
                if "error" in info:
                    continue
                rows.append({"parameter": name, "value": value, "trial": entry["trial"],
                             "algorithm": alg, "sum_rate": info["sum_rate_nats"],
                             "sum_fisher": info["sum_fisher"], "objective": info["final_objective"],
                             "iterations": info["iterations"], "truncated": info["truncated"]})
    return rows


def _coerce(name: str, value):
    return int(value) if name == "N_t" else float(value)


def sweep_tradeoff(spec: ExperimentSpec) -> list[dict]:
    """Rate/Fisher tradeoff rows ``(omega, sum_rate, sum_fisher, algorithm)``."""
    if spec.sweep is None or spec.sweep.get("parameter") != "omega":
        raise ConfigError("sweep_tradeoff needs a sweep over omega")
    return [{"omega": r["value"], "sum_rate": r["sum_rate"], "sum_fisher": r["sum_fisher"],
             "algorithm": r["algorithm"], "trial": r["trial"], "truncated": r["truncated"]}
            for r in sweep(spec)]


def time_to_threshold(trace: IterationTrace, threshold: float):
    """Wall time at which the objective first reaches ``threshold``.

    Linearly interpolated in time between the bracketing rows; ``None`` if
    the trace never gets there.
    """
    f, t = trace.objectives, trace.elapsed
    hit = np.flatnonzero(f >= threshold)
    if hit.size == 0:
        return None
    i = int(hit[0])
    if i == 0:
        return float(t[0])
    f0, f1 = f[i - 1], f[i]
    frac = (threshold - f0) / (f1 - f0)
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))


def iterations_to_threshold(trace: IterationTrace, threshold: float):
    hit = np.flatnonzero(trace.objectives >= threshold)
    return None if hit.size == 0 else int(trace.iters[hit[0]])


def race_table(traces: dict, fractions=(0.9, 0.95, 0.99)) -> list[dict]:
    """Time and iterations for each algorithm to reach fractions of the best final objective.

    ``traces`` maps algorithm name to trace, all from one instance.
    """
    best = max(tr.final_objective for tr in traces.values())
    rows = []
    for frac in fractions:
        thr = frac * best
        for alg, tr in traces.items():
            rows.append({"algorithm": alg, "fraction": frac, "threshold": thr,
                         "time_s": time_to_threshold(tr, thr),
                         "iterations": iterations_to_threshold(tr, thr)})
    return rows


def run_estimation(ch: ChannelSet, W: np.ndarray, seed: int, trial: int = 0, **grid) -> EstimationReport:
    """Synthesize echoes at the true DoAs under ``W`` and estimate every BS's DoA."""
    obs = synthesize_echo(ch, W, np.random.default_rng(child_seed(seed, trial, "echo")))
    return estimate_theta(obs, ch, **grid)


def rough_report(ch: ChannelSet) -> EstimationReport:
    return EstimationReport.from_estimates(ch.theta_rough, ch.theta_true)


# ---------------------------------------------------------------------------
# serialization
def _fmt(x: float) -> str:
    return repr(float(x))


def write_trace_csv(trace: IterationTrace, path) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_HEADER)
            for r in trace.rows:
                w.writerow([r.iter, _fmt(r.elapsed_s), _fmt(r.objective), _fmt(r.sum_rate), _fmt(r.sum_fisher)])
    except OSError as exc:
        raise OSError(f"cannot write trace {path}: {exc}") from exc


def read_trace_csv(path) -> IterationTrace:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != TRACE_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        trace = IterationTrace()
        for row in reader:
            trace.append(TraceRow(int(row[0]), float(row[1]), float(row[2]), float(row[3]), float(row[4])))
    if trace.rows:
        trace.iterations = trace.rows[-1].iter
    return trace


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_summary_json(summary: dict, path) -> None:
    path = Path(path)
    try:
        path.write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write summary {path}: {exc}") from exc


def write_beamformers_json(W: np.ndarray, path, meta: dict | None = None) -> None:
    """Store ``W`` as interleaved ``[re, im, re, im, ...]`` in C order with its shape."""
    W = np.asarray(W, dtype=np.complex128)
    flat = np.empty(2 * W.size)
    flat[0::2] = W.real.ravel()
    flat[1::2] = W.imag.ravel()
    doc = {"shape": list(W.shape), "layout": "C-order, interleaved real/imag",
           "data": flat.tolist(), "meta": _jsonable(meta or {})}
    Path(path).write_text(json.dumps(doc) + "\n")


def read_beamformers_json(path):
    """Inverse of :func:`write_beamformers_json`; returns ``(W, meta)``."""
    doc = json.loads(Path(path).read_text())
    try:
        shape = tuple(int(s) for s in doc["shape"])
        flat = np.asarray(doc["data"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed beamformer document") from exc
    if flat.size != 2 * int(np.prod(shape)):
        raise ConfigError(f"{path}: data length does not match shape {shape}")
    W = (flat[0::2] + 1j * flat[1::2]).reshape(shape)
    return W, doc.get("meta", {})


def write_estimation_csv(rows: list[dict], path) -> None:
    """Rows of ``algorithm,position,mse,maxse``."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("algorithm", "position", "mse", "maxse"))
        for r in rows:
            w.writerow([r["algorithm"], r["position"], _fmt(r["mse"]), _fmt(r["maxse"])])
