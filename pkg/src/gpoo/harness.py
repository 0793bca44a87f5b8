"""Experiment orchestration: configs, seeded runs, aggregation, file output.

A single flat config document describes one experiment (optimizer,
objective, kernel, budget, clock, ...).  ``run_experiment`` executes it
across seeds and writes per-run trace CSVs plus aggregate regret curves;
``sweep_costs`` re-times the same trajectories under different per-
evaluation costs, which is exact because trajectories never depend on
the clock.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - python < 3.11
    import tomli as tomllib

from gpoo.baselines import UcbConfig, run_gpucb, run_random
from gpoo.clock import NS, OverheadModel, make_clock
from gpoo.engine import BetaSchedule, grid_cell_counter, run_gpoo
from gpoo.gp import TensorGrid
from gpoo.kernels import KernelSpec
from gpoo.objectives import (
    Objective,
    benchmark,
    on_model_objective,
    restrict_domain,
    with_cost,
)
from gpoo.partition import PartitionScheme
from gpoo.records import RunResult, write_trace_csv, read_trace_csv

ENV_OUT = "GPOO_OUT"
OPTIMIZERS = ("gpoo", "gpucb", "random")
DEFAULT_SWEEP_COSTS = (0.01, 0.1, 1.0, 10.0)
AGGREGATE_HEADER = ("optimizer", "objective", "stat", "x_axis", "x", "value")
_QUANTILES = (("median", 0.5), ("q25", 0.25), ("q75", 0.75))
N_TIME_CHECKPOINTS = 64


class ConfigError(ValueError):
    """Invalid or unresolvable experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment, flat and fully explicit.

    ``objective`` is a benchmark registry name or the literal
    ``"on-model"`` (a GP prior draw; requires ``lower``/``upper`` and
    draws a fresh sample per run seed).  ``lower``/``upper`` on a
    benchmark restrict its domain instead.
    """

    optimizer: str = "gpoo"
    objective: str = "on-model"
    budget: int = 100
    seeds: tuple = (0,)
    # domain / on-model sample
    lower: Optional[tuple] = None
    upper: Optional[tuple] = None
    objective_resolution: int = 21
    objective_seed_offset: int = 100
    # kernel
    kernel_family: str = "se"
    kernel_lengthscale: float = 0.1
    kernel_variance: float = 1.0
    kernel_nu: Optional[float] = None
    kernel_shape: Optional[float] = None
    kernel_bias: Optional[float] = None
    kernel_exponent: Optional[float] = None
    # search
    epsilon: float = 0.01
    beta_mode: str = "experiment"
    beta_fixed: Optional[float] = None
    partition_mode: str = "regular"
    partition_resolution: int = 9
    # gp-ucb
    ucb_resolution: int = 11
    ucb_noise: float = 0.001
    ucb_beta_count: int = 1
    ucb_beta_fixed: Optional[float] = None
    # timing
    cost: float = 0.0
    clock: str = "virtual"
    out: Optional[str] = None
    overhead_gpoo_step: float = 2.5e-4
    overhead_gpucb_base: float = 0.25
    overhead_gpucb_cubic: float = 1e-9
    overhead_random_eval: float = 1e-5

    def __post_init__(self) -> None:
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.optimizer!r}; "
                              f"expected one of {OPTIMIZERS}")
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds:
            raise ConfigError("seeds must be nonempty")
        object.__setattr__(self, "seeds", seeds)
        for key in ("lower", "upper"):
            v = getattr(self, key)
            if v is not None:
                object.__setattr__(self, key, tuple(float(x) for x in v))
        if (self.lower is None) != (self.upper is None):
            raise ConfigError("lower and upper must be given together")
        if self.objective == "on-model" and self.lower is None:
            raise ConfigError("on-model objectives need lower and upper")
        if self.clock not in ("virtual", "real"):
            raise ConfigError(f"unknown clock mode {self.clock!r}")
        if self.beta_mode not in ("theory", "experiment", "fixed"):
            raise ConfigError(f"unknown beta mode {self.beta_mode!r}")
        if self.beta_mode == "fixed" and self.beta_fixed is None:
            raise ConfigError("beta_mode = 'fixed' needs beta_fixed")
        if not 0 < self.epsilon < 1:
            raise ConfigError("epsilon must lie in (0, 1)")
        if self.cost < 0:
            raise ConfigError("cost must be nonnegative")
        try:
            self.kernel_spec()
        except Exception as exc:
            raise ConfigError(f"bad kernel: {exc}") from exc

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        return cls(**raw)

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def config_hash(self) -> str:
        # identifies the experiment; where its files land is not part of it
        payload = {k: v for k, v in self.to_dict().items() if k != "out"}
        blob = json.dumps(payload, sort_keys=True,
                          separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def kernel_spec(self) -> KernelSpec:
        cfg = {"family": self.kernel_family,
               "lengthscale": self.kernel_lengthscale,
               "variance": self.kernel_variance}
        for key in ("nu", "shape", "bias", "exponent"):
            v = getattr(self, f"kernel_{key}")
            if v is not None:
                cfg[key] = v
        return KernelSpec.from_config(cfg)

    def overhead_model(self) -> OverheadModel:
        return OverheadModel(
            gpoo_step=self.overhead_gpoo_step,
            gpucb_base=self.overhead_gpucb_base,
            gpucb_cubic=self.overhead_gpucb_cubic,
            random_eval=self.overhead_random_eval,
        )

    def partition_scheme(self) -> PartitionScheme:
        return PartitionScheme(mode=self.partition_mode,
                               resolution=self.partition_resolution)


def resolve_objective(config: ExperimentConfig, seed: int) -> Objective:
    """The objective one run sees (on-model samples are per-seed)."""
    if config.objective == "on-model":
        obj = on_model_objective(
            config.kernel_spec(), config.lower, config.upper,
            config.objective_resolution,
            seed=config.objective_seed_offset + seed,
        )
    else:
        obj = benchmark(config.objective)
        if config.lower is not None:
            obj = restrict_domain(obj, config.lower, config.upper)
    return with_cost(obj, config.cost)


def execute_run(config: ExperimentConfig, seed: int) -> RunResult:
    """One (optimizer, seed) run under the config's clock and cost."""
    objective = resolve_objective(config, seed)
    clock = make_clock(config.clock)
    overhead = config.overhead_model()
    if config.optimizer == "random":
        result = run_random(None, objective, seed, config.budget,
                            clock=clock, overhead=overhead)
    elif config.optimizer == "gpucb":
        grid = TensorGrid.regular(objective.lower, objective.upper,
                                  config.ucb_resolution).points
        ucb = UcbConfig(grid=grid, epsilon=config.epsilon,
                        noise=config.ucb_noise,
                        beta_count=config.ucb_beta_count,
                        beta_fixed=config.ucb_beta_fixed)
        result = run_gpucb(None, objective, config.kernel_spec(), ucb,
                           config.budget, clock=clock, overhead=overhead,
                           seed=seed)
    else:
        if config.beta_mode == "fixed":
            schedule = BetaSchedule.fixed(config.beta_fixed)
        else:
            counter = None
            if config.beta_mode == "theory" and objective.grid is not None:
                # Union bound over the finite sample grid: count the grid
                # points each cell owns.
                counter = grid_cell_counter(objective.grid, objective.upper)
            schedule = BetaSchedule(budget=config.budget,
                                    epsilon=config.epsilon,
                                    mode=config.beta_mode,
                                    cell_count=counter)
        result = run_gpoo(None, objective, config.kernel_spec(), schedule,
                          config.partition_scheme(), config.budget,
                          clock=clock, overhead=overhead, seed=seed)
    result.meta["config_hash"] = config.config_hash()
    return result


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


def _regret_matrix(runs) -> np.ndarray:
    n = min(r.n_evals for r in runs)
    M = np.vstack([r.simple_regrets()[:n] for r in runs])
    if np.isnan(M).any():
        raise ValueError("cannot aggregate regret: some runs lack f*")
    return M


def _regret_at_times(run: RunResult, ts_ns: np.ndarray) -> np.ndarray:
    elapsed = run.elapsed_ns()
    regret = run.simple_regrets()
    idx = np.searchsorted(elapsed, ts_ns, side="right") - 1
    return regret[np.clip(idx, 0, None)]


def time_checkpoints(runs, n: int = N_TIME_CHECKPOINTS) -> np.ndarray:
    """Log-spaced times (ns) within the window covered by every run."""
    lo = max(r.records[0].elapsed_ns for r in runs)
    hi = min(r.records[-1].elapsed_ns for r in runs)
    lo = max(lo, 1)
    if hi <= lo:
        return np.array([float(hi)])
    return np.geomspace(float(lo), float(hi), n)


def aggregate_rows(groups, axes=("evals", "seconds")) -> list:
    """Quantile regret curves as ``(optimizer, objective, stat, x_axis, x,
    value)`` tuples.

    ``groups`` is a list of ``(optimizer, objective_label, runs)``.  The
    time axis uses one set of checkpoints shared by every group so curves
    are comparable at matched times.
    """
    rows = []
    if "evals" in axes:
        for opt, label, runs in groups:
            M = _regret_matrix(runs)
            for stat, q in _QUANTILES:
                curve = np.quantile(M, q, axis=0)
                rows += [(opt, label, stat, "evals", float(i + 1), float(v))
                         for i, v in enumerate(curve)]
    if "seconds" in axes:
        all_runs = [r for _, _, runs in groups for r in runs]
        ts = time_checkpoints(all_runs)
        for opt, label, runs in groups:
            M = np.vstack([_regret_at_times(r, ts) for r in runs])
            if np.isnan(M).any():
                raise ValueError("cannot aggregate regret: some runs lack f*")
            for stat, q in _QUANTILES:
                curve = np.quantile(M, q, axis=0)
                rows += [(opt, label, stat, "seconds", float(t / NS), float(v))
                         for t, v in zip(ts, curve)]
    return rows


def write_aggregate_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(AGGREGATE_HEADER) + "\n")
        for opt, label, stat, axis, x, value in rows:
            x_txt = str(int(x)) if axis == "evals" else repr(float(x))
            fh.write(f"{opt},{label},{stat},{axis},{x_txt},{repr(float(value))}\n")


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", name)


def resolve_out(config: ExperimentConfig, out_dir=None) -> Path:
    path = Path(out_dir or config.out or os.environ.get(ENV_OUT) or "results")
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# Experiment drivers
# ---------------------------------------------------------------------------


@dataclass
class ExperimentOutcome:
    results: list
    failures: list
    out_dir: Optional[Path] = None
    files: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)

    def exit_code(self) -> int:
        return 1 if self.failures else 0


def _run_meta(result: RunResult, config: ExperimentConfig, seed: int) -> dict:
    return {
        "optimizer": result.optimizer,
        "objective": result.objective,
        "seed": seed,
        "config_hash": config.config_hash(),
        "f_star": result.f_star,
        "truncated": result.truncated,
        "n_evals": result.n_evals,
        "best_value": result.best_value,
        "timing": result.timing.as_dict(),
        "meta": {k: v for k, v in result.meta.items()},
    }


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_run_files(out: Path, config: ExperimentConfig, seed: int,
                     result: RunResult) -> Path:
    traces = out / "traces"
    traces.mkdir(exist_ok=True)
    stem = f"{result.optimizer}-{_slug(config.objective)}-seed{seed}"
    trace_path = traces / f"{stem}.csv"
    write_trace_csv(trace_path, result.records)
    _write_json(traces / f"{stem}.meta.json", _run_meta(result, config, seed))
    return trace_path


def run_experiment(config: ExperimentConfig, out_dir=None) -> ExperimentOutcome:
    """Run config.optimizer across config.seeds and write the file set.

    Per-seed failures are recorded and do not abort sibling runs.  Output:
    per-run trace CSVs (+ JSON sidecars), aggregate.csv with median/
    quartile regret vs evaluations and vs elapsed time, timing.json, and
    config.json (the exact resolved config plus its hash).
    """
    out = resolve_out(config, out_dir)
    results, failures = [], []
    for seed in config.seeds:
        try:
            results.append((seed, execute_run(config, seed)))
        except Exception as exc:  # isolated per seed
            failures.append({"seed": seed, "error": repr(exc)})

    files = {"config": out / "config.json"}
    # the echo omits the destination so the tree stays relocatable and
    # byte-identical wherever it is written
    _write_json(files["config"],
                {"config": {**config.to_dict(), "out": None},
                 "hash": config.config_hash(),
                 "failures": failures})
    rows = []
    if results:
        for seed, result in results:
            files[f"trace-{seed}"] = _write_run_files(out, config, seed, result)
        runs = [r for _, r in results]
        rows = aggregate_rows([(config.optimizer, config.objective, runs)])
        files["aggregate"] = out / "aggregate.csv"
        write_aggregate_csv(files["aggregate"], rows)
        files["timing"] = out / "timing.json"
        _write_json(files["timing"], {
            "config_hash": config.config_hash(),
            "runs": [{"seed": seed, "optimizer": r.optimizer,
                      **r.timing.as_dict()} for seed, r in results],
        })
    return ExperimentOutcome([r for _, r in results], failures, out, files,
                             rows)


def load_runs(out_dir) -> list:
    """Rebuild RunResults from an output directory's trace files."""
    out = Path(out_dir)
    results = []
    for trace in sorted((out / "traces").glob("*.csv")):
        meta = json.loads((trace.parent / (trace.stem + ".meta.json")).read_text())
        results.append(RunResult(
            optimizer=meta["optimizer"],
            objective=meta["objective"],
            seed=meta["seed"],
            records=read_trace_csv(trace),
            f_star=meta["f_star"],
            truncated=meta["truncated"],
            meta=meta.get("meta", {}),
        ))
    return results


def reaggregate(out_dir, objective_label: str) -> list:
    """Aggregate rows recomputed purely from the on-disk trace files."""
    by_opt = {}
    for run in load_runs(out_dir):
        by_opt.setdefault(run.optimizer, []).append(run)
    groups = [(opt, objective_label, runs)
              for opt, runs in sorted(by_opt.items())]
    return aggregate_rows(groups)


# ---------------------------------------------------------------------------
# Cost sweep
# ---------------------------------------------------------------------------


def retime_records(records, cost: float) -> list:
    """Records with elapsed time rebuilt for a different evaluation cost.

    Exact, not approximate: in virtual mode elapsed time is by
    construction the running sum of per-record overhead plus cost, and
    trajectories never consult the clock.
    """
    cost_ns = int(round(cost * NS))
    t = 0
    out = []
    for r in records:
        t += r.overhead_ns + cost_ns
        out.append(replace(r, elapsed_ns=t))
    return out


def retime_run(run: RunResult, cost: float) -> RunResult:
    return replace(run, records=retime_records(run.records, cost))


def sweep_costs(config: ExperimentConfig, costs=DEFAULT_SWEEP_COSTS,
                out_dir=None) -> ExperimentOutcome:
    """Regret-vs-time aggregates for all three optimizers per cost level.

    Each (optimizer, seed) trajectory is computed once at cost 0 and
    re-timed per cost level.  Virtual clock only.
    """
    if config.clock != "virtual":
        raise ConfigError("sweep_costs requires the virtual clock")
    base = replace(config, cost=0.0)
    groups, failures = [], []
    all_results = []
    for opt in OPTIMIZERS:
        cfg = replace(base, optimizer=opt)
        runs = []
        for seed in config.seeds:
            try:
                runs.append((seed, execute_run(cfg, seed)))
            except Exception as exc:
                failures.append({"optimizer": opt, "seed": seed,
                                 "error": repr(exc)})
        if runs:
            groups.append((opt, cfg, runs))
            all_results.extend(r for _, r in runs)

    out = resolve_out(config, out_dir)
    files = {}
    per_cost_rows = {}
    if groups:
        for opt, cfg, runs in groups:
            for seed, result in runs:
                _write_run_files(out, cfg, seed, result)
        for c in costs:
            retimed = [(opt, config.objective,
                        [retime_run(r, c) for _, r in runs])
                       for opt, cfg, runs in groups]
            rows = aggregate_rows(retimed, axes=("seconds",))
            path = out / f"sweep-cost-{c}.csv"
            write_aggregate_csv(path, rows)
            files[f"cost-{c}"] = path
            per_cost_rows[float(c)] = rows
    _write_json(out / "sweep.json", {
        "config_hash": config.config_hash(),
        "costs": [float(c) for c in costs],
        "failures": failures,
        "files": {k: str(v.relative_to(out)) for k, v in files.items()},
    })
    files["meta"] = out / "sweep.json"
    outcome = ExperimentOutcome(all_results, failures, out, files)
    outcome.rows = per_cost_rows
    return outcome
