"""Run traces: per-evaluation records, regret computation, CSV round trip.

Every optimizer emits the same trace schema so runs are directly
comparable and plottable together:

    step,eval_x...,f_value,delta,beta,utility,best_value,simple_regret,cum_regret,elapsed_ns

Fields an optimizer has no value for (e.g. delta for random search) stay
blank.  Numbers are written with repr so parsing the CSV back recovers
them bit-for-bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np


class DataIntegrityError(ValueError):
    """An observed value contradicts the objective's known optimum."""


@dataclass(frozen=True)
class RunRecord:
    """One objective evaluation.

    ``overhead_ns`` is the evaluation's share of modeled/measured engine
    time excluding the artificial evaluation cost; it is bookkeeping for
    cost re-timing and does not appear in the CSV (``elapsed_ns`` does).
    """

    step: int
    point: tuple
    f_value: float
    delta: Optional[float]
    beta: Optional[float]
    utility: Optional[float]
    best_value: float
    simple_regret: Optional[float]
    cum_regret: Optional[float]
    elapsed_ns: int
    overhead_ns: int = 0


@dataclass
class TimingBreakdown:
    """Per-run wall-clock totals by phase, in nanoseconds."""

    objective_ns: int = 0
    posterior_ns: int = 0
    acquisition_ns: int = 0
    partition_ns: int = 0
    queue_ns: int = 0
    total_ns: int = 0

    def components_sum(self) -> int:
        return (self.objective_ns + self.posterior_ns + self.acquisition_ns
                + self.partition_ns + self.queue_ns)

    def as_dict(self) -> dict:
        return {
            "objective_ns": self.objective_ns,
            "posterior_ns": self.posterior_ns,
            "acquisition_ns": self.acquisition_ns,
            "partition_ns": self.partition_ns,
            "queue_ns": self.queue_ns,
            "total_ns": self.total_ns,
        }


@dataclass(frozen=True)
class Expansion:
    """One popped (expanded) tree node of an optimistic-optimization run."""

    order: int
    node_id: tuple
    depth: int
    f_center: float
    delta: float
    beta: Optional[float]
    utility: float


@dataclass
class RunResult:
    """Everything one optimizer run produces."""

    optimizer: str
    objective: str
    seed: Optional[int]
    records: list
    expansions: list = field(default_factory=list)
    f_star: Optional[float] = None
    truncated: bool = False
    timing: TimingBreakdown = field(default_factory=TimingBreakdown)
    meta: dict = field(default_factory=dict)

    @property
    def n_evals(self) -> int:
        return len(self.records)

    @property
    def best_value(self) -> float:
        return self.records[-1].best_value

    def values(self) -> np.ndarray:
        return np.array([r.f_value for r in self.records])

    def simple_regrets(self) -> np.ndarray:
        return np.array(
            [np.nan if r.simple_regret is None else r.simple_regret
             for r in self.records]
        )

    def elapsed_ns(self) -> np.ndarray:
        return np.array([r.elapsed_ns for r in self.records], dtype=np.int64)


class TraceLog:
    """Incremental trace builder shared by all optimizers.

    Tracks the incumbent and regret sums as evaluations stream in; the
    regret invariants (simple regret = f* - best so far, cumulative
    regret = sum of per-evaluation gaps) hold by construction.
    """

    def __init__(self, f_star: Optional[float] = None):
        self.f_star = f_star
        self.records: list = []
        self._best = -np.inf
        self._cum = 0.0

    def append(self, *, step, point, f_value, elapsed_ns, delta=None,
               beta=None, utility=None, overhead_ns=0) -> RunRecord:
        if self.f_star is not None and f_value > self.f_star + 1e-9:
            raise DataIntegrityError(
                f"observed value {f_value!r} exceeds the known optimum "
                f"{self.f_star!r} at {tuple(point)}"
            )
        self._best = max(self._best, f_value)
        simple = cum = None
        if self.f_star is not None:
            self._cum += self.f_star - f_value
            simple = self.f_star - self._best
            cum = self._cum
        rec = RunRecord(
            step=int(step),
            point=tuple(float(c) for c in np.asarray(point).ravel()),
            f_value=float(f_value),
            delta=None if delta is None else float(delta),
            beta=None if beta is None else float(beta),
            utility=None if utility is None else float(utility),
            best_value=float(self._best),
            simple_regret=simple,
            cum_regret=cum,
            elapsed_ns=int(elapsed_ns),
            overhead_ns=int(overhead_ns),
        )
        self.records.append(rec)
        return rec


def compute_regret(records: list, f_star: float) -> list:
    """Recompute both regret columns of a finished trace against f*.

    simple_regret_n = f* - best of the first n values;
    cum_regret_n = sum over the first n values of (f* - value).
    """
    if not np.isfinite(f_star):
        raise ValueError("f_star must be finite")
    out = []
    best = -np.inf
    cum = 0.0
    for rec in records:
        if rec.f_value > f_star + 1e-9:
            raise DataIntegrityError(
                f"trace value {rec.f_value!r} exceeds f*={f_star!r}"
            )
        best = max(best, rec.f_value)
        cum += f_star - rec.f_value
        out.append(replace(rec, best_value=best,
                           simple_regret=f_star - best, cum_regret=cum))
    return out


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------


def trace_header(dim: int) -> list:
    return (["step"] + [f"eval_x{j}" for j in range(dim)]
            + ["f_value", "delta", "beta", "utility", "best_value",
               "simple_regret", "cum_regret", "elapsed_ns"])


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def trace_rows(records: list):
    for r in records:
        yield ([str(r.step)] + [repr(c) for c in r.point]
               + [repr(r.f_value), _fmt(r.delta), _fmt(r.beta),
                  _fmt(r.utility), repr(r.best_value), _fmt(r.simple_regret),
                  _fmt(r.cum_regret), str(r.elapsed_ns)])


def write_trace_csv(path, records: list) -> None:
    if not records:
        raise ValueError("cannot write an empty trace")
    dim = len(records[0].point)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(trace_header(dim))
        writer.writerows(trace_rows(records))


def read_trace_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        dim = sum(1 for c in header if c.startswith("eval_x"))
        out = []
        for row in reader:
            vals = dict(zip(header, row))
            opt = lambda k: None if vals[k] == "" else float(vals[k])
            out.append(RunRecord(
                step=int(vals["step"]),
                point=tuple(float(vals[f"eval_x{j}"]) for j in range(dim)),
                f_value=float(vals["f_value"]),
                delta=opt("delta"),
                beta=opt("beta"),
                utility=opt("utility"),
                best_value=float(vals["best_value"]),
                simple_regret=opt("simple_regret"),
                cum_regret=opt("cum_regret"),
                elapsed_ns=int(vals["elapsed_ns"]),
            ))
    return out
