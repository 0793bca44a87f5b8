"""Objective registry: analytic benchmarks, on-model GP samples, costs.

Everything here is a *maximization* problem.  The classic benchmark
functions are minimization problems, so the registry negates them on the
way in and reports can negate again to show "minimal value found".  Each
objective is pure and deterministic; an optional artificial per-
evaluation cost (in seconds) is carried as data and charged by the run
loop's clock, keeping evaluation itself side-effect free.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from gpoo.gp import GpSample, TensorGrid, sample_eval, sample_prior_grid
from gpoo.kernels import KernelSpec


class UnknownObjectiveError(KeyError):
    pass


@dataclass(frozen=True)
class Objective:
    name: str
    lower: np.ndarray
    upper: np.ndarray
    evaluate: Callable
    evaluate_batch: Optional[Callable] = None
    known_best: Optional[float] = None
    known_argmax: Optional[np.ndarray] = None
    cost: float = 0.0
    grid: Optional[TensorGrid] = None

    def __post_init__(self) -> None:
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        up = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != up.shape or np.any(lo >= up):
            raise ValueError("objective domain needs lower < upper per axis")
        if self.cost < 0:
            raise ValueError("evaluation cost must be nonnegative")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def batch(self, X: np.ndarray) -> np.ndarray:
        if self.evaluate_batch is not None:
            return np.asarray(self.evaluate_batch(X), dtype=float)
        return np.array([self.evaluate(x) for x in np.atleast_2d(X)])


def with_cost(obj: Objective, c: float) -> Objective:
    """Same objective, with c seconds charged per evaluation."""
    if c < 0:
        raise ValueError("cost must be nonnegative")
    return replace(obj, cost=float(c))


def restrict_domain(obj: Objective, lower, upper) -> Objective:
    """Same function on a sub-box (optimum metadata kept as-is)."""
    return replace(obj, lower=np.asarray(lower, float),
                   upper=np.asarray(upper, float))


# ---------------------------------------------------------------------------
# Benchmark suite
# ---------------------------------------------------------------------------
# Formulas follow the Virtual Library of Simulation Experiments conventions
# (Surjanovic & Bingham).  Domains and per-benchmark hyperparameters follow
# the hyperparameter table below; where that domain differs from the
# library's canonical one, the table wins.


def _branin(X):
    x1, x2 = X[:, 0], X[:, 1]
    b = 5.1 / (4 * math.pi ** 2)
    c = 5 / math.pi
    t = 1 / (8 * math.pi)
    return ((x2 - b * x1 ** 2 + c * x1 - 6) ** 2
            + 10 * (1 - t) * np.cos(x1) + 10)


def _six_hump_camel(X):
    x1, x2 = X[:, 0], X[:, 1]
    return ((4 - 2.1 * x1 ** 2 + x1 ** 4 / 3) * x1 ** 2
            + x1 * x2 + (-4 + 4 * x2 ** 2) * x2 ** 2)


def _beale(X):
    x1, x2 = X[:, 0], X[:, 1]
    return ((1.5 - x1 + x1 * x2) ** 2
            + (2.25 - x1 + x1 * x2 ** 2) ** 2
            + (2.625 - x1 + x1 * x2 ** 3) ** 2)


def _bohachevsky_a(X):
    x1, x2 = X[:, 0], X[:, 1]
    return (x1 ** 2 + 2 * x2 ** 2 - 0.3 * np.cos(3 * math.pi * x1)
            - 0.4 * np.cos(4 * math.pi * x2) + 0.7)


def _bohachevsky_b(X):
    x1, x2 = X[:, 0], X[:, 1]
    return (x1 ** 2 + 2 * x2 ** 2
            - 0.3 * np.cos(3 * math.pi * x1) * np.cos(4 * math.pi * x2) + 0.3)


def _bohachevsky_c(X):
    x1, x2 = X[:, 0], X[:, 1]
    return (x1 ** 2 + 2 * x2 ** 2
            - 0.3 * np.cos(3 * math.pi * x1 + 4 * math.pi * x2) + 0.3)


def _rosenbrock(X):
    x, y = X[:, 0], X[:, 1]
    return 100 * (y - x ** 2) ** 2 + (1 - x) ** 2


def _ackley(X):
    d = X.shape[1]
    s1 = np.sqrt((X ** 2).sum(axis=1) / d)
    s2 = np.cos(2 * math.pi * X).sum(axis=1) / d
    return -20 * np.exp(-0.2 * s1) - np.exp(s2) + 20 + math.e


_HARTMANN3_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_HARTMANN3_A = np.array(
    [[3.0, 10.0, 30.0], [0.1, 10.0, 35.0], [3.0, 10.0, 30.0], [0.1, 10.0, 35.0]]
)
_HARTMANN3_P = 1e-4 * np.array(
    [[3689.0, 1170.0, 2673.0], [4699.0, 4387.0, 7470.0],
     [1091.0, 8732.0, 5547.0], [381.0, 5743.0, 8828.0]]
)


def _hartmann3(X):
    inner = (_HARTMANN3_A[None] * (X[:, None, :] - _HARTMANN3_P[None]) ** 2)
    return -(_HARTMANN3_ALPHA * np.exp(-inner.sum(axis=2))).sum(axis=1)


def _trid(X):
    return (((X - 1) ** 2).sum(axis=1) - (X[:, 1:] * X[:, :-1]).sum(axis=1))


_SHEKEL_B = 0.1 * np.array([1, 2, 2, 4, 4, 6, 3, 7, 5, 5], dtype=float)
_SHEKEL_C = np.array(
    [[4.0, 1.0, 8.0, 6.0, 3.0, 2.0, 5.0, 8.0, 6.0, 7.0],
     [4.0, 1.0, 8.0, 6.0, 7.0, 9.0, 3.0, 1.0, 2.0, 3.6],
     [4.0, 1.0, 8.0, 6.0, 3.0, 2.0, 5.0, 8.0, 6.0, 7.0],
     [4.0, 1.0, 8.0, 6.0, 7.0, 9.0, 3.0, 1.0, 2.0, 3.6]]
)


def _shekel(X):
    diff2 = ((X[:, :, None] - _SHEKEL_C[None]) ** 2).sum(axis=1)
    return -(1.0 / (diff2 + _SHEKEL_B[None])).sum(axis=1)


def _dixonprice(X):
    d = X.shape[1]
    i = np.arange(2, d + 1)
    return ((X[:, 0] - 1) ** 2
            + (i[None] * (2 * X[:, 1:] ** 2 - X[:, :-1]) ** 2).sum(axis=1))


# Shekel with ten modes: the textbook approximation of the optimum is
# f(4,4,4,4) = -10.5364; the exact interior minimum (frozen from a local
# refinement of the closed form) is marginally lower and just off (4,..).
_SHEKEL_ARGMIN = np.array(
    [4.000746866658956, 3.9995094808675886, 4.000746866997999, 3.9995094822423836]
)
_SHEKEL_MIN = -10.53644315348353

_DIXON_ARGMIN = np.array(
    [2.0 ** (-(2.0 ** i - 2.0) / 2.0 ** i) for i in range(1, 11)]
)


@dataclass(frozen=True)
class BenchmarkEntry:
    """One row of the benchmark hyperparameter table."""

    name: str
    interval: tuple
    dim: int
    lengthscale: float
    beta_ucb: float
    beta_oo: float

    @property
    def lower(self) -> np.ndarray:
        return np.full(self.dim, self.interval[0])

    @property
    def upper(self) -> np.ndarray:
        return np.full(self.dim, self.interval[1])


#: The benchmark hyperparameter table: domain, lengthscale, and the fixed
#: beta values used for GP-UCB and GP-OO on each function.
TABLE1 = {
    "branin": BenchmarkEntry("branin", (-15.0, 15.0), 2, 0.5, 10.0, 100.0),
    "six-hump-camel": BenchmarkEntry("six-hump-camel", (-2.0, 2.0), 2, 0.5, 1.0, 100.0),
    "beale": BenchmarkEntry("beale", (-4.5, 4.5), 2, 1.0, 1.0, 100.0),
    "bohachevsky-a": BenchmarkEntry("bohachevsky-a", (-35.5, 100.0), 2, 1.7, 10.0, 10.0),
    "bohachevsky-b": BenchmarkEntry("bohachevsky-b", (-35.5, 100.0), 2, 1.7, 10.0, 10.0),
    "bohachevsky-c": BenchmarkEntry("bohachevsky-c", (-35.5, 100.0), 2, 1.7, 100.0, 10.0),
    "rosenbrock": BenchmarkEntry("rosenbrock", (-3.0, 3.0), 2, 0.7, 1.0, 100.0),
    "ackley": BenchmarkEntry("ackley", (-12.5, 35.0), 2, 3.5, 10.0, 10.0),
    "hartmann3": BenchmarkEntry("hartmann3", (0.0, 1.0), 3, 0.3, 1.0, 10.0),
    "trid4": BenchmarkEntry("trid4", (-16.0, 16.0), 4, 10.75, 0.1, 100.0),
    "shekel4": BenchmarkEntry("shekel4", (0.0, 10.0), 4, 1.75, 10.0, 10.0),
    "dixonprice10": BenchmarkEntry("dixonprice10", (-10.0, 10.0), 10, 2.0, 1.0, 10.0),
}

# (min_fn, documented minimum value, documented argmin).  Minima are the
# functions' global minima, all of which lie inside the table domains.
_BENCH_FUNCS = {
    "branin": (_branin, 0.39788735772973816, np.array([math.pi, 2.275])),
    "six-hump-camel": (_six_hump_camel, -1.0316284534898774,
                       np.array([0.08984201368301331, -0.7126564032704135])),
    "beale": (_beale, 0.0, np.array([3.0, 0.5])),
    "bohachevsky-a": (_bohachevsky_a, 0.0, np.zeros(2)),
    "bohachevsky-b": (_bohachevsky_b, 0.0, np.zeros(2)),
    "bohachevsky-c": (_bohachevsky_c, 0.0, np.zeros(2)),
    "rosenbrock": (_rosenbrock, 0.0, np.ones(2)),
    "ackley": (_ackley, 0.0, np.zeros(2)),
    "hartmann3": (_hartmann3, -3.862779787332663,
                  np.array([0.11458888122541287, 0.5556488954739371,
                            0.8525469842172746])),
    "trid4": (_trid, -16.0, np.array([4.0, 6.0, 6.0, 4.0])),
    "shekel4": (_shekel, _SHEKEL_MIN, _SHEKEL_ARGMIN),
    "dixonprice10": (_dixonprice, 0.0, _DIXON_ARGMIN),
}

BENCHMARK_NAMES = tuple(TABLE1)


def _canon(name: str) -> str:
    return name.strip().lower().replace("_", "-").replace(" ", "-")


def benchmark_entry(name: str) -> BenchmarkEntry:
    entry = TABLE1.get(_canon(name))
    if entry is None:
        raise UnknownObjectiveError(
            f"unknown benchmark {name!r}; known: {', '.join(BENCHMARK_NAMES)}"
        )
    return entry


def benchmark(name: str) -> Objective:
    """A table benchmark as a maximization objective (function negated)."""
    entry = benchmark_entry(name)
    fn, fmin, argmin = _BENCH_FUNCS[entry.name]

    def evaluate(x, _fn=fn):
        return -float(_fn(np.atleast_2d(np.asarray(x, dtype=float)))[0])

    return Objective(
        name=entry.name,
        lower=entry.lower,
        upper=entry.upper,
        evaluate=evaluate,
        evaluate_batch=lambda X, _fn=fn: -_fn(np.atleast_2d(np.asarray(X, float))),
        known_best=-fmin,
        known_argmax=argmin.copy(),
    )


def subsample_domain(entry: BenchmarkEntry, seed: int) -> tuple:
    """Shrink the domain at random while keeping the optimum inside.

    Per dimension the new lower bound is uniform between the old lower
    bound and the optimum coordinate, and likewise above for the upper
    bound, so the optimizer's location (and value) is unchanged.
    """
    _, _, argmin = _BENCH_FUNCS[entry.name]
    rng = np.random.default_rng(seed)
    lo, up = entry.lower, entry.upper
    new_lo = rng.uniform(lo, argmin)
    new_up = rng.uniform(argmin, up)
    return new_lo, new_up


def function_range(obj: Objective, resolution: int = 101) -> tuple:
    """(min, max) of the objective over a dense regular grid of its domain."""
    if resolution ** obj.dim > 2_000_000:
        raise ValueError("range grid too large; lower the resolution")
    pts = TensorGrid.regular(obj.lower, obj.upper, resolution).points
    vals = obj.batch(pts)
    return float(vals.min()), float(vals.max())


# ---------------------------------------------------------------------------
# On-model objectives (GP samples)
# ---------------------------------------------------------------------------


def _tensor_nearest(grid: TensorGrid, values: np.ndarray) -> Callable:
    """Nearest-grid-point lookup that factorizes across axes.

    Equivalent to scanning the flat grid for the first minimizer of the
    squared distance (sample_eval): the squared distance separates per
    axis, and choosing the lower axis index on exact per-axis ties picks
    the lexicographically smallest — i.e. first — flat minimizer.
    """
    axes = [list(map(float, a)) for a in grid.axes]
    strides = []
    s = 1
    for a in reversed(axes):
        strides.append(s)
        s *= len(a)
    strides.reverse()
    vals = values

    def evaluate(x) -> float:
        flat = 0
        for j, arr in enumerate(axes):
            xj = float(x[j])
            if xj <= arr[0]:
                pick = 0
            elif xj >= arr[-1]:
                pick = len(arr) - 1
            else:
                i = bisect_left(arr, xj)
                dlo = xj - arr[i - 1]
                dhi = arr[i] - xj
                # compare squares, as the flat scan does
                pick = i - 1 if dlo * dlo <= dhi * dhi else i
            flat += pick * strides[j]
        return float(vals[flat])

    return evaluate


def on_model_objective(spec: KernelSpec, lower, upper, resolution: int,
                       seed: int) -> Objective:
    """A GP prior draw on a regular grid, extended by nearest neighbor.

    The optimum is the exact grid maximum, so regret is well-defined.
    The grid is kept on the objective for schedules that count grid
    points per cell.
    """
    grid = TensorGrid.regular(lower, upper, resolution)
    sample = sample_prior_grid(spec, grid.points, seed)
    best_idx = int(np.argmax(sample.values))
    evaluate = _tensor_nearest(grid, sample.values)

    return Objective(
        name=f"on-model-{spec.family}-r{resolution}-s{seed}",
        lower=grid.lower,
        upper=grid.upper,
        evaluate=evaluate,
        known_best=float(sample.values[best_idx]),
        known_argmax=sample.grid[best_idx].copy(),
        grid=grid,
    )
