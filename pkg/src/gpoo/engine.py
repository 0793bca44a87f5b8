"""The optimistic-optimization search loop.

Best-first search over a binary partition tree of the domain: repeatedly
pop the leaf with the highest upper bound U, split its cell, evaluate
the objective at both child centers, push the children.  The upper bound
U = f(center) + exploration term comes from a pluggable strategy:

* generic OO: the exploration term is a depth-indexed diameter schedule
  delta(t);
* the kernel-driven variant: beta_n^{1/2} * Delta(cell), where Delta is
  the cell's canonical-metric radius and beta_n a confidence factor, so
  U is (with probability 1-epsilon) a true upper bound on f inside the
  cell and the incumbent's regret is controlled per step.

Budget counts objective evaluations.  The root center is evaluated once
before the loop so the incumbent exists from the first record; each step
then adds exactly two evaluations, so a run ends with N or N+1 of them.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from gpoo.clock import OverheadModel, VirtualClock, make_clock
from gpoo.gp import TensorGrid
from gpoo.kernels import KernelSpec
from gpoo.objectives import Objective
from gpoo.partition import (
    Cell,
    DegenerateCellError,
    PartitionScheme,
    cell_diameter,
    root_cell,
    split_cell,
    split_regular,
)
from gpoo.records import Expansion, RunResult, TimingBreakdown, TraceLog

THEORY = "theory"
EXPERIMENT = "experiment"
FIXED = "fixed"


class ObjectiveEvaluationError(RuntimeError):
    """The objective raised; carries the offending point."""

    def __init__(self, point, cause):
        super().__init__(f"objective evaluation failed at {tuple(point)}: {cause}")
        self.point = tuple(float(c) for c in np.asarray(point).ravel())


@dataclass(frozen=True)
class BetaSchedule:
    """Confidence factor beta_n for the cell upper bounds.

    theory mode:      beta = 2 log(2 |X_n| N / eps)
    experiment mode:  beta = 2 log(|X_n| N / (2 eps))
    fixed mode:       beta = fixed_value (per-benchmark table overrides)

    |X_n| is the cell's discretization count, supplied by ``cell_count``
    (floored at 1); by default every cell counts 1, which is how the
    experiment-mode runs are configured.
    """

    budget: int
    epsilon: float = 0.01
    mode: str = EXPERIMENT
    cell_count: Optional[Callable] = None
    fixed_value: Optional[float] = None

    def __post_init__(self) -> None:
        if self.mode not in (THEORY, EXPERIMENT, FIXED):
            raise ValueError(f"unknown beta mode: {self.mode!r}")
        if self.mode == FIXED:
            if self.fixed_value is None or not self.fixed_value > 0:
                raise ValueError("fixed beta mode needs a positive value")
        else:
            if not 0 < self.epsilon < 1:
                raise ValueError("epsilon must lie in (0, 1)")
            if self.budget < 1:
                raise ValueError("budget must be >= 1")

    @classmethod
    def theory(cls, budget, epsilon=0.01, cell_count=None):
        return cls(budget=budget, epsilon=epsilon, mode=THEORY,
                   cell_count=cell_count)

    @classmethod
    def experiment(cls, budget, epsilon=0.01, cell_count=None):
        return cls(budget=budget, epsilon=epsilon, mode=EXPERIMENT,
                   cell_count=cell_count)

    @classmethod
    def fixed(cls, value):
        return cls(budget=1, mode=FIXED, fixed_value=float(value))


def beta_n(schedule: BetaSchedule, cell: Cell) -> float:
    if schedule.mode == FIXED:
        return schedule.fixed_value
    count = 1
    if schedule.cell_count is not None:
        count = max(int(schedule.cell_count(cell)), 1)
    if schedule.mode == THEORY:
        return 2.0 * math.log(2.0 * count * schedule.budget / schedule.epsilon)
    return 2.0 * math.log(count * schedule.budget / (2.0 * schedule.epsilon))


def grid_cell_counter(grid: TensorGrid, root_upper) -> Callable:
    """|X_n| as the number of grid points the cell owns (see TensorGrid)."""
    upper = np.asarray(root_upper, dtype=float)
    return lambda cell: grid.count_in_box(cell.lower, cell.upper, upper)


@dataclass(frozen=True)
class DiameterSchedule:
    """Depth-indexed exploration widths delta(t) for generic OO."""

    fn: Callable

    def __call__(self, depth: int) -> float:
        v = float(self.fn(depth))
        if v < 0:
            raise ValueError(f"delta({depth}) = {v} is negative")
        return v

    @classmethod
    def geometric(cls, initial: float, factor: float) -> "DiameterSchedule":
        if not 0 < factor <= 1:
            raise ValueError("factor must lie in (0, 1] to be nonincreasing")
        return cls(lambda t: initial * factor ** t)


class GpooUtility:
    """Exploration term beta_n(cell)^{1/2} * Delta(cell)."""

    needs_diameters = True

    def __init__(self, schedule: BetaSchedule):
        self.schedule = schedule

    def exploration(self, cell: Cell) -> tuple:
        if cell.delta is None:
            raise ValueError("cell has no cached diameter; kernel required")
        beta = beta_n(self.schedule, cell)
        return math.sqrt(beta) * cell.delta, beta


class ScheduleUtility:
    """Exploration term delta(depth) from a fixed diameter schedule."""

    needs_diameters = False

    def __init__(self, schedule: DiameterSchedule):
        self.schedule = schedule

    def exploration(self, cell: Cell) -> tuple:
        return self.schedule(cell.depth), None


@dataclass(frozen=True)
class TreeNode:
    cell: Cell
    f_center: float
    utility: float
    eval_index: int
    beta: Optional[float] = None


class SearchTree:
    """Run state: the leaf priority queue plus trace and timing.

    The heap is a max-queue on (U, depth, lowest node id): among equal
    upper bounds the deeper node is expanded first, which biases toward
    refinement; remaining ties go to the lower node id.  Leaves' cells
    tile the domain exactly at every point in the run.
    """

    def __init__(self, spec: Optional[KernelSpec], log: TraceLog, clock):
        self.spec = spec
        self.log = log
        self.clock = clock
        self.heap: list = []
        self.expansions: list = []
        self.n_evals = 0
        self.truncated = False
        self.timing = TimingBreakdown()

    def push(self, node: TreeNode) -> None:
        # (depth, index) is unique per node, so the key never compares nodes
        heapq.heappush(
            self.heap,
            (-node.utility, -node.cell.depth, node.cell.index, node),
        )

    def pop(self) -> TreeNode:
        return heapq.heappop(self.heap)[3]


def _evaluate(objective: Objective, point, clock, timing, real: bool):
    t0 = time.perf_counter_ns() if real else 0
    try:
        y = objective.evaluate(point)
    except Exception as exc:
        raise ObjectiveEvaluationError(point, exc) from exc
    clock.charge_cost(objective.cost)
    if real:
        timing.objective_ns += time.perf_counter_ns() - t0
    return y


def oo_step(tree: SearchTree, objective: Objective, scheme: PartitionScheme,
            explore, step_overhead_ns: int = 0) -> tuple:
    """Expand the best leaf: split, evaluate both child centers, push.

    Exactly two objective evaluations.  Returns the expanded node and the
    two children.  A cell too degenerate to split ends the run gracefully
    (``tree.truncated``) and returns None.
    """
    real = tree.clock.mode == "real"
    t0 = time.perf_counter_ns() if real else 0
    node = tree.pop()
    if real:
        tree.timing.queue_ns += time.perf_counter_ns() - t0
    tree.expansions.append(Expansion(
        order=len(tree.expansions),
        node_id=node.cell.node_id,
        depth=node.cell.depth,
        f_center=node.f_center,
        delta=node.cell.delta,
        beta=node.beta,
        utility=node.utility,
    ))

    t1 = time.perf_counter_ns() if real else 0
    try:
        if tree.spec is None:
            children = split_regular(node.cell)
        else:
            children = split_cell(node.cell, tree.spec, scheme)
    except DegenerateCellError:
        tree.truncated = True
        return node, None
    if real:
        tree.timing.partition_ns += time.perf_counter_ns() - t1

    shares = (step_overhead_ns // 2, step_overhead_ns - step_overhead_ns // 2)
    out = []
    for child, share in zip(children, shares):
        tree.clock.advance_ns(share)
        y = _evaluate(objective, child.center, tree.clock, tree.timing, real)
        term, beta = explore.exploration(child)
        child_node = TreeNode(cell=child, f_center=y, utility=y + term,
                              eval_index=tree.n_evals + 1, beta=beta)
        tree.n_evals += 1
        tree.log.append(
            step=tree.n_evals, point=child.center, f_value=y,
            elapsed_ns=tree.clock.now_ns(), delta=child.delta, beta=beta,
            utility=child_node.utility, overhead_ns=share,
        )
        t2 = time.perf_counter_ns() if real else 0
        tree.push(child_node)
        if real:
            tree.timing.queue_ns += time.perf_counter_ns() - t2
        out.append(child_node)
    return node, tuple(out)


def run_gpoo(domain, objective: Objective, spec: KernelSpec,
             schedule: BetaSchedule, scheme: Optional[PartitionScheme] = None,
             budget: int = 100, *, clock=None, overhead: Optional[OverheadModel] = None,
             seed: Optional[int] = None) -> RunResult:
    """Kernel-driven optimistic optimization for ``budget`` evaluations."""
    explore = GpooUtility(schedule)
    return _run_tree(domain, objective, spec, explore,
                     scheme or PartitionScheme(), budget, clock=clock,
                     overhead=overhead, seed=seed, optimizer="gpoo")


def run_oo(domain, objective: Objective, delta_schedule: DiameterSchedule,
           budget: int = 100, *, spec: Optional[KernelSpec] = None,
           scheme: Optional[PartitionScheme] = None, clock=None,
           overhead: Optional[OverheadModel] = None,
           seed: Optional[int] = None) -> RunResult:
    """Generic OO with an explicit diameter schedule delta(t)."""
    explore = ScheduleUtility(delta_schedule)
    return _run_tree(domain, objective, spec, explore,
                     scheme or PartitionScheme(), budget, clock=clock,
                     overhead=overhead, seed=seed, optimizer="oo")


def _run_tree(domain, objective, spec, explore, scheme, budget, *, clock,
              overhead, seed, optimizer) -> RunResult:
    if budget < 1:
        raise ValueError("budget must be >= 1")
    lower, upper = _domain_bounds(domain, objective)
    if not np.all(upper > lower):
        raise ValueError("domain must have positive extent in every dimension")
    clock = clock or VirtualClock()
    overhead = overhead or OverheadModel()
    real = clock.mode == "real"
    log = TraceLog(objective.known_best)
    tree = SearchTree(spec, log, clock)

    root = root_cell(lower, upper)
    if explore.needs_diameters:
        from gpoo.partition import with_delta

        t0 = time.perf_counter_ns() if real else 0
        root = with_delta(root, cell_diameter(root, spec, scheme))
        if real:
            tree.timing.partition_ns += time.perf_counter_ns() - t0
    y0 = _evaluate(objective, root.center, clock, tree.timing, real)
    term0, beta0 = explore.exploration(root)
    root_node = TreeNode(cell=root, f_center=y0, utility=y0 + term0,
                         eval_index=1, beta=beta0)
    tree.n_evals = 1
    log.append(step=1, point=root.center, f_value=y0,
               elapsed_ns=clock.now_ns(), delta=root.delta, beta=beta0,
               utility=root_node.utility, overhead_ns=0)
    tree.push(root_node)

    step_ns = 0 if real else overhead.gpoo_step_ns()
    while tree.n_evals < budget and not tree.truncated:
        oo_step(tree, objective, scheme, explore, step_overhead_ns=step_ns)

    tree.timing.total_ns = clock.now_ns()
    return RunResult(
        optimizer=optimizer,
        objective=objective.name,
        seed=seed,
        records=log.records,
        expansions=tree.expansions,
        f_star=objective.known_best,
        truncated=tree.truncated,
        timing=tree.timing,
        meta={"budget": budget, "clock": clock.mode},
    )


def _domain_bounds(domain, objective: Objective) -> tuple:
    if domain is None:
        return objective.lower, objective.upper
    lower, upper = domain
    return (np.atleast_1d(np.asarray(lower, dtype=float)),
            np.atleast_1d(np.asarray(upper, dtype=float)))
