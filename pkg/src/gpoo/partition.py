"""Hierarchical axis-aligned partitioning of the search domain.

Cells are immutable axis-aligned boxes arranged in a binary tree: node
(t, i) has children (t+1, 2i-1) and (t+1, 2i) which tile the parent box
exactly.  Each cell carries a representative center point and (once
computed) its diameter Delta = max over the cell of d(center, .) under
the kernel's canonical pseudo-metric.

Two splitting schemes are provided.  The regular scheme cuts the longest
side at its midpoint and uses Euclidean box centers; for kernels whose
metric grows monotonically with Euclidean distance the farthest point of
a box from its center is a corner, so Delta costs 2^m kernel evaluations.
The optimized scheme searches over axis-parallel cuts and places each
child's center at the metric 1-center of a discretizing grid, which is
what non-monotone kernels (e.g. quadratic) need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from gpoo.kernels import (
    is_stationary,
    metric_profile,
    KernelSpec,
    MetricAssumption,
    is_euclidean_monotone,
    metric_matrix,
    metric_to_points,
)

REGULAR = "regular"
OPTIMIZED = "optimized"

#: Refuse grids with more points than this (diameter, 1-center searches).
MAX_GRID_POINTS = 10_000_000


class PartitionError(ValueError):
    """Invalid partitioning request."""


class DegenerateCellError(PartitionError):
    """The cell has zero extent in every dimension and cannot be split."""


class InvalidSchemeError(PartitionError):
    """The requested diameter/split operation does not fit the kernel."""


@dataclass(frozen=True)
class Cell:
    """An axis-aligned box node of the partition tree.

    ``depth``/``index`` form the node id (t, i); the root is (0, 1).
    ``delta`` is the cached canonical diameter, ``None`` until a scheme
    computes it (cells are immutable; see :func:`with_delta`).
    """

    lower: np.ndarray
    upper: np.ndarray
    depth: int
    index: int
    center: np.ndarray
    delta: Optional[float] = None

    def __post_init__(self) -> None:
        lo = _freeze(np.asarray(self.lower, dtype=float))
        up = _freeze(np.asarray(self.upper, dtype=float))
        ce = _freeze(np.asarray(self.center, dtype=float))
        if lo.shape != up.shape or lo.shape != ce.shape or lo.ndim != 1:
            raise PartitionError("lower/upper/center must be 1-d and same shape")
        if np.any(lo > up):
            raise PartitionError("cell requires lower <= upper componentwise")
        if np.any(ce < lo) or np.any(ce > up):
            raise PartitionError("center must lie inside the cell")
        if self.depth < 0:
            raise PartitionError("depth must be nonnegative")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        object.__setattr__(self, "center", ce)

    @property
    def node_id(self) -> tuple:
        return (self.depth, self.index)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x, root_upper=None) -> bool:
        """Membership with half-open boundary ownership.

        A cell owns its lower faces; upper faces belong to the sibling on
        the other side of the cut, except faces lying on the root box's
        upper boundary (``root_upper``), which nobody else can own.
        """
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lower):
            return False
        if root_upper is None:
            return bool(np.all(x <= self.upper))
        on_global = np.isclose(self.upper, np.asarray(root_upper, dtype=float))
        strict = x < self.upper
        closed = x <= self.upper
        return bool(np.all(np.where(on_global, closed, strict)))


def _freeze(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    a.flags.writeable = False
    return a


def with_delta(cell: Cell, delta: float) -> Cell:
    if not delta >= 0:
        raise PartitionError("diameter must be nonnegative")
    return replace(cell, delta=float(delta))


def root_cell(lower, upper) -> Cell:
    """The root box as node (0, 1), centered at its Euclidean center."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    return Cell(lower, upper, depth=0, index=1,
                center=0.5 * (lower + upper))


@dataclass(frozen=True)
class PartitionScheme:
    """How to split cells and where to put child centers.

    ``regular`` cuts the longest side in the middle and centers children
    at their box centers.  ``optimized`` searches axis-parallel cuts on a
    per-axis grid of ``resolution`` candidate positions, placing centers
    at the metric 1-center of each child's ``resolution^m`` point grid;
    ties fall back to the regular midpoint cut.  k is fixed at 2 children.
    """

    mode: str = REGULAR
    resolution: int = 9

    def __post_init__(self) -> None:
        if self.mode not in (REGULAR, OPTIMIZED):
            raise PartitionError(f"unknown partition mode: {self.mode!r}")
        if self.mode == OPTIMIZED and self.resolution < 2:
            raise PartitionError("optimized mode needs grid resolution >= 2")


# ---------------------------------------------------------------------------
# Regular splitting
# ---------------------------------------------------------------------------


def split_regular(cell: Cell) -> tuple:
    """Split at the midpoint of the longest side (ties: lowest dimension).

    Children take node ids (t+1, 2i-1) and (t+1, 2i), left and right of
    the cut, with centers at their Euclidean box centers.  Diameters are
    not computed here; callers attach them via their scheme (see
    :func:`split_cell`).
    """
    w = cell.widths()
    if not np.any(w > 0):
        raise DegenerateCellError(f"cell {cell.node_id} has zero extent")
    j = int(np.argmax(w))  # np.argmax returns the first (lowest) maximizer
    cut = 0.5 * (cell.lower[j] + cell.upper[j])
    if not cell.lower[j] < cut < cell.upper[j]:
        # the longest side is one ulp wide: its midpoint rounds onto a
        # bound and one child would collapse onto the parent
        raise DegenerateCellError(f"cell {cell.node_id} is numerically atomic")
    return (
        _child_box(cell, j, cell.lower[j], cut, left=True),
        _child_box(cell, j, cut, cell.upper[j], left=False),
    )


def _child_box(cell: Cell, axis: int, lo_j: float, up_j: float, left: bool) -> Cell:
    lower = cell.lower.copy()
    upper = cell.upper.copy()
    lower[axis] = lo_j
    upper[axis] = up_j
    return Cell(
        lower,
        upper,
        depth=cell.depth + 1,
        index=2 * cell.index - 1 if left else 2 * cell.index,
        center=0.5 * (lower + upper),
    )


# ---------------------------------------------------------------------------
# Diameters
# ---------------------------------------------------------------------------

_corner_masks: dict = {}


def _corner_signs(m: int) -> np.ndarray:
    """All 2^m sign patterns in {0,1}^m, cached per dimension."""
    got = _corner_masks.get(m)
    if got is None:
        got = np.array(
            [[(i >> j) & 1 for j in range(m)] for i in range(2 ** m)], dtype=float
        )
        _corner_masks[m] = got
    return got


def corners(cell: Cell) -> np.ndarray:
    s = _corner_signs(cell.dim)
    return cell.lower + s * (cell.upper - cell.lower)


def diameter_corner(cell: Cell, spec: KernelSpec) -> float:
    """Delta as the max canonical distance from the center to a box corner.

    Only valid when the metric is a monotone transform of the Euclidean
    distance, in which case the farthest point of the box from the center
    is one of its 2^m corners.
    """
    if not is_euclidean_monotone(spec):
        raise InvalidSchemeError(
            f"corner diameters require a Euclidean-monotone kernel, "
            f"not {spec.family}; use diameter_grid"
        )
    if is_stationary(spec):
        # Every corner is equidistant from the center: one scalar suffices.
        half = 0.5 * (cell.upper - cell.lower)
        return float(metric_profile(spec, math.sqrt(float(half @ half))))
    return float(metric_to_points(spec, cell.center, corners(cell)).max())


def grid_points(cell: Cell, resolution: int) -> np.ndarray:
    """Regular tensor grid of resolution^m points including the corners."""
    if resolution < 2:
        raise PartitionError("grid resolution must be >= 2")
    m = cell.dim
    if resolution ** m > MAX_GRID_POINTS:
        raise PartitionError(
            f"grid of {resolution}^{m} points exceeds the "
            f"{MAX_GRID_POINTS:,}-point limit"
        )
    axes = [
        np.linspace(cell.lower[j], cell.upper[j], resolution) for j in range(m)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def diameter_grid(cell: Cell, spec: KernelSpec, resolution: int) -> float:
    """Delta as the max canonical distance from the center to a grid point.

    A lower bound on the true supremum that is monotone nondecreasing in
    resolution; exact for Euclidean-monotone kernels at any resolution
    >= 2 because the grid contains the corners.
    """
    g = grid_points(cell, resolution)
    return float(metric_to_points(spec, cell.center, g).max())


# ---------------------------------------------------------------------------
# Greedy k-center and optimized splitting
# ---------------------------------------------------------------------------


def greedy_k_center(candidates, k: int, spec: KernelSpec) -> np.ndarray:
    """Greedy metric k-center over a finite candidate set.

    Starts from the first candidate in list order, then repeatedly picks
    the candidate farthest (canonical metric) from the chosen set, ties
    going to the lowest index.  Classic 2-approximation of the optimal
    cover radius.  Returns min(k, len(candidates)) points.
    """
    pts = np.atleast_2d(np.asarray(candidates, dtype=float))
    if pts.shape[0] == 0:
        raise PartitionError("greedy_k_center needs a nonempty candidate list")
    if k < 1:
        raise PartitionError("k must be >= 1")
    chosen = [0]
    mindist = metric_matrix(spec, pts, pts[:1])[:, 0]
    while len(chosen) < min(k, pts.shape[0]):
        nxt = int(np.argmax(mindist))  # first maximizer = lowest index
        chosen.append(nxt)
        np.minimum(
            mindist, metric_matrix(spec, pts, pts[nxt : nxt + 1])[:, 0], out=mindist
        )
    return pts[chosen]


def _one_center(grid: np.ndarray, spec: KernelSpec) -> tuple:
    """Exact metric 1-center over a finite grid: (center point, radius).

    Evaluates the full pairwise distance matrix in row blocks; the
    minimizing row (lowest index on ties) is the center, its row max the
    radius.
    """
    n = grid.shape[0]
    radii = np.empty(n)
    step = max(1, int(2_000_000 // max(n, 1)))
    for start in range(0, n, step):
        block = metric_matrix(spec, grid[start : start + step], grid)
        radii[start : start + step] = block.max(axis=1)
    best = int(np.argmin(radii))
    return grid[best], float(radii[best])


def split_optimized(cell: Cell, spec: KernelSpec, resolution: int = 9) -> tuple:
    """Split by searching axis-parallel cuts under the canonical metric.

    For every axis of positive extent, ``resolution`` uniformly spaced
    interior cut positions are tried (plus the regular longest-side
    midpoint, tried first so that ties reproduce :func:`split_regular`'s
    choice).  Each candidate's children are scored by the metric 1-center
    radius of their own resolution^m grids and the cut minimizing the
    larger child radius wins.  Children come back with centers at their
    1-centers and ``delta`` already cached.

    Odd resolutions are preferable: they make the box midpoint a grid
    point, so Euclidean-monotone kernels recover the regular split
    exactly (same boxes, same centers).
    """
    w = cell.widths()
    if not np.any(w > 0):
        raise DegenerateCellError(f"cell {cell.node_id} has zero extent")
    j_reg = int(np.argmax(w))
    cut_reg = 0.5 * (cell.lower[j_reg] + cell.upper[j_reg])
    cands = [(j_reg, cut_reg)]
    for j in range(cell.dim):
        if w[j] <= 0:
            continue
        interior = np.linspace(cell.lower[j], cell.upper[j], resolution + 2)[1:-1]
        cands.extend((j, float(c)) for c in interior)
    cands = [(j, c) for j, c in cands if cell.lower[j] < c < cell.upper[j]]
    if not cands:
        raise DegenerateCellError(f"cell {cell.node_id} is numerically atomic")

    best = None
    for j, cut in cands:
        halves = []
        for left in (True, False):
            lo_j, up_j = (cell.lower[j], cut) if left else (cut, cell.upper[j])
            box = _child_box(cell, j, lo_j, up_j, left=left)
            ctr, rad = _one_center(grid_points(box, resolution), spec)
            halves.append((replace(box, center=_freeze(ctr)), rad))
        score = max(halves[0][1], halves[1][1])
        if best is None or score < best[0]:  # strict: first minimum wins
            best = (score, halves)
    (left_cell, left_rad), (right_cell, right_rad) = best[1]
    return with_delta(left_cell, left_rad), with_delta(right_cell, right_rad)


def split_cell(cell: Cell, spec: KernelSpec, scheme: PartitionScheme) -> tuple:
    """Scheme dispatch; children are returned with diameters cached."""
    if scheme.mode == OPTIMIZED:
        return split_optimized(cell, spec, scheme.resolution)
    left, right = split_regular(cell)
    return (
        with_delta(left, cell_diameter(left, spec, scheme)),
        with_delta(right, cell_diameter(right, spec, scheme)),
    )


def cell_diameter(cell: Cell, spec: KernelSpec, scheme: PartitionScheme) -> float:
    if is_euclidean_monotone(spec):
        return diameter_corner(cell, spec)
    return diameter_grid(cell, spec, scheme.resolution)


# ---------------------------------------------------------------------------
# Theoretical diameter decay of the regular scheme
# ---------------------------------------------------------------------------


def lemma3_bound(assumption: MetricAssumption, depth: int) -> float:
    """Diameter envelope C (2 sqrt(m))^alpha 2^(-alpha h / m) at depth h.

    Bounds the canonical diameter of any depth-h cell obtained by
    recursively halving the longest side of the unit cube, given the
    Euclidean envelope d <= C r^alpha.
    """
    if depth < 0:
        raise PartitionError("depth must be nonnegative")
    C, a, m = assumption.C, assumption.alpha, assumption.m
    return C * (2.0 * math.sqrt(m)) ** a * 2.0 ** (-a * depth / m)


# ---------------------------------------------------------------------------
# CSV export of partition traces
# ---------------------------------------------------------------------------


def cell_csv_header(m: int) -> list:
    cols = ["node_id_t", "node_id_i"]
    cols += [f"lower{j}" for j in range(m)]
    cols += [f"upper{j}" for j in range(m)]
    cols += [f"center{j}" for j in range(m)]
    return cols + ["delta"]


def cell_csv_row(cell: Cell) -> list:
    row = [str(cell.depth), str(cell.index)]
    row += [repr(float(v)) for v in cell.lower]
    row += [repr(float(v)) for v in cell.upper]
    row += [repr(float(v)) for v in cell.center]
    row.append("" if cell.delta is None else repr(float(cell.delta)))
    return row
