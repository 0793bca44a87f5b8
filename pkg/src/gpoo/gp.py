"""Exact Gaussian-process machinery.

Two jobs: posterior conditioning for the GP-UCB baseline (incremental
rank-one Cholesky updates, dense linear algebra, no approximations), and
prior sampling on finite grids for on-model experiments where the
objective is itself a GP draw.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from gpoo.kernels import (
    DimensionMismatchError,
    KernelSpec,
    kernel_diag,
    kernel_eval,
    kernel_matrix,
)

#: Dense-Cholesky grid size limit for prior sampling.
MAX_SAMPLE_GRID = 10_000

_JITTER_FLOOR = 1e-10
_JITTER_CAP = 1e-6


class ConditioningError(np.linalg.LinAlgError):
    """Gram matrix stayed non-positive-definite after jitter escalation."""


def _freeze(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def _chol_with_jitter(K: np.ndarray, start: float) -> np.ndarray:
    """Lower Cholesky of K + jitter*I, escalating jitter x10 up to the cap."""
    jitter = start
    while True:
        try:
            A = K.copy()
            A[np.diag_indices_from(A)] += jitter
            return cholesky(A, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            if jitter >= _JITTER_CAP:
                raise ConditioningError(
                    f"Cholesky failed up to jitter {jitter:g}"
                ) from None
            jitter = min(jitter * 10.0, _JITTER_CAP)


# ---------------------------------------------------------------------------
# Posterior conditioning
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GpPosterior:
    """Exact GP posterior after n observations.

    Holds the lower Cholesky factor of (K_n + jitter*I) where jitter =
    max(noise, 1e-10), and the precomputed weights (K_n+jitter*I)^{-1} y_n.
    Updates return new values; existing posteriors stay valid.
    """

    spec: KernelSpec
    noise: float
    X: np.ndarray
    y: np.ndarray
    L: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def jitter(self) -> float:
        return max(self.noise, _JITTER_FLOOR)


def prior_posterior(spec: KernelSpec, noise: float, dim: int) -> GpPosterior:
    """The zero-observation posterior: mean 0, variance k(x, x)."""
    if noise < 0:
        raise ValueError("noise must be nonnegative")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    empty = _freeze(np.empty((0, dim)))
    return GpPosterior(
        spec=spec,
        noise=float(noise),
        X=empty,
        y=_freeze(np.empty(0)),
        L=_freeze(np.empty((0, 0))),
        weights=_freeze(np.empty(0)),
    )


def fit_posterior(spec: KernelSpec, X, y, noise: float) -> GpPosterior:
    """Batch-fit a posterior from scratch (dense Cholesky of the Gram)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatchError("X and y lengths differ")
    if X.shape[0] == 0:
        return prior_posterior(spec, noise, X.shape[1] if X.size else 1)
    jitter = max(noise, _JITTER_FLOOR)
    L = _chol_with_jitter(kernel_matrix(spec, X, X), jitter)
    w = cho_solve((L, True), y, check_finite=False)
    return GpPosterior(spec, float(noise), _freeze(X), _freeze(y),
                       _freeze(L), _freeze(w))


def posterior_update(post: GpPosterior, x, y: float) -> GpPosterior:
    """Condition on one more observation via rank-one Cholesky extension.

    O(n^2) per call.  If the extension pivot is not positive (numerically
    non-PD Gram), the factor is rebuilt from scratch with escalated jitter.
    """
    x = np.asarray(x, dtype=float).ravel()
    if post.n and x.shape[0] != post.dim:
        raise DimensionMismatchError(
            f"point has dim {x.shape[0]}, posterior has {post.dim}"
        )
    X_new = np.vstack([post.X, x]) if post.n else x[None, :]
    y_new = np.append(post.y, float(y))
    c = kernel_eval(post.spec, x, x) + post.jitter
    if post.n == 0:
        if c <= 0:
            raise ConditioningError("nonpositive prior variance at first point")
        L_new = np.array([[np.sqrt(c)]])
    else:
        b = kernel_matrix(post.spec, post.X, x[None, :])[:, 0]
        w = solve_triangular(post.L, b, lower=True, check_finite=False)
        s2 = c - w @ w
        if s2 <= 0.0:
            return _refit_escalated(post, X_new, y_new)
        L_new = np.zeros((post.n + 1, post.n + 1))
        L_new[: post.n, : post.n] = post.L
        L_new[post.n, : post.n] = w
        L_new[post.n, post.n] = np.sqrt(s2)
    weights = cho_solve((L_new, True), y_new, check_finite=False)
    return GpPosterior(post.spec, post.noise, _freeze(X_new), _freeze(y_new),
                       _freeze(L_new), _freeze(weights))


def _refit_escalated(post: GpPosterior, X_new, y_new) -> GpPosterior:
    start = min(post.jitter * 10.0, _JITTER_CAP)
    L = _chol_with_jitter(kernel_matrix(post.spec, X_new, X_new), start)
    w = cho_solve((L, True), y_new, check_finite=False)
    return GpPosterior(post.spec, post.noise, _freeze(X_new), _freeze(y_new),
                       _freeze(L), _freeze(w))


def posterior_mean_var_batch(post: GpPosterior, Q) -> tuple:
    """Posterior mean and variance at each query row of Q.

    Variance is clamped at zero; round-off can push the exact expression
    k(x,x) - k_n(x)^T (K_n+jitter I)^{-1} k_n(x) a hair negative.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    prior_var = kernel_diag(post.spec, Q)
    if post.n == 0:
        return np.zeros(Q.shape[0]), prior_var
    Kq = kernel_matrix(post.spec, post.X, Q)
    mean = Kq.T @ post.weights
    W = solve_triangular(post.L, Kq, lower=True, check_finite=False)
    var = prior_var - np.einsum("ij,ij->j", W, W)
    return mean, np.maximum(var, 0.0)


def posterior_mean_var(post: GpPosterior, x) -> tuple:
    """(mean, variance) at a single point."""
    mean, var = posterior_mean_var_batch(post, np.atleast_2d(x))
    return float(mean[0]), float(var[0])


# ---------------------------------------------------------------------------
# Tensor grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TensorGrid:
    """Cartesian product of sorted per-axis coordinate vectors."""

    axes: tuple

    def __post_init__(self) -> None:
        axes = tuple(_freeze(np.asarray(a, dtype=float).ravel()) for a in self.axes)
        for a in axes:
            if a.size == 0:
                raise ValueError("grid axes must be nonempty")
            if np.any(np.diff(a) <= 0):
                raise ValueError("grid axes must be strictly increasing")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def regular(cls, lower, upper, resolution) -> "TensorGrid":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        res = np.broadcast_to(np.asarray(resolution, dtype=int), lower.shape)
        if np.any(res < 2):
            raise ValueError("resolution must be >= 2 per axis")
        return cls(tuple(np.linspace(lo, up, r)
                         for lo, up, r in zip(lower, upper, res)))

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def size(self) -> int:
        return int(np.prod([a.size for a in self.axes]))

    @property
    def lower(self) -> np.ndarray:
        return np.array([a[0] for a in self.axes])

    @property
    def upper(self) -> np.ndarray:
        return np.array([a[-1] for a in self.axes])

    @cached_property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return _freeze(np.stack([g.ravel() for g in mesh], axis=-1))

    def count_in_box(self, lower, upper, root_upper=None) -> int:
        """Number of grid points a partition cell owns.

        Per axis the cell owns the half-open slab [lower, upper), closed
        at the top only where the cell's upper face lies on the root
        box's upper boundary (cells inherit root bound floats unchanged,
        so exact comparison is appropriate).  With root_upper omitted the
        box is treated as closed on every face.
        """
        total = 1
        for j, vals in enumerate(self.axes):
            closed = root_upper is None or upper[j] >= root_upper[j]
            hi = np.searchsorted(vals, upper[j], side="right" if closed else "left")
            lo = np.searchsorted(vals, lower[j], side="left")
            total *= max(int(hi - lo), 0)
        return total


# ---------------------------------------------------------------------------
# Prior sampling on grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GpSample:
    """A GP prior draw discretized on a finite grid of points."""

    spec: KernelSpec
    grid: np.ndarray
    values: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        grid = _freeze(np.atleast_2d(self.grid))
        values = _freeze(np.asarray(self.values, dtype=float).ravel())
        if grid.shape[0] == 0:
            raise ValueError("sample grid must be nonempty")
        if grid.shape[0] != values.shape[0]:
            raise ValueError("grid/values length mismatch")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)


_factor_cache: OrderedDict = OrderedDict()
_FACTOR_CACHE_SIZE = 2  # factors are O(grid^2) memory; keep only the hottest


def _spec_cache_key(spec: KernelSpec):
    return (spec.family, spec.lengthscale, spec.variance, spec.nu, spec.shape,
            spec.bias, spec.exponent)


def _grid_factor(spec: KernelSpec, grid: np.ndarray) -> np.ndarray:
    key = (_spec_cache_key(spec), grid.shape, grid.tobytes())
    hit = _factor_cache.get(key)
    if hit is not None:
        _factor_cache.move_to_end(key)
        return hit
    L = _chol_with_jitter(kernel_matrix(spec, grid, grid), _JITTER_FLOOR)
    _factor_cache[key] = L
    while len(_factor_cache) > _FACTOR_CACHE_SIZE:
        _factor_cache.popitem(last=False)
    return L


def sample_prior_grid(spec: KernelSpec, grid, seed: int) -> GpSample:
    """Draw f ~ GP(0, k) restricted to a grid, deterministically per seed.

    values = L z with L L^T = K_grid + 1e-10 I and z standard normal from
    a generator seeded with ``seed``.  The factor is cached per
    (kernel, grid), so repeated draws on one grid cost a matvec each.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[0] > MAX_SAMPLE_GRID:
        raise ValueError(
            f"grid of {grid.shape[0]} points exceeds the dense-Cholesky "
            f"limit of {MAX_SAMPLE_GRID}"
        )
    if np.unique(grid, axis=0).shape[0] != grid.shape[0]:
        raise ValueError("sample grid points must be pairwise distinct")
    L = _grid_factor(spec, grid)
    z = np.random.default_rng(seed).standard_normal(grid.shape[0])
    return GpSample(spec=spec, grid=grid, values=L @ z, seed=int(seed))


def sample_eval(sample: GpSample, x) -> float:
    """Value at the grid point nearest to x (Euclidean, lowest index wins).

    Queries outside the grid's bounding box simply snap to the nearest
    grid point, so slight boundary overshoot is harmless.
    """
    x = np.asarray(x, dtype=float).ravel()
    d2 = ((sample.grid - x) ** 2).sum(axis=1)
    return float(sample.values[int(np.argmin(d2))])


def sample_csv_header(dim: int) -> list:
    return [f"x{j}" for j in range(dim)] + ["value"]


def sample_csv_rows(sample: GpSample):
    for pt, val in zip(sample.grid, sample.values):
        yield [repr(float(c)) for c in pt] + [repr(float(val))]
