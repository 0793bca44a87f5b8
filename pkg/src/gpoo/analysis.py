"""Numerical checks of the theory behind the optimizer.

Nothing here proves anything — these routines evaluate both sides of the
inequalities that justify the search (increment deviation bound, cell
diameter decay, regret series bounds, the Hölder/harmonic-number step)
so tests and the CLI can confirm them numerically on concrete
configurations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from gpoo.kernels import (
    KernelSpec,
    MetricAssumption,
    canonical_metric,
    kernel_matrix,
)
from gpoo.partition import lemma3_bound


def _harmonic(N: int) -> float:
    # fsum is exactly rounded, which is as compensated as it gets.
    return math.fsum(1.0 / n for n in range(1, N + 1))


def _floor_log2(n: np.ndarray) -> np.ndarray:
    # Exact for integers: frexp gives n = mant * 2**exp with mant in [0.5, 1).
    _, exp = np.frexp(n.astype(np.float64))
    return exp - 1


@dataclass(frozen=True)
class RegretSeries:
    """Per-step diameter-decay terms Delta(floor(log2 n)) for n = 1..N.

    Delta(h) is the depth-h cell-diameter envelope of the regular
    partition (see lemma3_bound); in a uniformly growing binary tree the
    cell expanded at step n has depth at least floor(log2 n), so these
    terms dominate the per-step regret contributions.
    """

    N: int
    C: float
    alpha: float
    m: int
    terms: np.ndarray
    harmonic: float

    @classmethod
    def from_assumption(cls, assumption: MetricAssumption, N: int) -> "RegretSeries":
        if N < 1:
            raise ValueError("N must be >= 1")
        depths = _floor_log2(np.arange(1, N + 1))
        C, a, m = assumption.C, assumption.alpha, assumption.m
        terms = C * (2.0 * math.sqrt(m)) ** a * 2.0 ** (-a * depths / m)
        return cls(N=N, C=C, alpha=a, m=m, terms=terms,
                   harmonic=_harmonic(N))

    def total(self) -> float:
        return math.fsum(self.terms)

    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.terms)


def prop1_bound(series: RegretSeries, beta_max: float) -> float:
    """Cumulative-regret envelope beta^{1/2} * sum_n Delta(floor(log2 n))."""
    if beta_max < 0:
        raise ValueError("beta_max must be nonnegative")
    return math.sqrt(beta_max) * series.total()


def prop2_check(assumption: MetricAssumption, N: int) -> tuple:
    """Both sides of the closed-form envelope of the regret series.

    lhs = sum_{n<=N} Delta(floor(log2 n));
    rhs = C1 N^{1-alpha/m} H_N^{alpha/m} with C1 = C (2 sqrt(m))^alpha 2^{alpha/m}.
    Requires m/alpha > 1; lhs <= rhs, and lhs/N -> 0, which is the
    asymptotic no-regret statement.
    """
    C, a, m = assumption.C, assumption.alpha, assumption.m
    if not m / a > 1:
        raise ValueError("the envelope needs m/alpha > 1")
    series = RegretSeries.from_assumption(assumption, N)
    c1 = C * (2.0 * math.sqrt(m)) ** a * 2.0 ** (a / m)
    rhs = c1 * N ** (1.0 - a / m) * series.harmonic ** (a / m)
    return series.total(), rhs


# ---------------------------------------------------------------------------
# Deviation inequality
# ---------------------------------------------------------------------------


def deviation_mc(spec: KernelSpec, x, y, u: float, trials: int = 10_000,
                 seed: int = 0) -> tuple:
    """Monte Carlo exceedance of |f(x)-f(y)| >= u versus 2 exp(-u^2/(2 d^2)).

    (f(x), f(y)) are drawn jointly from the kernel's bivariate normal, so
    the difference has distribution N(0, d(x,y)^2) exactly and the
    empirical probability can also be cross-checked against 2 Phi(-u/d).
    """
    if trials < 1000:
        raise ValueError("trials must be >= 1000 for a meaningful estimate")
    if u < 0:
        raise ValueError("u must be nonnegative")
    d = canonical_metric(spec, x, y)
    if d == 0.0:
        return (1.0, 2.0) if u == 0.0 else (0.0, 0.0)
    X = np.atleast_2d(np.asarray(x, dtype=float))
    Y = np.atleast_2d(np.asarray(y, dtype=float))
    pts = np.vstack([X, Y])
    cov = kernel_matrix(spec, pts, pts)
    a = math.sqrt(cov[0, 0])
    b = cov[0, 1] / a
    c = math.sqrt(max(cov[1, 1] - b * b, 0.0))
    z = np.random.default_rng(seed).standard_normal((trials, 2))
    fx = a * z[:, 0]
    fy = b * z[:, 0] + c * z[:, 1]
    empirical = float(np.mean(np.abs(fx - fy) >= u))
    bound = 2.0 * math.exp(-u * u / (2.0 * d * d))
    return empirical, bound


def gaussian_tail_exact(u: float, d: float) -> float:
    """P(|Z| >= u) for Z ~ N(0, d^2): the sharp value the bound relaxes."""
    if d == 0.0:
        return 1.0 if u == 0.0 else 0.0
    return float(math.erfc(u / (d * math.sqrt(2.0))))


# ---------------------------------------------------------------------------
# Regret guard on finished runs
# ---------------------------------------------------------------------------


def empirical_regret_guard(results, epsilon: float) -> float:
    """Fraction of runs whose every expansion satisfied the cell bound.

    For each expanded cell the guard is f* - f(center) <= beta^{1/2} *
    Delta; with the confidence schedule this should hold for all steps
    simultaneously in at least a 1 - epsilon fraction of runs (tested
    against 1 - epsilon - 0.05 to leave binomial slack).
    """
    ok = 0
    total = 0
    for res in results:
        if res.f_star is None:
            raise ValueError(f"run {res.optimizer}/{res.objective} lacks f*")
        total += 1
        holds = True
        for e in res.expansions:
            if e.beta is None or e.delta is None:
                raise ValueError("expansion lacks beta/delta; not a GP-OO run?")
            if res.f_star - e.f_center > math.sqrt(e.beta) * e.delta + 1e-12:
                holds = False
                break
        ok += holds
    if total == 0:
        raise ValueError("no runs supplied")
    return ok / total


# ---------------------------------------------------------------------------
# Hölder / harmonic-number self-check
# ---------------------------------------------------------------------------


def hoelder_harmonic_selfcheck(N: int, p: float, q: float,
                               seed: int = 0) -> bool:
    """Numerically confirm the inequality chain used by the series bound.

    Checks Hölder with exponents (p, q) on the proof's own sequences
    (a_n = 1, b_n = n^{-1/q}, for which sum b_n <= N^{1/p} H_N^{1/q})
    and on random sequences, plus the harmonic-number growth window
    H_N / ln N in [1, 1 + 1/ln N + 0.01] for N >= 10^3.
    """
    if p < 1 or q < 1 or abs(1.0 / p + 1.0 / q - 1.0) > 1e-12:
        raise ValueError("need p, q >= 1 with 1/p + 1/q = 1")
    n = np.arange(1, N + 1, dtype=float)
    H = _harmonic(N)
    ok = math.fsum(n ** (-1.0 / q)) <= N ** (1.0 / p) * H ** (1.0 / q) + 1e-9

    rng = np.random.default_rng(seed)
    for _ in range(5):
        a = rng.standard_normal(N)
        b = rng.standard_normal(N)
        lhs = float(np.abs(a * b).sum())
        rhs = float(
            (np.abs(a) ** p).sum() ** (1.0 / p)
            * (np.abs(b) ** q).sum() ** (1.0 / q)
        )
        ok = ok and lhs <= rhs + 1e-9 * max(1.0, rhs)

    if N >= 1000:
        ratio = H / math.log(N)
        ok = ok and 1.0 <= ratio <= 1.0 + 1.0 / math.log(N) + 0.01
    return bool(ok)


# ---------------------------------------------------------------------------
# Named checks for the CLI's theory report
# ---------------------------------------------------------------------------


def _check_deviation(seed: int) -> dict:
    rng = np.random.default_rng(seed)
    worst = None
    trials = 10_000
    for spec in (KernelSpec("se", lengthscale=0.1),
                 KernelSpec("matern", lengthscale=0.1, nu=1.5)):
        for _ in range(10):
            x = rng.uniform(0, 1, 3)
            y = rng.uniform(0, 1, 3)
            d = canonical_metric(spec, x, y)
            for scale in (0.25, 0.5, 1.0, 2.0):
                u = scale * d
                emp, bound = deviation_mc(spec, x, y, u, trials=trials,
                                          seed=seed)
                slack = 3.0 * math.sqrt(max(emp * (1 - emp), 1e-12) / trials)
                margin = bound + slack - emp
                if worst is None or margin < worst[0]:
                    worst = (margin, emp, bound)
    return {"check": "deviation", "lhs": worst[1], "rhs": worst[2],
            "pass": worst[0] >= 0, "trials": trials, "seed": seed}


def _check_prop1(seed: int) -> dict:
    assumption = MetricAssumption(C=math.sqrt(20.0), alpha=1.0, m=3)
    series = RegretSeries.from_assumption(assumption, 1000)
    bound = prop1_bound(series, beta_max=1.0)
    direct = 0.0
    for n in range(1, 1001):
        direct += lemma3_bound(assumption, int(math.floor(math.log2(n))))
    return {"check": "prop1", "lhs": bound, "rhs": direct,
            "pass": abs(bound - direct) <= 1e-9 * direct, "trials": 1000,
            "seed": seed}


def _check_prop2(seed: int) -> dict:
    worst = None
    for m in (1, 2, 3, 5, 10):
        for alpha in (0.5, 1.0):
            if not m / alpha > 1:
                continue
            assumption = MetricAssumption(C=1.0, alpha=alpha, m=m)
            for k in range(0, 18):
                lhs, rhs = prop2_check(assumption, 2 ** k)
                margin = rhs - lhs
                if worst is None or margin < worst[0]:
                    worst = (margin, lhs, rhs)
    return {"check": "prop2", "lhs": worst[1], "rhs": worst[2],
            "pass": worst[0] >= 0, "trials": 18 * 9, "seed": seed}


def _check_hoelder(seed: int) -> dict:
    ok = True
    for N, p, q in ((1, 2.0, 2.0), (1000, 2.0, 2.0), (10_000, 3.0, 1.5),
                    (100_000, 1.5, 3.0)):
        ok = ok and hoelder_harmonic_selfcheck(N, p, q, seed=seed)
    h = _harmonic(1_000_000)
    ok = ok and abs(h - 14.392726722865724) < 1e-9
    return {"check": "hoelder", "lhs": h, "rhs": 14.392726722865724,
            "pass": ok, "trials": 4, "seed": seed}


_CHECKS = {
    "deviation": _check_deviation,
    "prop1": _check_prop1,
    "prop2": _check_prop2,
    "hoelder": _check_hoelder,
}

CHECK_NAMES = tuple(_CHECKS)


def run_checks(names=None, seed: int = 0) -> list:
    """Run named theory checks; returns JSON-ready report dictionaries."""
    if names is None:
        names = CHECK_NAMES
    unknown = [n for n in names if n not in _CHECKS]
    if unknown:
        raise KeyError(f"unknown checks: {unknown}; known: {list(CHECK_NAMES)}")
    return [_CHECKS[name](seed) for name in names]
