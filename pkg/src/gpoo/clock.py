"""Run clocks: deterministic virtual time and measured wall-clock time.

Cost-sweep experiments compare optimizers by regret *per second* where a
second is mostly artificial evaluation cost plus per-step algorithmic
overhead.  Real wall-clock measurements of that are hardware-dependent
and non-reproducible, so the default clock is virtual: an integer
nanosecond counter advanced by the configured evaluation cost and by a
deterministic model of per-step optimizer overhead.  The model constants
below reproduce the characteristic regimes of a tree-search step (sub-
millisecond) versus an exact-GP Bayesian-optimization step (hundreds of
milliseconds, growing cubically), a ratio of roughly a thousand.

The real clock exists for qualitative wall-clock runs: it anchors to
``time.perf_counter_ns`` and actually sleeps for evaluation costs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

NS = 1_000_000_000


@dataclass(frozen=True)
class OverheadModel:
    """Modeled per-step optimizer overhead, in seconds (virtual clock only).

    gpoo_step: one expand-split-evaluate-push cycle of the tree search.
    gpucb_base + gpucb_cubic * n^3: one posterior update plus a full
    acquisition sweep at step n of an exact-GP loop.
    random_eval: drawing and bookkeeping one uniform sample.
    """

    gpoo_step: float = 2.5e-4
    gpucb_base: float = 0.25
    gpucb_cubic: float = 1e-9
    random_eval: float = 1e-5

    def gpoo_step_ns(self) -> int:
        return int(round(self.gpoo_step * NS))

    def gpucb_step_ns(self, n: int) -> int:
        return int(round((self.gpucb_base + self.gpucb_cubic * n ** 3) * NS))

    def random_eval_ns(self) -> int:
        return int(round(self.random_eval * NS))


class VirtualClock:
    """Integer-nanosecond logical clock; advancing is the only mutation."""

    mode = "virtual"

    def __init__(self) -> None:
        self._ns = 0

    def advance_ns(self, ns: int) -> None:
        if ns < 0:
            raise ValueError("cannot advance the clock backwards")
        self._ns += int(ns)

    def charge_cost(self, seconds: float) -> int:
        """Advance by an evaluation cost; returns the charged nanoseconds."""
        ns = int(round(seconds * NS))
        self.advance_ns(ns)
        return ns

    def now_ns(self) -> int:
        return self._ns


class RealClock:
    """Wall clock anchored at construction; evaluation costs really sleep."""

    mode = "real"

    def __init__(self) -> None:
        self._start = time.perf_counter_ns()

    def advance_ns(self, ns: int) -> None:
        pass  # wall time advances on its own

    def charge_cost(self, seconds: float) -> int:
        if seconds > 0:
            time.sleep(seconds)
        return int(round(seconds * NS))

    def now_ns(self) -> int:
        return time.perf_counter_ns() - self._start


def make_clock(mode: str):
    if mode == "virtual":
        return VirtualClock()
    if mode == "real":
        return RealClock()
    raise ValueError(f"unknown clock mode: {mode!r}")
