"""Shared fixtures.

The expensive fixture is ``onmodel_runs``: 20 seeded runs of each
optimizer on GP prior draws, reused by the sample-efficiency, cost-
crossover and regret tests so the trajectories are computed once per
session.
"""

import numpy as np
import pytest

from gpoo.harness import ExperimentConfig, execute_run
from gpoo.kernels import KernelSpec

ONMODEL_SEEDS = tuple(range(20))
ONMODEL_BUDGET = 300


def onmodel_config(optimizer: str, **overrides) -> ExperimentConfig:
    raw = {
        "optimizer": optimizer,
        "objective": "on-model",
        "lower": [0.0, 0.0, 0.0],
        "upper": [1.0, 1.0, 1.0],
        "budget": ONMODEL_BUDGET,
        "seeds": list(ONMODEL_SEEDS),
        "kernel_family": "se",
        "kernel_lengthscale": 0.1,
    }
    raw.update(overrides)
    return ExperimentConfig.from_dict(raw)


@pytest.fixture(scope="session")
def onmodel_runs():
    """{optimizer: [RunResult per seed]} on the shared on-model setup."""
    out = {}
    for opt in ("gpoo", "gpucb", "random"):
        cfg = onmodel_config(opt)
        out[opt] = [execute_run(cfg, seed) for seed in ONMODEL_SEEDS]
    return out


@pytest.fixture
def se_spec():
    return KernelSpec("se", lengthscale=0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
