"""Global optimization driven by Gaussian-process kernel metrics.

The package bundles:

* a kernel zoo with the induced canonical pseudo-metric (:mod:`gpoo.kernels`),
* an adaptive box partition of the search space (:mod:`gpoo.partition`),
* exact GP posteriors and prior samplers (:mod:`gpoo.gp`),
* the optimistic-optimization engine and baselines (:mod:`gpoo.engine`,
  :mod:`gpoo.baselines`),
* benchmark objectives (:mod:`gpoo.objectives`),
* numerical checks of the supporting theory (:mod:`gpoo.analysis`),
* a reproducible experiment harness and CLI (:mod:`gpoo.harness`,
  :mod:`gpoo.cli`).
"""

from gpoo.kernels import (
    KernelSpec,
    MetricAssumption,
    canonical_metric,
    is_euclidean_monotone,
    kernel_matrix,
    metric_envelope,
)
from gpoo.engine import BetaSchedule, run_gpoo, run_oo
from gpoo.baselines import UcbConfig, run_gpucb, run_random
from gpoo.objectives import benchmark, on_model_objective
from gpoo.harness import ExperimentConfig, run_experiment, sweep_costs

__version__ = "0.1.0"

__all__ = [
    "KernelSpec",
    "MetricAssumption",
    "canonical_metric",
    "is_euclidean_monotone",
    "kernel_matrix",
    "metric_envelope",
    "BetaSchedule",
    "run_gpoo",
    "run_oo",
    "UcbConfig",
    "run_gpucb",
    "run_random",
    "benchmark",
    "on_model_objective",
    "ExperimentConfig",
    "run_experiment",
    "sweep_costs",
    "__version__",
]
