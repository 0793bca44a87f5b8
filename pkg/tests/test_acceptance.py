"""Acceptance suite: one test per entry of the release checklist.

Each numbered test guards one end-to-end property of the toolkit, from
the metric axioms up to byte-level reproducibility of experiment
artifacts, and prints a single ``criterion NN: PASS/FAIL`` line (visible
with ``pytest -s`` or ``-rA``).  Numeric tolerances are pinned in the
asserts themselves.

Check 2 ships in two parts: the literal sqrt(20) envelope constant for
the squared-exponential kernel at lengthscale 0.1 is mathematically
unattainable (the metric's slope at zero separation is 1/l = 10, which
exceeds sqrt(20) ~ 4.47, so arbitrarily small separations violate it);
that test is a strict xfail documenting the defect, and the companion
test passes with the valid constant sqrt(2)/l used everywhere else.
"""

import math
import os
import time

import numpy as np
import pytest
from scipy.optimize import curve_fit

from conftest import ONMODEL_BUDGET, ONMODEL_SEEDS, onmodel_config
from gpoo.analysis import (
    deviation_mc,
    empirical_regret_guard,
    gaussian_tail_exact,
    prop2_check,
    run_checks,
)
from gpoo.baselines import UcbConfig, run_gpucb
from gpoo.clock import RealClock
from gpoo.engine import BetaSchedule, beta_n, run_gpoo
from gpoo.gp import (
    TensorGrid,
    _grid_factor,
    fit_posterior,
    posterior_mean_var_batch,
    posterior_update,
    prior_posterior,
)
from gpoo.harness import (
    ExperimentConfig,
    aggregate_rows,
    execute_run,
    retime_run,
    run_experiment,
    sweep_costs,
)
from gpoo.kernels import (
    KernelSpec,
    MetricAssumption,
    canonical_metric,
    kernel_matrix,
    metric_envelope,
    metric_pairs,
)
from gpoo.objectives import (
    benchmark,
    benchmark_entry,
    function_range,
    on_model_objective,
    restrict_domain,
    subsample_domain,
)
from gpoo.partition import (
    PartitionScheme,
    cell_diameter,
    lemma3_bound,
    root_cell,
    split_cell,
    split_regular,
    with_delta,
)

SE_01 = KernelSpec("se", lengthscale=0.1)


def _report(num: int, verdict: str, detail: str) -> None:
    print(f"criterion {num:02d}: {verdict} — {detail}")


# ---------------------------------------------------------------------------
# 1. metric axioms
# ---------------------------------------------------------------------------

#: One spec per supported family (each Matern smoothness counts as its own
#: metric).  The Wiener kernel is one-dimensional and lives on [0, inf).
METRIC_SPECS = (
    ("se", KernelSpec("se", lengthscale=0.1), 3),
    ("matern-1/2", KernelSpec("matern", nu=0.5, lengthscale=0.3), 3),
    ("matern-3/2", KernelSpec("matern", nu=1.5, lengthscale=0.3), 3),
    ("matern-5/2", KernelSpec("matern", nu=2.5, lengthscale=0.3), 3),
    ("rational-quadratic", KernelSpec("rq", lengthscale=0.5, shape=1.5), 3),
    ("wiener", KernelSpec("wiener"), 1),
    ("quadratic", KernelSpec("quadratic", bias=1.0), 3),
    ("linear", KernelSpec("linear"), 3),
    ("euclidean", KernelSpec("euclidean", exponent=0.5), 3),
)


def test_criterion_01_metric_axioms():
    t0 = time.perf_counter()
    n = 10_000
    for i, (label, spec, dim) in enumerate(METRIC_SPECS):
        rng = np.random.default_rng(100 + i)
        X, Y, Z = rng.uniform(0.0, 1.0, size=(3, n, dim))
        d_xy = metric_pairs(spec, X, Y)
        d_yx = metric_pairs(spec, Y, X)
        d_yz = metric_pairs(spec, Y, Z)
        d_xz = metric_pairs(spec, X, Z)
        assert np.abs(d_xy - d_yx).max() <= 1e-9, label
        assert metric_pairs(spec, X, X).max() <= 1e-9, label
        assert (d_xz <= d_xy + d_yz + 1e-9).all(), label
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    _report(1, "PASS", f"symmetry, d(x,x)=0 and triangle hold on {n} "
                       f"triples for {len(METRIC_SPECS)} kernels "
                       f"({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# 2. Euclidean envelope of the SE metric at l = 0.1
# ---------------------------------------------------------------------------


def _envelope_pairs():
    rng = np.random.default_rng(20)
    X = rng.uniform(0.0, 1.0, size=(10_000, 3))
    Y = rng.uniform(0.0, 1.0, size=(10_000, 3))
    r = np.linalg.norm(X - Y, axis=1)
    return metric_pairs(SE_01, X, Y), r


@pytest.mark.xfail(
    strict=True,
    reason="sqrt(20) is below the metric's slope at r -> 0, which is "
           "1/l = 10 for unit variance; pairs closer than ~0.32 violate "
           "the envelope, so it cannot hold on uniform random pairs",
)
def test_criterion_02_se_envelope_literal_sqrt20():
    d, r = _envelope_pairs()
    excess = d - math.sqrt(20.0) * r
    n_bad = int((excess > 1e-9).sum())
    _report(2, "FAIL", f"d <= sqrt(20)*r violated on {n_bad}/10000 pairs "
                       f"(max excess {excess.max():.3g}); the corrected "
                       f"constant is covered by the companion test")
    assert n_bad == 0


def test_criterion_02_se_envelope_corrected():
    d, r = _envelope_pairs()
    env = metric_envelope(SE_01, 3)
    assert env.alpha == 1.0
    assert env.C == pytest.approx(math.sqrt(2.0) / 0.1)
    excess = d - env.C * r
    assert (excess <= 1e-9).all()
    # the sharp slope 1/l also holds everywhere (the ratio d/r decreases
    # with r, so its supremum is the r -> 0 limit)
    assert (d <= 10.0 * r + 1e-9).all()
    _report(2, "PASS", f"corrected envelope C = sqrt(2)/l = {env.C:.3f} "
                       f"holds on 10000 pairs (zero violations)")


# ---------------------------------------------------------------------------
# 3. partition diameter decay bound
# ---------------------------------------------------------------------------

DIAMETER_SPECS = (
    ("euclidean a=1", KernelSpec("euclidean", exponent=1.0)),
    ("euclidean a=1/2", KernelSpec("euclidean", exponent=0.5)),
    ("se l=0.1", SE_01),
    ("matern-3/2 l=0.3", KernelSpec("matern", nu=1.5, lengthscale=0.3)),
)


def test_criterion_03_partition_diameter_bound():
    t0 = time.perf_counter()
    scheme = PartitionScheme()
    checked = 0
    for m in (1, 2, 3):
        cells = [root_cell([0.0] * m, [1.0] * m)]
        frontier = list(cells)
        for _ in range(12):
            nxt = []
            for cell in frontier:
                nxt.extend(split_regular(cell))
            cells.extend(nxt)
            frontier = nxt
        assert len(cells) == 2 ** 13 - 1
        for label, spec in DIAMETER_SPECS:
            env = metric_envelope(spec, m)
            for cell in cells:
                delta = cell_diameter(cell, spec, scheme)
                assert delta <= lemma3_bound(env, cell.depth) + 1e-9, (
                    f"{label}, m={m}, depth={cell.depth}"
                )
                checked += 1
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    _report(3, "PASS", f"{checked} cell diameters (3 trees to depth 12, "
                       f"{len(DIAMETER_SPECS)} metrics) within the decay "
                       f"bound ({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# 4. deviation inequality of GP increments
# ---------------------------------------------------------------------------


def test_criterion_04_deviation_inequality():
    trials = 10_000
    n_checks = 0
    for label, spec in (("se", SE_01),
                        ("matern-3/2", KernelSpec("matern", nu=1.5,
                                                  lengthscale=0.3))):
        rng = np.random.default_rng(42)
        for k in range(10):
            x, y = rng.uniform(0.0, 1.0, size=(2, 3))
            d = canonical_metric(spec, x, y)
            for mult in (0.25, 0.5, 1.0, 2.0):
                u = mult * d
                emp, bound = deviation_mc(spec, x, y, u, trials=trials,
                                          seed=1000 + k)
                exact = gaussian_tail_exact(u, d)
                sigma = math.sqrt(exact * (1.0 - exact) / trials)
                assert emp <= bound + 3.0 * sigma, (label, k, mult)
                assert abs(emp - exact) <= 4.0 * sigma, (label, k, mult)
                n_checks += 1
    _report(4, "PASS", f"{n_checks} Monte Carlo exceedance estimates under "
                       f"the 2exp(-u^2/2d^2) bound and within 4 sigma of "
                       f"the exact Gaussian tail")


# ---------------------------------------------------------------------------
# 5. per-step regret guard on on-model runs
# ---------------------------------------------------------------------------


def test_criterion_05_regret_guard_on_model():
    t0 = time.perf_counter()
    n_runs = 200
    cfg = onmodel_config("gpoo", beta_mode="theory", budget=2000,
                         seeds=list(range(n_runs)))
    frac = empirical_regret_guard(
        (execute_run(cfg, seed) for seed in range(n_runs)), epsilon=0.01)
    elapsed = time.perf_counter() - t0
    assert frac >= 0.94
    assert elapsed < 300.0
    _report(5, "PASS", f"cell bound held at every step in {frac:.1%} of "
                       f"{n_runs} runs (threshold 94%, {elapsed:.0f}s)")


# ---------------------------------------------------------------------------
# 6. summed diameter-decay series envelope
# ---------------------------------------------------------------------------


def test_criterion_06_series_envelope():
    t0 = time.perf_counter()
    pairs = [(m, a) for m in (1, 2, 3, 5, 10) for a in (0.5, 1.0)
             if m / a > 1]
    assert len(pairs) == 9
    n_checks = 0
    for m, a in pairs:
        assumption = MetricAssumption(C=1.0, alpha=a, m=m)
        for k in range(18):
            lhs, rhs = prop2_check(assumption, 2 ** k)
            assert lhs <= rhs, (m, a, k)
            n_checks += 1
        per_step = [prop2_check(assumption, N)[0] / N
                    for N in (10 ** 3, 10 ** 4, 10 ** 5)]
        assert per_step[0] > per_step[1] > per_step[2], (m, a)
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    _report(6, "PASS", f"series bound holds for {n_checks} (m, alpha, N) "
                       f"combinations and the per-step average vanishes "
                       f"({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# 7. heap discipline against a linear-scan reference
# ---------------------------------------------------------------------------


def _linear_scan_reference(objective, spec, schedule, scheme, budget):
    """From-scratch best-first loop with an O(N^2) argmax queue.

    Tie rule mirrors the engine's heap key: highest utility, then
    deepest cell, then lowest within-depth index.
    """
    root = root_cell(objective.lower, objective.upper)
    root = with_delta(root, cell_diameter(root, spec, scheme))
    y = objective.evaluate(root.center)
    beta = beta_n(schedule, root)
    leaves = [(root, y, y + math.sqrt(beta) * root.delta, beta)]
    n_evals = 1
    expansions = []
    while n_evals < budget:
        best = max(range(len(leaves)),
                   key=lambda i: (leaves[i][2], leaves[i][0].depth,
                                  -leaves[i][0].index))
        cell, f_center, utility, beta = leaves.pop(best)
        expansions.append((len(expansions), cell.node_id, cell.depth,
                           f_center, cell.delta, beta, utility))
        for child in split_cell(cell, spec, scheme):
            yc = objective.evaluate(child.center)
            bc = beta_n(schedule, child)
            leaves.append((child, yc, yc + math.sqrt(bc) * child.delta, bc))
            n_evals += 1
    return expansions


def test_criterion_07_heap_matches_linear_scan():
    scheme = PartitionScheme()
    budget = 201  # root + 100 expansions of two evaluations each
    for seed in range(20):
        obj = on_model_objective(SE_01, [0.0] * 3, [1.0] * 3, 21,
                                 seed=100 + seed)
        schedule = BetaSchedule.experiment(budget)
        run = run_gpoo(None, obj, SE_01, schedule, scheme, budget)
        ref = _linear_scan_reference(obj, SE_01, schedule, scheme, budget)
        assert len(run.expansions) == len(ref) == 100
        got = [(e.order, e.node_id, e.depth, e.f_center, e.delta, e.beta,
                e.utility) for e in run.expansions]
        assert got == ref, f"seed {seed}"
    _report(7, "PASS", "100 expansions match the linear-scan reference "
                       "bitwise on 20 seeds")


# ---------------------------------------------------------------------------
# 8. GP posterior correctness
# ---------------------------------------------------------------------------


def test_criterion_08_gp_correctness():
    rng = np.random.default_rng(7)
    spec = KernelSpec("matern", nu=2.5, lengthscale=0.4)
    X = rng.uniform(0.0, 1.0, size=(50, 3))
    y = rng.standard_normal(50)

    incremental = prior_posterior(spec, 1e-3, 3)
    for xi, yi in zip(X, y):
        incremental = posterior_update(incremental, xi, yi)
    batch = fit_posterior(spec, X, y, 1e-3)
    Q = rng.uniform(0.0, 1.0, size=(40, 3))
    mi, vi = posterior_mean_var_batch(incremental, Q)
    mb, vb = posterior_mean_var_batch(batch, Q)
    assert np.abs(incremental.L - batch.L).max() <= 1e-8
    assert np.abs(mi - mb).max() <= 1e-8
    assert np.abs(vi - vb).max() <= 1e-8

    # noiseless interpolation at lambda = 1e-6 (10 points keep the SE
    # Gram comfortably inside the jitter floor)
    rng_i = np.random.default_rng(7)
    Xi = rng_i.uniform(0.0, 1.0, size=(10, 2))
    yi = rng_i.standard_normal(10)
    interp = fit_posterior(KernelSpec("se", lengthscale=0.3), Xi, yi, 1e-6)
    mean, _ = posterior_mean_var_batch(interp, Xi)
    assert np.abs(mean - yi).max() <= 1e-3

    # sampler Gram reconstruction
    worst = 0.0
    for fac_spec in (SE_01, KernelSpec("matern", nu=1.5, lengthscale=0.3)):
        grid = TensorGrid.regular([0.0, 0.0], [1.0, 1.0], 9).points
        L = _grid_factor(fac_spec, grid)
        K = kernel_matrix(fac_spec, grid, grid)
        rel = np.linalg.norm(L @ L.T - K) / np.linalg.norm(K)
        worst = max(worst, rel)
        assert rel <= 1e-8
    _report(8, "PASS", f"incremental == batch and interpolation within "
                       f"tolerance; sampler factor reconstructs the Gram "
                       f"to {worst:.2g} relative")


# ---------------------------------------------------------------------------
# 9. sample-efficiency ordering with frozen regression values
# ---------------------------------------------------------------------------

#: Reference medians from the first run of this build (virtual clock,
#: seeds 0..19); the suite freezes them as a regression fixture.
FROZEN_MEDIAN_AT_300 = {
    "gpoo": 0.34836469885942645,
    "gpucb": 0.23993011930347663,
    "random": 0.5897182735180073,
}
FROZEN_GAP_OO_UCB = 0.10843457955594982


def _median_regret_at_300(runs):
    return float(np.median([r.simple_regrets()[ONMODEL_BUDGET - 1]
                            for r in runs]))


def test_criterion_09_sample_efficiency_ordering(onmodel_runs):
    med = {opt: _median_regret_at_300(runs)
           for opt, runs in onmodel_runs.items()}
    assert med["gpucb"] <= med["gpoo"] <= med["random"]
    for opt, frozen in FROZEN_MEDIAN_AT_300.items():
        assert med[opt] == pytest.approx(frozen, rel=1e-9), opt
    gap = med["gpoo"] - med["gpucb"]
    assert gap == pytest.approx(FROZEN_GAP_OO_UCB, rel=1e-9)
    _report(9, "PASS", f"median regret at evaluation {ONMODEL_BUDGET} over "
                       f"{len(ONMODEL_SEEDS)} seeds: gpucb {med['gpucb']:.4f} "
                       f"<= gpoo {med['gpoo']:.4f} <= random "
                       f"{med['random']:.4f}; gap matches frozen fixture")


# ---------------------------------------------------------------------------
# 10. per-step computational cost separation (real clock)
# ---------------------------------------------------------------------------


def _offset_power_exponent(per_step_ns: np.ndarray) -> float:
    """Exponent p of t(n) = a + b n^p fitted to windowed step times.

    The additive term absorbs the n-independent per-call floor (python
    and BLAS dispatch, memory traffic of grid-sized arrays), which
    otherwise masks the asymptotic growth at the small-n end of the
    window.  Window medians damp scheduler spikes.
    """
    edges = np.unique(np.geomspace(50, 400, 9).round().astype(int))
    mids, meds = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        mids.append(math.sqrt(a * b))
        meds.append(float(np.median(per_step_ns[a - 1:b])))
    mids, meds = np.asarray(mids), np.asarray(meds)

    def model(n, log_a, log_b, p):
        return np.log(np.exp(log_a) + np.exp(log_b) * n ** p)

    p0 = (math.log(meds[0]), math.log(meds[-1] / mids[-1] ** 2), 2.0)
    popt, _ = curve_fit(model, mids, np.log(meds), p0=p0, maxfev=20_000)
    return float(popt[2])


def test_criterion_10_per_step_cost_separation():
    obj = on_model_objective(SE_01, [0.0] * 3, [1.0] * 3, 21, seed=100)

    run = run_gpoo(None, obj, SE_01, BetaSchedule.experiment(10_000),
                   budget=10_000, clock=RealClock())
    gpoo_step_ns = ((run.timing.total_ns - run.timing.objective_ns)
                    / len(run.expansions))

    grid = TensorGrid.regular(obj.lower, obj.upper, 21).points
    ucb = run_gpucb(None, obj, SE_01, UcbConfig(grid=grid), budget=400,
                    clock=RealClock())
    steps = np.diff(ucb.elapsed_ns(), prepend=0).astype(float)
    ucb_step_at_300_ns = steps[279:320].mean()

    ratio = ucb_step_at_300_ns / gpoo_step_ns
    assert ratio >= 50.0
    exponent = _offset_power_exponent(steps)
    assert exponent >= 1.5
    _report(10, "PASS", f"per-step time: gpoo {gpoo_step_ns / 1e3:.0f}us at "
                        f"budget 10^4 vs gpucb {ucb_step_at_300_ns / 1e6:.1f}ms "
                        f"around n=300 (ratio {ratio:.0f}x >= 50); gpucb "
                        f"growth exponent {exponent:.2f} >= 1.5")


# ---------------------------------------------------------------------------
# 11. cost-sweep crossover of regret-vs-time curves
# ---------------------------------------------------------------------------


def test_criterion_11_cost_crossover(onmodel_runs):
    details = []
    for cost, better in ((0.01, "gpoo"), (10.0, "gpucb")):
        groups = [(opt, "on-model", [retime_run(r, cost) for r in runs])
                  for opt, runs in onmodel_runs.items()]
        rows = aggregate_rows(groups, axes=("seconds",))
        xs = sorted({row[4] for row in rows})
        checkpoints = [xs[int(round(f * (len(xs) - 1)))]
                       for f in (0.9, 0.95, 1.0)]
        median = {(row[0], row[4]): row[5] for row in rows
                  if row[2] == "median"}
        diffs = [median[("gpoo", c)] - median[("gpucb", c)]
                 for c in checkpoints]
        if better == "gpoo":
            assert all(d < 0 for d in diffs), (cost, diffs)
        else:
            assert all(d > 0 for d in diffs), (cost, diffs)
        details.append(f"cost {cost}: {better} leads at all three late "
                       f"checkpoints")
    _report(11, "PASS", "; ".join(details))


# ---------------------------------------------------------------------------
# 12. benchmark sanity at table hyperparameters
# ---------------------------------------------------------------------------


def test_criterion_12_benchmark_sanity():
    t0 = time.perf_counter()
    tallies = []
    for name in ("branin", "six-hump-camel", "hartmann3"):
        entry = benchmark_entry(name)
        spec = KernelSpec("matern", nu=1.5, lengthscale=entry.lengthscale)
        ok = 0
        for seed in range(10):
            lower, upper = subsample_domain(entry, seed)
            obj = restrict_domain(benchmark(name), lower, upper)
            lo_val, hi_val = function_range(obj, 101)
            run = run_gpoo(None, obj, spec, BetaSchedule.fixed(entry.beta_oo),
                           budget=500, seed=seed)
            regret = obj.known_best - run.best_value
            ok += regret <= 0.01 * (hi_val - lo_val)
        assert ok >= 8, f"{name}: {ok}/10"
        tallies.append(f"{name} {ok}/10")
    elapsed = time.perf_counter() - t0
    assert elapsed < 600.0
    _report(12, "PASS", f"regret within 1% of the domain's value range on "
                        f"{', '.join(tallies)} subsampled domains "
                        f"({elapsed:.0f}s)")


# ---------------------------------------------------------------------------
# 13. byte-level reproducibility of artifacts
# ---------------------------------------------------------------------------


def _tree_bytes(root):
    out = {}
    for dirpath, _, filenames in os.walk(root):
        for fn in filenames:
            path = os.path.join(dirpath, fn)
            out[os.path.relpath(path, root)] = open(path, "rb").read()
    return out


def test_criterion_13_byte_reproducibility(tmp_path):
    raw = {
        "optimizer": "gpoo",
        "objective": "on-model",
        "lower": [0.0, 0.0],
        "upper": [1.0, 1.0],
        "budget": 60,
        "seeds": [0, 1],
        "kernel_family": "se",
        "kernel_lengthscale": 0.2,
        "objective_resolution": 9,
        "cost": 0.01,
    }
    cfg = ExperimentConfig.from_dict(raw)
    first = run_experiment(cfg, tmp_path / "a")
    second = run_experiment(cfg, tmp_path / "b")
    assert first.exit_code() == second.exit_code() == 0
    tree_a, tree_b = _tree_bytes(tmp_path / "a"), _tree_bytes(tmp_path / "b")
    assert tree_a.keys() == tree_b.keys()
    assert all(tree_a[k] == tree_b[k] for k in tree_a)

    sweep_cfg = ExperimentConfig.from_dict({**raw, "budget": 40})
    sweep_costs(sweep_cfg, costs=(0.01, 1.0), out_dir=tmp_path / "sa")
    sweep_costs(sweep_cfg, costs=(0.01, 1.0), out_dir=tmp_path / "sb")
    tree_a, tree_b = _tree_bytes(tmp_path / "sa"), _tree_bytes(tmp_path / "sb")
    assert tree_a.keys() == tree_b.keys()
    assert all(tree_a[k] == tree_b[k] for k in tree_a)

    assert run_checks(seed=0) == run_checks(seed=0)

    for opt in ("gpoo", "gpucb", "random"):
        cfg = onmodel_config(opt, budget=40, seeds=[3])
        assert execute_run(cfg, 3).records == execute_run(cfg, 3).records
    _report(13, "PASS", "experiment and sweep artifacts byte-identical "
                        "across repeated runs; theory checks and per-"
                        "optimizer traces repeat exactly")
