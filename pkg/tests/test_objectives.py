import numpy as np
import pytest
from scipy.optimize import minimize

from gpoo.gp import TensorGrid, sample_eval, sample_prior_grid
from gpoo.kernels import KernelSpec
from gpoo.objectives import (
    BENCHMARK_NAMES,
    TABLE1,
    UnknownObjectiveError,
    _tensor_nearest,
    benchmark,
    benchmark_entry,
    function_range,
    on_model_objective,
    restrict_domain,
    subsample_domain,
    with_cost,
)

pytestmark = pytest.mark.filterwarnings("ignore::RuntimeWarning")


@pytest.mark.parametrize("name", BENCHMARK_NAMES)
def test_documented_optimum_is_attained_at_argmax(name):
    obj = benchmark(name)
    assert obj.evaluate(obj.known_argmax) == pytest.approx(
        obj.known_best, abs=1e-8
    )
    assert np.all(obj.known_argmax >= obj.lower)
    assert np.all(obj.known_argmax <= obj.upper)


@pytest.mark.parametrize("name", BENCHMARK_NAMES)
def test_local_refinement_cannot_improve_optimum(name):
    """Polishing from the documented argmax must not find a better value."""
    obj = benchmark(name)
    res = minimize(lambda x: -obj.evaluate(x), obj.known_argmax,
                   method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
    assert -res.fun <= obj.known_best + 1e-7


@pytest.mark.parametrize("name", BENCHMARK_NAMES)
def test_random_probes_stay_below_optimum(name):
    obj = benchmark(name)
    rng = np.random.default_rng(hash(name) % 2**32)
    X = rng.uniform(obj.lower, obj.upper, size=(2000, obj.dim))
    vals = obj.batch(X)
    assert vals.max() <= obj.known_best + 1e-9
    # batch and scalar paths agree
    agree = [obj.evaluate(x) for x in X[:10]]
    np.testing.assert_allclose(agree, vals[:10], rtol=1e-12)


def test_benchmarks_are_negated_minimization_forms():
    # branin's classical minimum is ~0.3979; as a maximization problem
    # the optimum flips sign
    obj = benchmark("branin")
    assert obj.known_best == pytest.approx(-0.39788735772973816)
    assert obj.evaluate([np.pi, 2.275]) < 0


def test_table_entries_are_consistent():
    assert len(TABLE1) == 12
    for name, entry in TABLE1.items():
        assert entry.name == name
        assert entry.dim == benchmark(name).dim
        assert entry.interval[0] < entry.interval[1]
        assert entry.lengthscale > 0
        assert entry.beta_ucb > 0 and entry.beta_oo > 0
    assert benchmark_entry("Six_Hump_Camel").name == "six-hump-camel"
    assert benchmark_entry(" BRANIN ").name == "branin"
    with pytest.raises(UnknownObjectiveError):
        benchmark_entry("levy")


@pytest.mark.parametrize("name", ["branin", "hartmann3", "shekel4"])
def test_subsample_domain_keeps_the_optimum_inside(name):
    entry = benchmark_entry(name)
    obj = benchmark(name)
    for seed in range(10):
        lo, up = subsample_domain(entry, seed)
        assert np.all(lo >= entry.lower) and np.all(up <= entry.upper)
        assert np.all(lo <= obj.known_argmax) and np.all(obj.known_argmax <= up)
    lo2, up2 = subsample_domain(entry, 3)
    lo3, up3 = subsample_domain(entry, 3)
    np.testing.assert_array_equal(lo2, lo3)
    np.testing.assert_array_equal(up2, up3)


def test_restrict_domain_and_cost_wrappers():
    obj = benchmark("branin")
    sub = restrict_domain(obj, [0.0, 0.0], [5.0, 5.0])
    assert sub.evaluate([1.0, 1.0]) == obj.evaluate([1.0, 1.0])
    np.testing.assert_array_equal(sub.lower, [0.0, 0.0])
    priced = with_cost(obj, 2.5)
    assert priced.cost == 2.5 and obj.cost == 0.0
    with pytest.raises(ValueError):
        with_cost(obj, -1.0)


def test_function_range_brackets_the_optimum():
    obj = benchmark("six-hump-camel")
    lo, hi = function_range(obj, resolution=101)
    assert lo < hi
    assert hi <= obj.known_best + 1e-9
    assert hi == pytest.approx(obj.known_best, abs=1e-2)  # grid comes close
    with pytest.raises(ValueError):
        function_range(benchmark("dixonprice10"), resolution=10)


# --- on-model objectives ------------------------------------------------------


def test_on_model_optimum_is_grid_max(se_spec):
    obj = on_model_objective(se_spec, [0, 0], [1, 1], resolution=11, seed=9)
    sample = sample_prior_grid(se_spec, obj.grid.points, 9)
    assert obj.known_best == sample.values.max()
    assert obj.evaluate(obj.known_argmax) == obj.known_best
    # evaluating anywhere returns some grid value
    assert obj.evaluate([0.123, 0.987]) in sample.values


def test_on_model_evaluate_matches_grid_values(se_spec):
    obj = on_model_objective(se_spec, [0.0], [1.0], resolution=21, seed=4)
    sample = sample_prior_grid(se_spec, obj.grid.points, 4)
    for pt, val in zip(obj.grid.points, sample.values):
        assert obj.evaluate(pt) == val


def test_on_model_is_seeded(se_spec):
    a = on_model_objective(se_spec, [0.0], [1.0], resolution=21, seed=1)
    b = on_model_objective(se_spec, [0.0], [1.0], resolution=21, seed=2)
    assert a.known_best != b.known_best
    assert a.name != b.name  # seed is part of the label


def test_tensor_nearest_equals_flat_scan(rng, se_spec):
    grid = TensorGrid.regular([0.0, -1.0], [1.0, 2.0], (7, 9))
    sample = sample_prior_grid(se_spec, grid.points, 0)
    fast = _tensor_nearest(grid, sample.values)
    queries = [
        rng.uniform([-0.2, -1.3], [1.2, 2.3], size=2) for _ in range(500)
    ]
    queries += [p for p in grid.points[::5]]  # exact grid hits
    mids = 0.5 * (grid.points[:-1] + grid.points[1:])  # many exact ties
    queries += [m for m in mids[::3]]
    for q in queries:
        assert fast(q) == sample_eval(sample, q)


def test_on_model_resolution_guard(se_spec):
    with pytest.raises(ValueError):
        on_model_objective(se_spec, [0, 0], [1, 1], resolution=200, seed=0)
