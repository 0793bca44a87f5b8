import numpy as np
import pytest

from gpoo.records import (
    DataIntegrityError,
    RunRecord,
    RunResult,
    TimingBreakdown,
    TraceLog,
    compute_regret,
    read_trace_csv,
    trace_header,
    write_trace_csv,
)


def _hand_trace(f_star=1.0):
    log = TraceLog(f_star=f_star)
    for step, (val, t) in enumerate(zip((0.2, 0.5, 0.5), (10, 30, 60))):
        log.append(step=step, point=(0.1 * step, 0.0), f_value=val,
                   elapsed_ns=t)
    return log.records


def test_regret_columns_hand_check():
    recs = _hand_trace()
    assert [r.best_value for r in recs] == [0.2, 0.5, 0.5]
    assert [r.simple_regret for r in recs] == [0.8, 0.5, 0.5]
    assert recs[-1].cum_regret == pytest.approx(0.8 + 0.5 + 0.5)


def test_unknown_optimum_leaves_regret_blank():
    log = TraceLog()
    rec = log.append(step=0, point=(0.5,), f_value=2.0, elapsed_ns=5)
    assert rec.simple_regret is None and rec.cum_regret is None
    assert rec.best_value == 2.0


def test_value_above_known_optimum_rejected():
    log = TraceLog(f_star=1.0)
    log.append(step=0, point=(0.0,), f_value=1.0 + 9e-10, elapsed_ns=1)  # slack
    with pytest.raises(DataIntegrityError):
        log.append(step=1, point=(0.0,), f_value=1.0 + 2e-9, elapsed_ns=2)


def test_compute_regret_matches_streaming_log():
    recs = _hand_trace()
    blank = [  # strip the regret columns, keep everything else
        RunRecord(step=r.step, point=r.point, f_value=r.f_value, delta=None,
                  beta=None, utility=None, best_value=0.0, simple_regret=None,
                  cum_regret=None, elapsed_ns=r.elapsed_ns)
        for r in recs
    ]
    redone = compute_regret(blank, f_star=1.0)
    for a, b in zip(redone, recs):
        assert a.best_value == b.best_value
        assert a.simple_regret == pytest.approx(b.simple_regret)
        assert a.cum_regret == pytest.approx(b.cum_regret)
    with pytest.raises(ValueError):
        compute_regret(blank, f_star=float("nan"))
    with pytest.raises(DataIntegrityError):
        compute_regret(blank, f_star=0.4)


def test_trace_csv_round_trip(tmp_path):
    log = TraceLog(f_star=2.0)
    log.append(step=0, point=(0.25, 0.75), f_value=1.0, elapsed_ns=100,
               delta=0.5, beta=4.0, utility=2.0)
    log.append(step=1, point=(0.5, 0.5), f_value=1.5, elapsed_ns=250)
    path = tmp_path / "trace.csv"
    write_trace_csv(path, log.records)
    back = read_trace_csv(path)
    assert len(back) == 2
    assert back[0] == RunRecord(
        step=0, point=(0.25, 0.75), f_value=1.0, delta=0.5, beta=4.0,
        utility=2.0, best_value=1.0, simple_regret=1.0, cum_regret=1.0,
        elapsed_ns=100,
    )
    # optional columns survive as blanks
    assert back[1].delta is None and back[1].beta is None
    text = path.read_text().splitlines()
    assert text[0] == ",".join(trace_header(2))
    assert text[2].split(",")[4] == ""  # delta column empty, not "None"


def test_write_empty_trace_rejected(tmp_path):
    with pytest.raises(ValueError):
        write_trace_csv(tmp_path / "x.csv", [])


def test_csv_preserves_floats_exactly(tmp_path, rng):
    log = TraceLog(f_star=10.0)
    t = 0
    for step in range(50):
        t += int(rng.integers(1, 10**12))
        log.append(step=step, point=rng.uniform(-1, 1, 3),
                   f_value=float(rng.uniform(-5, 5)), elapsed_ns=t,
                   delta=float(rng.uniform(0, 1)))
    path = tmp_path / "trace.csv"
    write_trace_csv(path, log.records)
    back = read_trace_csv(path)
    for a, b in zip(back, log.records):
        assert a.point == b.point  # repr round trip is exact
        assert a.f_value == b.f_value
        assert a.elapsed_ns == b.elapsed_ns  # int64-range nanoseconds
        assert a.cum_regret == b.cum_regret


def test_run_result_accessors():
    res = RunResult(optimizer="random", objective="toy", seed=3,
                    records=_hand_trace(), f_star=1.0)
    assert res.n_evals == 3
    assert res.best_value == 0.5
    np.testing.assert_array_equal(res.values(), [0.2, 0.5, 0.5])
    np.testing.assert_array_equal(res.simple_regrets(), [0.8, 0.5, 0.5])
    assert res.elapsed_ns().dtype == np.int64
    assert np.all(np.diff(res.elapsed_ns()) >= 0)


def test_timing_breakdown_component_sum():
    t = TimingBreakdown(objective_ns=5, posterior_ns=7, acquisition_ns=1,
                        partition_ns=2, queue_ns=3, total_ns=30)
    assert t.components_sum() == 18
    assert t.components_sum() <= t.total_ns
    assert set(t.as_dict()) == {
        "objective_ns", "posterior_ns", "acquisition_ns", "partition_ns",
        "queue_ns", "total_ns",
    }
