import json

import pytest

from relapprox.errors import CalibrationError, ConstructionError
from relapprox.generators import intervals
from relapprox.harness import (
    CalibrationCase,
    ExperimentSpec,
    calibrate_constants,
    load_suite,
    minimal_sample_size_search,
    monte_carlo_failure,
    run_sweep,
    suite_sha256,
    system_from_descriptor,
    wilson_interval,
    wilson_width,
    write_constants_json,
    write_sweep_csv,
)
from relapprox.sampling import ApproxParams, basic_sample_size, load_constants
from relapprox.set_system import write_json


# --- Wilson intervals -----------------------------------------------------------


def test_wilson_contains_estimate():
    lo, hi = wilson_interval(3, 100)
    assert lo < 0.03 < hi
    assert 0.0 <= lo and hi <= 1.0


def test_wilson_zero_failures_starts_at_zero():
    lo, hi = wilson_interval(0, 50)
    assert lo == 0.0 and 0 < hi < 0.12


def test_wilson_shrinks_with_trials():
    assert wilson_width(5, 400) < wilson_width(5, 100) < wilson_width(5, 25)


def test_wilson_validation():
    with pytest.raises(ConstructionError):
        wilson_interval(5, 4)


# --- Monte Carlo ------------------------------------------------------------------


def test_full_sample_never_fails():
    system = intervals(30)
    res = monte_carlo_failure(system, ApproxParams(0.2, 0.3, 0.2), 30, 50, master_seed=1)
    assert res.failures == 0
    assert res.failure_rate == 0.0


def test_oversized_t_is_an_error_without_replacement():
    with pytest.raises(ConstructionError, match="replacement"):
        monte_carlo_failure(intervals(10), ApproxParams(0.2, 0.3, 0.2), 11, 5, 0)
    res = monte_carlo_failure(
        intervals(10), ApproxParams(0.2, 0.3, 0.2), 25, 5, 0, mode="with"
    )
    assert res.trials == 5


def test_worker_count_does_not_change_results():
    system = intervals(60)
    params = ApproxParams(0.15, 0.3, 0.2)
    one = monte_carlo_failure(system, params, 25, 40, master_seed=9, workers=1)
    eight = monte_carlo_failure(system, params, 25, 40, master_seed=9, workers=8)
    assert one == eight


def test_aggregates_recomputable_from_rows():
    from relapprox.harness import monte_carlo_rows

    system = intervals(60)
    params = ApproxParams(0.15, 0.3, 0.2)
    rows = monte_carlo_rows(system, params, 25, 40, master_seed=9, workers=4)
    agg = monte_carlo_failure(system, params, 25, 40, master_seed=9)
    assert agg.failures == sum(r.failed for r in rows)
    assert [r.trial for r in rows] == list(range(40))
    again = monte_carlo_rows(system, params, 25, 40, master_seed=9)
    assert rows == again
    # failed iff the trial's worst ratio exceeds delta
    assert all(r.failed == (r.worst_ratio > params.delta) for r in rows)


def test_failure_rate_nonincreasing_in_t_with_shared_seeds():
    system = intervals(80)
    params = ApproxParams(0.15, 0.25, 0.2)
    rates = []
    for t in (10, 30, 60):
        res = monte_carlo_failure(system, params, t, 120, master_seed=4, cell_index=0)
        rates.append((res.failure_rate, wilson_width(res.failures, res.trials)))
    for (r1, w1), (r2, w2) in zip(rates, rates[1:]):
        assert r2 <= r1 + 3 * (w1 + w2)


# --- minimal size search ------------------------------------------------------------


def test_minimal_size_search_bracket_and_bound():
    system = intervals(80)
    params = ApproxParams(0.2, 0.4, 0.3)
    t = minimal_sample_size_search(system, params, trials=60, master_seed=7)
    assert 1 <= t <= system.n
    assert t <= min(system.n, basic_sample_size(params, len(system)))
    again = minimal_sample_size_search(system, params, trials=60, master_seed=7)
    assert t == again


# --- sweeps and CSV -----------------------------------------------------------------


def make_spec(tmp_path, **overrides):
    doc = {
        "system": {"family": "intervals", "n": 50},
        "eps": [0.2],
        "delta": [0.3, 0.5],
        "gamma": [0.2],
        "t": [20, 40],
        "trials": 30,
        "master_seed": 12,
    }
    doc.update(overrides)
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(doc))
    return ExperimentSpec.from_json(path)


def test_sweep_rows_and_csv_columns(tmp_path):
    spec = make_spec(tmp_path)
    rows = run_sweep(spec)
    assert len(rows) == 4  # 2 deltas x 2 t values
    out = tmp_path / "out.csv"
    write_sweep_csv(rows, out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "eps,delta,gamma,t,trials,failures,failure_rate,wilson_lo,wilson_hi,seed"
    assert len(lines) == 5


def test_sweep_byte_identical_across_workers(tmp_path):
    csvs = []
    for workers in (1, 8):
        spec = make_spec(tmp_path, workers=workers)
        out = tmp_path / f"out{workers}.csv"
        write_sweep_csv(run_sweep(spec), out)
        csvs.append(out.read_bytes())
    assert csvs[0] == csvs[1]


def test_formula_sweep_uses_capped_size(tmp_path):
    spec = make_spec(tmp_path, t=[], formula="basic")
    rows = run_sweep(spec)
    assert all(r.t == 50 for r in rows)  # basic size exceeds n here, capped


def test_spec_validation(tmp_path):
    with pytest.raises(ConstructionError):
        make_spec(tmp_path, t=[], formula=None)
    with pytest.raises(ConstructionError):
        make_spec(tmp_path, t=[5], formula="basic")


def test_system_descriptor_from_file(tmp_path):
    path = tmp_path / "sys.json"
    write_json(intervals(7), path)
    system = system_from_descriptor({"path": str(path)})
    assert len(system) == 29


# --- calibration ----------------------------------------------------------------------


def tiny_suite():
    return [
        CalibrationCase(
            "intervals-implicit",
            {"family": "implicit_intervals", "n": 1500},
            ApproxParams(0.15, 0.5, 0.25),
            d=2,
            use_for=("c", "c1"),
        ),
        CalibrationCase(
            "intervals-chain",
            {"family": "intervals", "n": 90},
            ApproxParams(0.25, 0.4, 0.25),
            d=2,
            use_for=("c2", "c3"),
        ),
    ]


@pytest.mark.slow
def test_calibration_smoke(tmp_path):
    constants, provenance = calibrate_constants(tiny_suite(), trials=60, master_seed=3)
    assert constants.c >= 1 and constants.c3 >= 1
    path = tmp_path / "constants.json"
    write_constants_json(constants, provenance, path)
    loaded = load_constants(path)
    assert loaded == constants
    doc = json.loads(path.read_text())
    assert doc["calibrated"] is True
    assert doc["provenance"]["suite_sha256"] == suite_sha256(tiny_suite(), 60, 3)


def test_calibration_requires_cases_per_kind():
    with pytest.raises(CalibrationError, match="no calibration cases"):
        calibrate_constants(
            [tiny_suite()[0]], trials=5, master_seed=0
        )  # no c2 case


def test_suite_roundtrip(tmp_path):
    cases = tiny_suite()
    doc = {
        "trials": 40,
        "master_seed": 17,
        "cases": [c.descriptor() for c in cases],
    }
    path = tmp_path / "suite.json"
    path.write_text(json.dumps(doc))
    loaded, trials, seed = load_suite(path)
    assert trials == 40 and seed == 17
    assert loaded == cases
