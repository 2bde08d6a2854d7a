import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toeplitz_lab.errors import DegenerateExperimentError
from toeplitz_lab.rate_lab import (
    DISCRETE_GRID,
    fit_slope,
    run_rate_experiment,
    run_second_order_experiment,
    verdict_for,
)
from toeplitz_lab.spectral_models import Arfima0d0, Constant, FRBm
from toeplitz_lab.toeplitz_continuous import OperatorTraceSpec, exact_trace_m2
from toeplitz_lab.toeplitz_discrete import TraceSpec

ARFIMA_PAIR = TraceSpec((Arfima0d0(1.0, 0.1), Arfima0d0(1.0, 0.1)), model_id="arfima-0.1")


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(0.05, 3.0))
def test_slope_fit_recovers_exponent(c, gamma):
    Ts = np.array([64, 128, 256, 512, 1024], dtype=float)
    slope, stderr = fit_slope(Ts, c * Ts ** (-gamma))
    assert slope == pytest.approx(-gamma, abs=1e-6)
    assert stderr < 1e-6


def test_verdict_rule():
    assert verdict_for(-0.55, 0.01, 0.6) == "consistent"
    assert verdict_for(-0.45, 0.01, 0.6) == "inconsistent"
    assert verdict_for(-0.45, 0.1, 0.6) == "consistent"
    assert verdict_for(-0.45, 0.1, None) == "o1_only"


def test_arfima_rate_experiment():
    fit = run_rate_experiment(ARFIMA_PAIR, DISCRETE_GRID, "T4-2")
    assert len(fit.Ts) >= 4
    assert fit.fitted_slope == pytest.approx(-0.6, abs=0.1)
    assert fit.theoretical_gamma == pytest.approx(0.6)
    assert fit.verdict == "consistent"
    assert fit.as_dict()["model_id"] == "arfima-0.1"


def test_fm_bound_is_weaker_than_observed_rate():
    fit = run_rate_experiment(ARFIMA_PAIR, DISCRETE_GRID, "FM")
    assert fit.theoretical_gamma == pytest.approx(0.3)
    assert -fit.fitted_slope > fit.theoretical_gamma


def test_o1_theorem_records_slope_without_verdict():
    fit = run_rate_experiment(ARFIMA_PAIR, DISCRETE_GRID, "T1")
    assert fit.verdict == "o1_only" and fit.theoretical_gamma is None


def test_verdict_is_deterministic():
    a = run_rate_experiment(ARFIMA_PAIR, DISCRETE_GRID, "T4-2")
    b = run_rate_experiment(ARFIMA_PAIR, DISCRETE_GRID, "T4-2")
    assert a == b


def test_constant_pair_is_degenerate():
    with pytest.raises(DegenerateExperimentError):
        run_rate_experiment(TraceSpec((Constant(1.0), Constant(2.0))), DISCRETE_GRID, "T4-2")


def test_short_grid_is_degenerate():
    with pytest.raises(DegenerateExperimentError):
        run_rate_experiment(ARFIMA_PAIR, [256, 512, 1024], "T4-2")


def test_continuous_rate_experiment():
    spec = OperatorTraceSpec((FRBm(1.0, 0.1, 1.0), FRBm(1.0, 0.1, 1.0)))
    rows = []
    fit = run_rate_experiment(spec, [25, 50, 100, 200], "T5-3", rows=rows)
    assert fit.fitted_slope == pytest.approx(-0.8, abs=0.15)
    assert fit.theoretical_gamma == pytest.approx(0.6)
    assert fit.verdict == verdict_for(fit.fitted_slope, fit.slope_stderr, 0.6)
    assert [r.domain for r in rows] == ["line"] * 4


def test_discrete_second_order_residual_halves():
    table = run_second_order_experiment("discrete", {"d1": 0.15, "d2": 0.15}, [512, 1024, 2048, 4096])
    assert table.decreasing
    assert table.normalized_residuals[-1] < 0.5 * table.normalized_residuals[0]


def test_continuous_second_order_residual_decreases():
    table = run_second_order_experiment("continuous", {"alpha1": 0.1, "alpha2": 0.1}, [50, 100, 200, 400, 800])
    assert table.decreasing


def test_near_pole_prediction_within_factor_two():
    table = run_second_order_experiment("continuous", {"alpha1": 0.24, "alpha2": 0.24}, [25, 50, 100, 200])
    for row in table.rows:
        assert 0.5 < row.predicted_S / row.S < 2.0
    f = FRBm(1.0, 0.24, 1.0)
    assert table.rows[0].S == pytest.approx(exact_trace_m2(f, f, 25.0), rel=1e-12)
