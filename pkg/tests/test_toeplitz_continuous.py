import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toeplitz_lab.errors import DiscretizationError, ParameterError, TheoremInapplicableError
from toeplitz_lab.spectral_models import FRBm, fourier_transform, product_integral
from toeplitz_lab.toeplitz_continuous import (
    CovarianceTable,
    OperatorTraceSpec,
    discretize,
    exact_trace_m2,
    frbm_second_order_constant,
    nystrom_trace_product,
    operator_limit,
    operator_rows,
    predicted_rate_continuous,
    second_order_expansion_continuous,
)

CAUCHY = FRBm(1 / math.pi, 0.0, 1.0)  # covariance exp(-|t|)
FRBM = FRBm(1.0, 0.1, 1.0)


def cauchy_pair_trace(T):
    # int_{-T}^{T} (1 - |t|/T) exp(-2|t|) dt by antiderivatives
    e = math.exp(-2 * T)
    return (1 - e) - (2 / T) * (0.25 - e * (2 * T + 1) / 4)


# -- discretization ---------------------------------------------------------------


def test_discretization_is_symmetric():
    disc = discretize(FRBM, 5.0, 64)
    assert disc.kernel.shape == (64, 64)
    np.testing.assert_allclose(disc.kernel, disc.kernel.T, rtol=0, atol=0)
    assert disc.weights.sum() == pytest.approx(5.0, rel=1e-14)


def test_single_operator_trace_is_total_integral():
    assert nystrom_trace_product([CAUCHY], 7.0) == pytest.approx(1.0, abs=1e-8)
    assert nystrom_trace_product([FRBM], 3.0) == pytest.approx(fourier_transform(FRBM, 0.0), rel=1e-8)


def test_single_operator_trace_at_512_nodes():
    disc = discretize(CAUCHY, 4.0, 512)
    trace = float(np.sum(disc.weights * np.diag(disc.kernel))) / 4.0
    assert trace == pytest.approx(1.0, abs=1e-8)


def test_cross_method_agreement():
    exact = exact_trace_m2(FRBM, FRBM, 10.0)
    assert nystrom_trace_product([FRBM, FRBM], 10.0) == pytest.approx(exact, rel=1e-5)


def test_cauchy_pair_both_methods():
    for T in (1.0, 5.0, 20.0):
        assert exact_trace_m2(CAUCHY, CAUCHY, T) == pytest.approx(cauchy_pair_trace(T), rel=1e-10)
    assert nystrom_trace_product([CAUCHY, CAUCHY], 5.0) == pytest.approx(cauchy_pair_trace(5.0), rel=1e-5)


def test_four_operator_product_converges_monotonically():
    value, history = nystrom_trace_product([FRBm(1.0, 0.05, 1.0)] * 4, 5.0, return_history=True)
    assert np.isfinite(value) and value > 0
    seq = [v for _, v in history]
    assert all(b < a for a, b in zip(seq, seq[1:]))


def test_node_cap_failure_reports_iterates():
    with pytest.raises(DiscretizationError) as info:
        nystrom_trace_product([FRBM, FRBM], 10.0, tol=1e-15, max_nodes=128)
    assert len(info.value.iterates) == 2


def test_covariance_table_accuracy_and_range():
    table = CovarianceTable(FRBM, 20.0)
    ts = np.array([0.0, 0.3, 2.5, 19.0])
    np.testing.assert_allclose(table(ts), fourier_transform(FRBM, ts), rtol=1e-7)
    with pytest.raises(ParameterError):
        table(25.0)


# -- exact m = 2 traces -------------------------------------------------------------


def test_exact_trace_approaches_limit():
    limit = operator_limit(OperatorTraceSpec((FRBM, FRBM)))
    gaps = [abs(exact_trace_m2(FRBM, FRBM, T) - limit) for T in (10.0, 20.0, 40.0, 80.0)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_operator_limit_formula():
    spec = OperatorTraceSpec((FRBM, FRBM))
    assert operator_limit(spec) == pytest.approx(2 * math.pi * product_integral([FRBM, FRBM]), rel=1e-15)


def test_operator_rows_are_line_rows():
    rows = operator_rows(OperatorTraceSpec((CAUCHY, CAUCHY), "cauchy"), [2.5, 5.0])
    assert [r.domain for r in rows] == ["line", "line"]
    assert rows[0].T == 2.5 and rows[0].model_id == "cauchy"
    assert rows[1].S == pytest.approx(cauchy_pair_trace(5.0), rel=1e-10)


@settings(max_examples=8, deadline=None)
@given(st.floats(0.02, 0.2), st.floats(0.6, 2.0), st.floats(2.0, 60.0))
def test_triangle_weight_bound(alpha, beta, T):
    # covariances are positive here, so int |r1 r2| = 2 pi int f1 f2
    f = FRBm(1.0, alpha, beta)
    bound = 2 * math.pi * product_integral([f, f])
    assert exact_trace_m2(f, f, T) <= bound


# -- expansion and rates ------------------------------------------------------------


def test_expansion_constant_symmetric():
    assert frbm_second_order_constant(0.1, 0.2, 1.5, 0.5) == pytest.approx(
        frbm_second_order_constant(0.2, 0.1, 0.5, 1.5), rel=1e-15
    )


def test_expansion_pole_cancellation():
    near = second_order_expansion_continuous(0.249, 0.249, 1, 1, 1, 1, 50.0)
    less = second_order_expansion_continuous(0.24, 0.24, 1, 1, 1, 1, 50.0)
    assert 0.5 < near.predicted_S / less.predicted_S < 2
    assert near.leading > 10 * near.predicted_S


def test_expansion_residual_decreases():
    normalized = []
    for T in (50.0, 100.0, 200.0, 400.0):
        exp = second_order_expansion_continuous(0.1, 0.1, 1, 1, 1, 1, T)
        normalized.append(abs(exact_trace_m2(FRBM, FRBM, T) - exp.predicted_S) / T ** (-exp.exponent))
    assert all(b < a for a, b in zip(normalized, normalized[1:]))


def test_expansion_inapplicable():
    with pytest.raises(TheoremInapplicableError):
        second_order_expansion_continuous(0.3, 0.25, 1, 1, 1, 1, 10.0)


def test_rate_table():
    assert predicted_rate_continuous([FRBM, FRBM], "M53").gamma == pytest.approx(0.3)
    assert predicted_rate_continuous([FRBM, FRBM], "T5-3").gamma == pytest.approx(0.6)
    quad = [FRBm(1.0, 0.05, 1.0)] * 4
    assert predicted_rate_continuous(quad, "T5-1.B4").gamma == pytest.approx(0.15)
    assert predicted_rate_continuous([FRBM, FRBM], "M51").o1_only


def test_rate_inapplicable():
    with pytest.raises(TheoremInapplicableError):
        predicted_rate_continuous([FRBm(1.0, 0.3, 1.0)] * 2, "T5-3")
