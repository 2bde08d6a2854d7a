import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import toeplitz
from scipy.special import gamma, gammaln

from toeplitz_lab.errors import NotPositiveDefiniteError, ParameterError, TheoremInapplicableError
from toeplitz_lab.spectral_models import (
    Arfima0d0,
    ArfimaPDQ,
    Constant,
    CosineSeries,
    FGn,
    LinearCombination,
    PowerLogLaw,
    fourier_coefficients,
)
from toeplitz_lab.toeplitz_discrete import (
    ExperimentRow,
    TraceSpec,
    arfima_second_order_constant,
    build_matrix,
    delta,
    limit_value,
    normalized_trace,
    predicted_rate,
    second_order_expansion_discrete,
    trace_product,
    trace_product_inverse,
    trace_rows,
)

WHITE = Constant(1 / (2 * math.pi))

# frozen from the Gamma-function autocovariance and scipy.linalg.toeplitz
ARFIMA_PAIR_S64 = 43.050615806699824
ARFIMA_D02_FIRST_ROW = (6.90324484, 1.72581121, 1.15054081)
MA1_INVERSE_S = {64: 0.20999610546847303, 128: 0.21110134812883338, 256: 0.21165396945901355}


def arfima_acv(sigma2, d, n):
    k = np.arange(n)
    return sigma2 * gamma(1 - 2 * d) / (gamma(d) * gamma(1 - d)) * np.exp(gammaln(k + d) - gammaln(k + 1 - d))


ZOO = [
    Constant(0.3),
    Arfima0d0(2 * math.pi, 0.1),
    Arfima0d0(1.0, 0.2),
    Arfima0d0(1.0, -0.3),
    ArfimaPDQ(0.15, ar=(0.5,)),
    ArfimaPDQ(0.0, ma=(-0.5,)),
    FGn(1.0, 0.7),
    FGn(1.0, 0.3),
    PowerLogLaw(0.3),
    PowerLogLaw(0.2, 1.0),
    CosineSeries((1.0, 0.5, 0.25)),
]


# -- matrices -------------------------------------------------------------------


def test_white_noise_matrix_is_identity():
    np.testing.assert_allclose(build_matrix(WHITE, 8).dense(), np.eye(8), atol=1e-15)


def test_cosine_generator_matrix_is_tridiagonal():
    m = build_matrix(CosineSeries((0.0, 1 / math.pi)), 4).dense()
    expected = np.diag(np.ones(3), 1) + np.diag(np.ones(3), -1)
    np.testing.assert_allclose(m, expected, atol=1e-14)


def test_arfima_first_row():
    np.testing.assert_allclose(build_matrix(Arfima0d0(2 * math.pi, 0.2), 3).coeffs, ARFIMA_D02_FIRST_ROW, rtol=1e-8)


def test_matrix_entries_and_matvec():
    mat = build_matrix(Arfima0d0(1.0, 0.2), 50)
    dense = mat.dense()
    assert dense[3, 17] == mat.entry(3, 17) == mat.coeffs[14]
    x = np.random.default_rng(0).standard_normal(50)
    np.testing.assert_allclose(mat.matvec(x), dense @ x, rtol=1e-12)


@pytest.mark.parametrize("f", ZOO[:9], ids=lambda f: f.kind)
def test_nonnegative_generators_give_psd_matrices(f):
    eig = np.linalg.eigvalsh(build_matrix(f, 256).dense())
    assert eig.min() >= -1e-8


# -- traces -----------------------------------------------------------------------


def test_single_generator_trace_is_zeroth_coefficient():
    f = Arfima0d0(1.0, 0.3)
    assert trace_product(TraceSpec((f,)), 37) == pytest.approx(fourier_coefficients(f, 0)[0], rel=1e-14)


def test_white_noise_factor_drops_out():
    g = Arfima0d0(1.0, 0.2)
    for T in (16, 100):
        assert trace_product(TraceSpec((WHITE, g)), T) == pytest.approx(fourier_coefficients(g, 0)[0], rel=1e-13)


def test_arfima_pair_against_dense_oracle():
    spec = TraceSpec((Arfima0d0(2 * math.pi, 0.1), Arfima0d0(2 * math.pi, 0.1)))
    dense = trace_product(spec, 64, method="dense")
    fast = trace_product(spec, 64, method="fastm2")
    assert dense == pytest.approx(ARFIMA_PAIR_S64, rel=1e-12)
    assert fast == pytest.approx(dense, rel=1e-10)
    a = toeplitz(arfima_acv(2 * math.pi, 0.1, 64))
    assert np.trace(a @ a) / 64 == pytest.approx(ARFIMA_PAIR_S64, rel=1e-14)


def test_fft_route_matches_dense():
    f1, f2, f3 = Arfima0d0(1.0, 0.1), FGn(1.0, 0.6), ArfimaPDQ(0.0, ar=(0.4,))
    spec = TraceSpec((f1, f2, f3, f1))
    assert trace_product(spec, 300, method="fft") == pytest.approx(trace_product(spec, 300, method="dense"), rel=1e-10)


def test_fastm2_needs_two_generators():
    with pytest.raises(ParameterError):
        trace_product(TraceSpec((WHITE, WHITE, WHITE)), 8, method="fastm2")


def test_dimension_mismatch():
    with pytest.raises(ParameterError):
        TraceSpec((WHITE, WHITE), (1,))


def test_inverse_of_same_generator_cancels():
    f = Arfima0d0(1.0, 0.2)
    spec = TraceSpec((f, f), (-1, 1))
    for T in (32, 512):
        assert trace_product_inverse(spec, T) == pytest.approx(1.0, abs=1e-10)
    assert limit_value(spec) == pytest.approx(1.0, rel=1e-12)
    assert delta(spec, 128) < 1e-10


def test_ma1_inverse_trace_rate():
    spec = TraceSpec((ArfimaPDQ(0.0, ma=(-0.5,)), WHITE), (-1, 1))
    scaled = []
    for T, expected in MA1_INVERSE_S.items():
        assert trace_product_inverse(spec, T) == pytest.approx(expected, rel=1e-10)
        scaled.append(T * delta(spec, T))
    assert max(scaled) < 1.01 * min(scaled)


def test_long_memory_inverse_delta_decreases():
    spec = TraceSpec((Arfima0d0(2 * math.pi, 0.2), Arfima0d0(2 * math.pi, 0.1)), (-1, 1))
    d = [delta(spec, T) for T in (64, 128, 256, 512, 1024)]
    assert all(b < a for a, b in zip(d, d[1:]))


def test_inverse_of_vanishing_generator_rejected():
    with pytest.raises((ParameterError, NotPositiveDefiniteError)):
        TraceSpec((Arfima0d0(1.0, -0.3), WHITE), (-1, 1))


def test_constant_pair_is_exact():
    spec = TraceSpec((Constant(0.7), Constant(1.3)))
    assert all(delta(spec, T) == 0.0 for T in (1, 10, 256, 4096))


def test_arfima_delta_decreases():
    spec = TraceSpec((Arfima0d0(1.0, 0.1), Arfima0d0(1.0, 0.1)))
    assert 0 < delta(spec, 256) < delta(spec, 64)


def test_trace_rows_schema():
    spec = TraceSpec((Arfima0d0(1.0, 0.1), Arfima0d0(1.0, 0.1)), model_id="arf")
    rows = trace_rows(spec, [16, 32])
    assert [r.T for r in rows] == [16, 32]
    assert tuple(rows[0].as_dict()) == ExperimentRow.FIELDS
    assert rows[0].domain == "circle" and rows[0].tau_signature == "++"


# -- rate predictions ------------------------------------------------------------


def test_fm_rate():
    spec = TraceSpec((Arfima0d0(1.0, 0.1), Arfima0d0(1.0, 0.1)))
    assert predicted_rate(spec, "FM").gamma == pytest.approx(0.3)


def test_t42_rate():
    spec = TraceSpec((PowerLogLaw(0.2), PowerLogLaw(0.2)))
    assert predicted_rate(spec, "T4-2").gamma == pytest.approx(0.6)


def test_b5_rate():
    spec = TraceSpec((PowerLogLaw(0.1),) * 4)
    assert predicted_rate(spec, "B5").gamma == pytest.approx(0.15)


def test_fm_inapplicable():
    spec = TraceSpec((Arfima0d0(1.0, 0.3), Arfima0d0(1.0, 0.25)))
    with pytest.raises(TheoremInapplicableError):
        predicted_rate(spec, "FM")


def test_o1_theorems():
    assert predicted_rate(TraceSpec((WHITE, WHITE)), "T1").o1_only


def test_t41_log_flag_at_equality():
    spec = TraceSpec((Constant(1.0), Constant(1.0)))
    pred = predicted_rate(spec, "T4-1", (2.0, 2.0))
    assert pred.gamma == 1.0


# -- second-order expansion ---------------------------------------------------------


def test_expansion_constant_symmetric():
    assert arfima_second_order_constant(0.1, 0.2, 1.0, 3.0) == pytest.approx(
        arfima_second_order_constant(0.2, 0.1, 3.0, 1.0), rel=1e-15
    )


def test_expansion_constant_formula():
    d1 = d2 = 0.1
    lead = 2 * math.pi / (2 * math.cos(math.pi * 0.1) * math.gamma(0.2))
    expected = 2 * lead * lead / (2 * 0.2 * 0.6)
    assert arfima_second_order_constant(d1, d2, 2 * math.pi, 2 * math.pi) == pytest.approx(expected, rel=1e-14)


def test_expansion_removes_leading_error():
    d = 0.1
    spec = TraceSpec((Arfima0d0(2 * math.pi, d), Arfima0d0(2 * math.pi, d)))
    ratios = []
    for T in (256, 2048):
        exp = second_order_expansion_discrete(d, d, 2 * math.pi, 2 * math.pi, T)
        ratios.append(abs(normalized_trace(spec, T) - exp.predicted_S) / T ** (-exp.exponent))
    assert ratios[1] < ratios[0]


def test_expansion_inapplicable():
    with pytest.raises(TheoremInapplicableError):
        second_order_expansion_discrete(0.3, 0.2, 1.0, 1.0, 100)


# -- properties ---------------------------------------------------------------------

zoo_index = st.integers(0, len(ZOO) - 1)


@settings(max_examples=40, deadline=None)
@given(zoo_index, zoo_index, st.integers(1, 512))
def test_fastm2_matches_dense(i, j, T):
    spec = TraceSpec((ZOO[i], ZOO[j]))
    dense = trace_product(spec, T, method="dense")
    assert trace_product(spec, T, method="fastm2") == pytest.approx(dense, rel=1e-10, abs=1e-13)


@settings(max_examples=40, deadline=None)
@given(zoo_index, zoo_index, st.integers(1, 300))
def test_cyclic_symmetry(i, j, T):
    a = trace_product(TraceSpec((ZOO[i], ZOO[j])), T)
    b = trace_product(TraceSpec((ZOO[j], ZOO[i])), T)
    assert a == b


@settings(max_examples=30, deadline=None)
@given(zoo_index, zoo_index, zoo_index, st.floats(-3, 3), st.floats(-3, 3), st.integers(2, 200))
def test_linearity_in_one_slot(i, j, k, a, b, T):
    f1, f2, g = ZOO[i], ZOO[j], ZOO[k]
    mix = LinearCombination(((a, f1), (b, f2)))
    lhs = trace_product(TraceSpec((mix, g)), T)
    rhs = a * trace_product(TraceSpec((f1, g)), T) + b * trace_product(TraceSpec((f2, g)), T)
    scale = abs(a * trace_product(TraceSpec((f1, g)), T)) + abs(b * trace_product(TraceSpec((f2, g)), T))
    assert abs(lhs - rhs) <= 1e-10 * max(scale, 1e-300) + 1e-14


@settings(max_examples=15, deadline=None)
@given(st.floats(0.02, 0.24), st.floats(0.02, 0.24))
def test_delta_decreases_in_fm_regime(d1, d2):
    spec = TraceSpec((Arfima0d0(1.0, d1), Arfima0d0(1.0, d2)))
    d = [delta(spec, T) for T in (128, 256, 512, 1024, 2048, 4096)]
    assert all(b < a for a, b in zip(d, d[1:]))


@settings(max_examples=15, deadline=None)
@given(st.floats(-0.3, 0.4), st.integers(1, 512))
def test_inverse_identity(d, T):
    f = ArfimaPDQ(d, ar=(0.3,)) if d <= 0.3 else Arfima0d0(1.0, d)
    if d < 0:
        f = ArfimaPDQ(0.0, ar=(0.3,))
    assert trace_product_inverse(TraceSpec((f, f), (-1, 1)), T) == pytest.approx(1.0, abs=1e-10)
