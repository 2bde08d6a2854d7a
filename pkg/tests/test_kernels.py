import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import beta as beta_fn

from toeplitz_lab.errors import ParameterError
from toeplitz_lab.kernels import (
    KernelSample,
    dirichlet,
    dirichlet_bound_grid,
    dirichlet_bound_ratio,
    fejer,
    fejer_mass,
    fejer_power_moment,
    fejer_tail,
    kernel_checks,
    lemma1_integral,
    lemma1_scaling_check,
    parseval_bridge,
    periodic_fejer,
    phi_abs_mass,
    phi_abs_outside,
    phi_mass,
    phi_T,
)
from toeplitz_lab.spectral_models import Arfima0d0, ArfimaPDQ, CosineSeries

TS = (10.0, 100.0, 1000.0, 10000.0)


def test_dirichlet_at_origin():
    assert dirichlet(7.5, 0.0) == 7.5


def test_dirichlet_zero():
    assert abs(dirichlet(10.0, 2 * math.pi / 10)) < 1e-13


def test_kernel_sample_record():
    s = KernelSample(10.0, 0.3, float(fejer(10.0, 0.3)))
    assert s.value >= 0


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 1e4), st.floats(-50, 50))
def test_fejer_dirichlet_identity(T, u):
    d = dirichlet(T, u)
    assert fejer(T, u) == pytest.approx(d * d / (2 * math.pi * T), rel=1e-12, abs=1e-300)
    assert abs(d) <= T * (1 + 1e-15)
    assert fejer(T, u) >= 0


def test_dirichlet_power_bound_grid():
    worst, count = dirichlet_bound_grid()
    assert count >= 1000
    assert worst <= 1.0


@settings(max_examples=100, deadline=None)
@given(st.floats(1.0, 1e4), st.floats(1e-3, 3.0), st.sampled_from([0.25, 0.5, 0.75]))
def test_dirichlet_power_bound_property(T, u, delta):
    assert dirichlet_bound_ratio(T, u, delta) <= 1.0 + 1e-12


@pytest.mark.parametrize("T", TS)
def test_fejer_unit_mass(T):
    assert fejer_mass(T) == pytest.approx(1.0, abs=1e-6)


def test_fejer_tail_routes_agree():
    for T in (10.0, 100.0, 1000.0):
        assert fejer_tail(T, 1.0, "closed") == pytest.approx(fejer_tail(T, 1.0, "quadrature"), rel=1e-8)


def test_fejer_tail_is_order_one_over_T():
    scaled = [T * fejer_tail(T) for T in TS]
    assert max(scaled) < 2 * min(scaled)


def test_fejer_power_moment_bounded():
    moments = [fejer_power_moment(T, 0.5) for T in TS]
    assert max(moments) < 2 * min(moments)


def test_periodic_fejer_integrates_to_one():
    n, T = 4096, 33
    grid = -math.pi + 2 * math.pi * np.arange(n) / n
    assert np.sum(periodic_fejer(T, grid)) * 2 * math.pi / n == pytest.approx(1.0, rel=1e-12)


# -- Phi_T ----------------------------------------------------------------------


def test_phi_needs_three_factors():
    with pytest.raises(ParameterError):
        phi_T(10.0, np.array([0.1]))


def test_phi_value():
    u = np.array([0.3, -0.7])
    expected = dirichlet(10.0, 0.3) * dirichlet(10.0, -0.7) * dirichlet(10.0, -0.4) / ((2 * math.pi) ** 2 * 10.0)
    assert phi_T(10.0, u) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("T", [10.0, 100.0])
def test_phi_unit_mass(T):
    assert phi_mass(T) == pytest.approx(1.0, abs=1e-4)


def test_phi_absolute_mass_bounded():
    masses = [phi_abs_mass(T)[0] for T in (10.0, 100.0, 1000.0)]
    assert max(masses) < 2.0


def test_phi_mass_outside_box_shrinks():
    assert phi_abs_outside(200.0) < phi_abs_outside(20.0)


# -- lemma on the two-point power integral -----------------------------------------


def two_point_closed_form(a, b):
    s = a + b - 1
    return beta_fn(1 - a, s) + beta_fn(1 - b, s) + beta_fn(1 - a, 1 - b)


def test_lemma1_value():
    assert lemma1_integral(0.6, 0.6, 1.0) == pytest.approx(two_point_closed_form(0.6, 0.6), rel=1e-9)


def test_lemma1_invariance():
    vals = [lemma1_scaling_check(0.6, 0.6, y) for y in (0.5, 1.0, 2.0, 4.0)]
    assert max(vals) - min(vals) < 1e-5


def test_lemma1_precondition():
    with pytest.raises(ParameterError):
        lemma1_integral(0.4, 0.5, 1.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 0.9), st.floats(0.2, 0.9), st.floats(0.1, 10.0))
def test_lemma1_doubling(a, b, y):
    if a + b <= 1.05:
        return
    ratio = lemma1_integral(a, b, 2 * y) / lemma1_integral(a, b, y)
    assert ratio == pytest.approx(2 ** (1 - a - b), rel=1e-6)


# -- Parseval bridge -------------------------------------------------------------


@pytest.mark.parametrize(
    "f1, f2",
    [
        (ArfimaPDQ(0.0, ar=(0.5,)), ArfimaPDQ(0.0, ma=(0.4,))),
        (ArfimaPDQ(0.0, ar=(0.5,)), CosineSeries((1.0, 0.3))),
        (CosineSeries((1.0, 0.5, 0.25)), CosineSeries((2.0, -0.3))),
    ],
)
def test_parseval_bridge(f1, f2):
    lag_sum, integral, rel = parseval_bridge(f1, f2, 64)
    assert rel < 1e-6


def test_parseval_bridge_rejects_poles():
    with pytest.raises(ParameterError):
        parseval_bridge(Arfima0d0(1.0, 0.1), Arfima0d0(1.0, 0.1), 32)


def test_kernel_checks_all_pass():
    checks = kernel_checks()
    assert checks and all(c.passed for c in checks), [c.as_dict() for c in checks if not c.passed]
