"""Dirichlet, Fejer and product kernels with numerical checks of their identities.

Continuous-time kernels use the conventions

    D_T(u) = sin(T u / 2) / (u / 2),      F_T(u) = D_T(u)^2 / (2 pi T),
    Phi_T(u_1..u_{m-1}) = (2 pi)^{1-m} T^{-1} D_T(u_1)...D_T(u_{m-1}) D_T(u_1 + ... + u_{m-1}).

Most integrals are computed in the scaled variable ``v = T u`` where the
kernels no longer depend on ``T``; tails beyond the quadrature box are
handled with sine and cosine integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np
from scipy import integrate
from scipy.special import beta as beta_fn
from scipy.special import sici

from ._numerics import composite_legendre
from .errors import ParameterError
from .spectral_models import SpectralDensity, evaluate, fourier_coefficients

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class KernelSample:
    T: float
    u: float
    value: float


@dataclass(frozen=True)
class KernelCheck:
    """Outcome of one kernel identity check."""

    name: str
    passed: bool
    achieved: float
    tolerance: float
    detail: str = ""

    def as_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "achieved": float(self.achieved), "tolerance": float(self.tolerance), "detail": self.detail}


def _check_T(T):
    if not T > 0:
        raise ParameterError("T must be positive")


def _sinc_half(v):
    """``sin(v/2)/(v/2)`` with value 1 at the origin."""
    return np.sinc(np.asarray(v, dtype=float) / TWO_PI)


def dirichlet(T: float, u):
    """Dirichlet kernel ``sin(T u/2)/(u/2)``, equal to ``T`` at ``u = 0``."""
    _check_T(T)
    return T * _sinc_half(T * np.asarray(u, dtype=float))


def fejer(T: float, u):
    """Fejer kernel ``D_T(u)^2 / (2 pi T)``; nonnegative with unit mass."""
    return dirichlet(T, u) ** 2 / (TWO_PI * T)


def phi_T(T: float, u):
    """Product kernel of order ``m = len(u) + 1``; ``u`` may carry extra leading axes."""
    _check_T(T)
    u = np.asarray(u, dtype=float)
    m = u.shape[-1] + 1
    if m < 3:
        raise ParameterError("Phi_T needs m >= 3, i.e. at least two arguments")
    prod = np.prod(dirichlet(T, u), axis=-1) * dirichlet(T, np.sum(u, axis=-1))
    return prod / (TWO_PI ** (m - 1) * T)


def periodic_fejer(T: int, u):
    """Fejer kernel of the circle, ``sin^2(T u/2) / (2 pi T sin^2(u/2))``."""
    u = np.asarray(u, dtype=float)
    num = np.sin(T * u / 2) ** 2
    den = np.sin(u / 2) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 1e-300, num / np.where(den > 1e-300, den, 1.0), float(T) ** 2)
    return out / (TWO_PI * T)


# ---------------------------------------------------------------------------
# Dirichlet bound
# ---------------------------------------------------------------------------


def dirichlet_bound_ratio(T, u, delta):
    """``|D_T(u)| / (2 T^delta |u|^(delta-1))``; at most one whenever the bound holds."""
    u = np.asarray(u, dtype=float)
    return np.abs(dirichlet(T, u)) / (2.0 * T**delta * np.abs(u) ** (delta - 1.0))


def dirichlet_bound_grid(Ts=None, us=None, deltas=(0.25, 0.5, 0.75)):
    """Largest bound ratio over a ``(T, u, delta)`` grid of about a thousand points."""
    Ts = np.geomspace(1.0, 1e4, 10) if Ts is None else np.asarray(Ts, dtype=float)
    us = np.geomspace(1e-4, 1e2, 34) * np.where(np.arange(34) % 2, -1.0, 1.0) if us is None else np.asarray(us, dtype=float)
    worst = 0.0
    count = 0
    for T in Ts:
        for d in deltas:
            r = dirichlet_bound_ratio(T, us, d)
            worst = max(worst, float(np.max(r)))
            count += r.size
    return worst, count


# ---------------------------------------------------------------------------
# Fejer kernel integrals
# ---------------------------------------------------------------------------


def _sin2_tail(W):
    """``int_W^inf sin^2(v/2)/(v/2)^2 dv`` in closed form."""
    si, ci = sici(W)
    return 2.0 / W - 2.0 * (math.cos(W) / W - (math.pi / 2 - si))


def _scaled_fejer_rule(upper, panel=np.pi, n=16):
    edges = np.linspace(0.0, upper, int(math.ceil(upper / panel)) + 1)
    return composite_legendre(edges, n)


def fejer_mass(T: float, cutoff: float = 1.0) -> float:
    """``int_R F_T(u) du``: quadrature on ``|u| <= cutoff`` plus the exact tail."""
    _check_T(T)
    W = T * cutoff
    v, w = _scaled_fejer_rule(W)
    core = np.sum(w * _sinc_half(v) ** 2)
    return float(2.0 * (core + _sin2_tail(W)) / TWO_PI)


def fejer_tail(T: float, cutoff: float = 1.0, method: str = "closed") -> float:
    """``int_{|u| >= cutoff} F_T(u) du`` by the closed form or by oscillatory quadrature."""
    _check_T(T)
    if method == "closed":
        return float(2.0 * _sin2_tail(T * cutoff) / TWO_PI)
    if method != "quadrature":
        raise ParameterError(f"unknown method {method!r}")
    # sin^2(Tu/2) = (1 - cos(Tu))/2
    plain = 1.0 / cutoff
    osc, _ = integrate.quad(lambda u: 1.0 / u**2, cutoff, np.inf, weight="cos", wvar=T, limlst=200)
    return float(2.0 * 4.0 * 0.5 * (plain - osc) / (TWO_PI * T))


def fejer_power_moment(T: float, alpha: float) -> float:
    """``T^alpha int_0^1 F_T(u) u^alpha du``, bounded in ``T`` for ``alpha < 1``."""
    _check_T(T)
    if not 0 < alpha < 2:
        raise ParameterError("alpha must lie in (0, 2)")
    # scaled variable v = T u on [0, T]; integrand T^{-1} v^alpha F_1(v)
    v, w = _scaled_fejer_rule(T)
    vals = _sinc_half(v) ** 2 * v**alpha / TWO_PI
    return float(np.sum(w * vals))


# ---------------------------------------------------------------------------
# Phi_T for m = 3
# ---------------------------------------------------------------------------


def _cos_over_v_tail(L, shift):
    """``int_L^inf cos(v + shift) / v dv`` for ``L > 0``."""
    si, ci = sici(L)
    return -np.cos(shift) * ci - np.sin(shift) * (np.pi / 2 - si)


def _inner_tail(x, W):
    """``int_W^inf d(v) d(x + v) dv`` with ``d(v) = sin(v/2)/(v/2)``, for ``|x| < W``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    zero = x == 0
    out[zero] = _sin2_tail(W)
    xs = x[~zero]
    # 4 sin(v/2) sin((x+v)/2) = 2 [cos(x/2) - cos(v + x/2)], then partial fractions in v
    log_part = np.cos(xs / 2) * np.log((xs + W) / W)
    osc_part = _cos_over_v_tail(W, xs / 2) - _cos_over_v_tail(W + xs, -xs / 2)
    out[~zero] = 2.0 * (log_part - osc_part) / xs
    return out


def phi_mass(T: float, outer: float = 100.0, inner: float = 200.0) -> float:
    """``int_{R^2} Phi_T`` for ``m = 3`` (exactly one in the limit of no truncation).

    The inner integral uses quadrature on ``[-inner, inner]`` (scaled
    variable) with closed-form tails; the outer integral uses quadrature on
    ``[-outer, outer]`` and, outside it, the Fejer tail that the inner
    integral reduces to.
    """
    _check_T(T)
    if not inner > outer:
        raise ParameterError("inner box must exceed the outer box")
    v1, w1 = composite_legendre(np.linspace(-outer, outer, int(math.ceil(2 * outer / np.pi)) + 1), 16)
    v2, w2 = composite_legendre(np.linspace(-inner, inner, int(math.ceil(2 * inner / np.pi)) + 1), 16)
    d2 = _sinc_half(v2)
    total = 0.0
    for rows in np.array_split(np.arange(v1.size), max(1, v1.size // 256)):
        x = v1[rows]
        inner_vals = (_sinc_half(x[:, None] + v2[None, :]) * d2[None, :]) @ w2
        inner_vals += _inner_tail(x, inner) + _inner_tail(-x, inner)
        total += np.sum(w1[rows] * _sinc_half(x) * inner_vals)
    outer_tail = 2.0 * TWO_PI * _sin2_tail(outer)
    return float((total + outer_tail) / TWO_PI**2)


def _phi_abs_box(half_width, exclude=0.0, panel=2 * np.pi, n=16, chunk=512):
    """``int |Phi_1|`` over the scaled box ``[-L, L]^2`` minus ``[-exclude, exclude]^2``."""
    def rule(lo, hi):
        return composite_legendre(np.linspace(lo, hi, max(1, int(math.ceil((hi - lo) / panel))) + 1), n)

    if exclude > 0:
        parts = [rule(-half_width, -exclude), rule(-exclude, exclude), rule(exclude, half_width)]
        v = np.concatenate([p[0] for p in parts])
        w = np.concatenate([p[1] for p in parts])
        outside = np.abs(v) > exclude
    else:
        v, w = rule(-half_width, half_width)
        outside = np.zeros(v.size, dtype=bool)
    d = _sinc_half(v)
    total = 0.0
    for rows in np.array_split(np.arange(v.size), max(1, v.size // chunk)):
        block = np.abs(d[rows, None] * d[None, :] * _sinc_half(v[rows, None] + v[None, :]))
        if exclude > 0:
            # keep points with at least one coordinate outside the small box
            block = block * (outside[rows, None] | outside[None, :])
        total += w[rows] @ block @ w
    return float(total / TWO_PI**2)


def phi_abs_mass(T: float, box: float = 50.0, max_scaled: float = 400.0):
    """``int |Phi_T|`` over ``[-box, box]^2``, extrapolated in the box size.

    Returns ``(value, truncated_value)``; the scaled box is capped at
    ``max_scaled`` and the missing ``O(1/L)`` tail is removed by Richardson
    extrapolation between ``L/2`` and ``L``.
    """
    _check_T(T)
    L = min(box * T, max_scaled)
    a_half = _phi_abs_box(L / 2)
    a_full = _phi_abs_box(L)
    return 2 * a_full - a_half, a_full


def phi_abs_outside(T: float, delta: float = 0.5, max_scaled: float = 800.0):
    """``int |Phi_T|`` over the complement of ``E_delta = {|u_i| <= delta}`` (m = 3)."""
    _check_T(T)
    inner = delta * T
    L = max_scaled
    if inner >= L / 2:
        raise ParameterError("delta * T too large for the quadrature box")
    a_half = _phi_abs_box(L / 2, exclude=inner)
    a_full = _phi_abs_box(L, exclude=inner)
    return float(2 * a_full - a_half)


# ---------------------------------------------------------------------------
# two-singularity integral
# ---------------------------------------------------------------------------


def lemma1_integral(alpha: float, beta: float, y: float) -> float:
    """``int_R |x|^{-alpha} |x + y|^{-beta} dx`` by singularity-weighted quadrature."""
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise ParameterError("alpha and beta must lie in (0, 1)")
    if not alpha + beta > 1:
        raise ParameterError("alpha + beta must exceed 1 for convergence")
    if y == 0:
        raise ParameterError("y must be nonzero")
    if y < 0:
        # reflect x -> -x
        return lemma1_integral(alpha, beta, -y)
    opts = dict(epsabs=0.0, epsrel=1e-12, limit=200)
    # between the singularities: the weight carries both powers
    mid, _ = integrate.quad(lambda x: 1.0, -y, 0.0, weight="alg", wvar=(-beta, -alpha), **opts)
    right_near, _ = integrate.quad(lambda x: (x + y) ** (-beta), 0.0, y, weight="alg", wvar=(-alpha, 0.0), **opts)
    left_near, _ = integrate.quad(lambda x: (-x) ** (-alpha), -2 * y, -y, weight="alg", wvar=(0.0, -beta), **opts)
    right_far, _ = integrate.quad(lambda x: x ** (-alpha) * (x + y) ** (-beta), y, np.inf, **opts)
    left_far, _ = integrate.quad(lambda x: (-x) ** (-alpha) * (-x - y) ** (-beta), -np.inf, -2 * y, **opts)
    return float(mid + right_near + left_near + right_far + left_far)


def lemma1_constant(alpha: float, beta: float) -> float:
    """Closed form of the same integral at ``y = 1`` as a sum of three beta functions."""
    s = alpha + beta - 1
    return float(beta_fn(1 - alpha, s) + beta_fn(1 - beta, s) + beta_fn(1 - alpha, 1 - beta))


def lemma1_scaling_check(alpha: float, beta: float, y: float) -> float:
    """``I(y) |y|^{alpha + beta - 1}``, which does not depend on ``y``."""
    return lemma1_integral(alpha, beta, y) * abs(y) ** (alpha + beta - 1)


# ---------------------------------------------------------------------------
# discrete Parseval bridge
# ---------------------------------------------------------------------------


def parseval_bridge(f1: SpectralDensity, f2: SpectralDensity, T: int, n: Optional[int] = None):
    """Compare the lag-sum trace with its double-integral Fejer representation.

    The lag sum ``sum_{|k|<T} (1 - |k|/T) fhat1(k) fhat2(k)`` must equal
    ``2 pi int int f1(x) f2(y) F_T(x - y) dx dy`` with the circle Fejer
    kernel. The double integral uses the periodic trapezoidal rule on a
    grid offset by half a step, which converges geometrically for smooth
    bounded densities; densities with a pole are rejected.

    Returns
    -------
    (lag_sum, fejer_integral, relative_difference)
    """
    T = int(T)
    if f1.has_pole or f2.has_pole:
        raise ParameterError("the trapezoidal bridge needs bounded densities")
    c1 = fourier_coefficients(f1, T - 1)
    c2 = fourier_coefficients(f2, T - 1)
    k = np.arange(1, T)
    lag_sum = c1[0] * c2[0] + 2.0 * np.sum((1 - k / T) * c1[1:] * c2[1:])
    n = n or max(512, 4 * T)
    grid = -np.pi + TWO_PI * (np.arange(n) + 0.5) / n
    v1 = evaluate(f1, grid)
    v2 = evaluate(f2, grid)
    kern = periodic_fejer(T, grid[:, None] - grid[None, :])
    h = TWO_PI / n
    fejer_integral = TWO_PI * h * h * (v1 @ kern @ v2)
    rel = abs(lag_sum - fejer_integral) / abs(lag_sum)
    return float(lag_sum), float(fejer_integral), float(rel)


# ---------------------------------------------------------------------------
# aggregate
# ---------------------------------------------------------------------------


def kernel_checks(Ts: Iterable[float] = (10.0, 100.0, 1000.0, 10000.0), full: bool = True) -> List[KernelCheck]:
    """Run the kernel identities and bounds; ``full`` adds the two-dimensional checks."""
    Ts = list(Ts)
    out = []
    us = np.linspace(-3.0, 3.0, 1001)
    err = max(float(np.max(np.abs(fejer(T, us) - dirichlet(T, us) ** 2 / (TWO_PI * T)))) for T in Ts)
    out.append(KernelCheck("fejer_dirichlet_identity", err <= 1e-12, err, 1e-12))
    worst = max(abs(fejer_mass(T) - 1.0) for T in Ts)
    out.append(KernelCheck("fejer_unit_mass", worst <= 1e-6, worst, 1e-6))
    ratio, count = dirichlet_bound_grid()
    out.append(KernelCheck("dirichlet_power_bound", ratio <= 1.0, ratio, 1.0, f"{count} grid points"))
    tails = [T * fejer_tail(T) for T in Ts]
    out.append(KernelCheck("fejer_tail_order_1_over_T", max(tails) <= 2 * min(tails), max(tails), 2 * min(tails), "T * tail spread"))
    moments = [fejer_power_moment(T, 0.5) for T in Ts]
    out.append(KernelCheck("fejer_power_moment_bounded", max(moments) <= 2 * min(moments), max(moments), 2 * min(moments), "alpha = 1/2"))
    if full:
        mass = phi_mass(100.0)
        out.append(KernelCheck("phi3_unit_mass", abs(mass - 1) <= 1e-4, abs(mass - 1), 1e-4))
        outside_20 = phi_abs_outside(20.0)
        outside_200 = phi_abs_outside(200.0)
        out.append(KernelCheck("phi3_mass_outside_box_decreases", outside_200 < outside_20, outside_200, outside_20, "delta = 0.5"))
    return out
