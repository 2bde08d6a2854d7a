"""Truncated Toeplitz operators W_T(f) on [0, T] and traces of their products.

The kernel of ``W_T(f)`` is ``r(t - s)`` where ``r`` is the Fourier
transform of the line density ``f``. Traces are computed either with a
Nystrom discretization on composite Gauss-Legendre panels or, for two
factors, through the exact identity

    (1/T) tr[W_T(f1) W_T(f2)] = integral_{-T}^{T} (1 - |t|/T) r1(t) r2(t) dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.special import beta as beta_fn
from scipy.special import gamma

from ._numerics import composite_legendre
from .errors import AccuracyError, DiscretizationError, ParameterError, TheoremInapplicableError
from .spectral_models import LINE, FRBm, LinearCombination, SpectralDensity, fourier_transform, product_integral, total_integral
from .toeplitz_discrete import ExperimentRow, RatePrediction

PANEL_ORDER = 8


def _tail_coefficient(f):
    """``(c, nu)`` with ``f(lam) ~ c |lam|^{-nu}`` at infinity, or None."""
    if isinstance(f, FRBm):
        return f.C, f.decay_exponent
    if isinstance(f, LinearCombination):
        parts = [(w, _tail_coefficient(h)) for w, h in f.terms if w != 0]
        if any(p is None for _, p in parts):
            return None
        nu = min(p[1] for _, p in parts)
        return sum(w * p[0] for w, p in parts if p[1] == nu), nu
    return None


class CovarianceTable:
    """Cached covariance ``r(t)`` on ``[0, t_max]`` with spline interpolation.

    The non-smooth term ``c_nu |t|^{nu - 1}`` produced by the decay of the
    density at infinity is subtracted before interpolating, and the grid is
    doubled until midpoint checks agree to ``tol * r(0)``.
    """

    def __init__(self, f: SpectralDensity, t_max: float, tol: float = 1e-8, n_initial: int = 128, n_max: int = 8192):
        if f.domain != LINE:
            raise ParameterError("covariance tables need a line density")
        self.f = f
        self.t_max = float(t_max)
        self.r0 = total_integral(f)
        tail = _tail_coefficient(f)
        self._cusp = None
        if tail is not None:
            c, nu = tail
            if 1 < nu < 3 and abs(nu - 2) > 1e-12:
                self._cusp = (c * 2 * gamma(1 - nu) * math.sin(math.pi * nu / 2), nu - 1)
        n = n_initial
        grid = np.linspace(0.0, self.t_max, n + 1)
        values = self._smooth_part(grid, fourier_transform(f, grid))
        while True:
            spline = CubicSpline(grid, values)
            mid = 0.5 * (grid[:-1] + grid[1:])
            exact = self._smooth_part(mid, fourier_transform(f, mid))
            err = float(np.max(np.abs(spline(mid) - exact)))
            merged = np.empty(2 * n + 1)
            merged[0::2], merged[1::2] = values, exact
            grid = np.linspace(0.0, self.t_max, 2 * n + 1)
            values = merged
            n *= 2
            if err <= tol * abs(self.r0):
                break
            if n > n_max:
                raise AccuracyError("covariance table did not reach its tolerance", err / abs(self.r0))
        self._spline = CubicSpline(grid, values)
        self.error = err

    def _cusp_term(self, t):
        if self._cusp is None:
            return 0.0
        c, power = self._cusp
        return c * np.abs(t) ** power

    def _smooth_part(self, t, r):
        return r - self._cusp_term(t)

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        if np.any(t > self.t_max * (1 + 1e-12)):
            raise ParameterError("argument outside the tabulated range")
        return self._spline(t) + self._cusp_term(t)


@dataclass(frozen=True)
class OperatorDiscretization:
    """Nystrom representation of ``W_T(f)``: nodes, weights and kernel matrix."""

    T: float
    nodes: np.ndarray
    weights: np.ndarray
    kernel: np.ndarray

    def symmetric_matrix(self):
        """``W^{1/2} K W^{1/2}``, which has the same nonzero spectrum as ``W K``."""
        s = np.sqrt(self.weights)
        return s[:, None] * self.kernel * s[None, :]


def discretize(f_or_table, T: float, n_nodes: int) -> OperatorDiscretization:
    """Composite Gauss-Legendre discretization with ``n_nodes`` nodes (multiple of 8)."""
    table = f_or_table if isinstance(f_or_table, CovarianceTable) else CovarianceTable(f_or_table, T)
    panels = max(1, int(n_nodes) // PANEL_ORDER)
    nodes, weights = composite_legendre(np.linspace(0.0, float(T), panels + 1), PANEL_ORDER)
    kernel = table(nodes[:, None] - nodes[None, :])
    return OperatorDiscretization(float(T), nodes, weights, kernel)


def _nystrom_value(tables, T, n_nodes):
    panels = max(1, int(n_nodes) // PANEL_ORDER)
    nodes, weights = composite_legendre(np.linspace(0.0, float(T), panels + 1), PANEL_ORDER)
    diff = np.abs(nodes[:, None] - nodes[None, :])
    s = np.sqrt(weights)
    mats = [s[:, None] * tab(diff) * s[None, :] for tab in tables]
    if len(mats) == 1:
        return float(np.trace(mats[0]) / T)
    acc = mats[0]
    for mat in mats[1:-1]:
        acc = acc @ mat
    return float(np.sum(acc * mats[-1].T) / T)


def nystrom_trace_product(
    generators: Sequence[SpectralDensity],
    T: float,
    n_nodes: int = 64,
    tol: float = 1e-6,
    max_nodes: Optional[int] = None,
    return_history: bool = False,
):
    """Normalized trace ``(1/T) tr[prod_i W_T(h_i)]`` by Nystrom discretization.

    The node count doubles until two successive values agree to ``tol``
    (relative). Kernels with a kink on the diagonal converge algebraically,
    so once three iterates are available their Richardson extrapolation is
    also tracked and accepted when two successive extrapolants agree.

    Raises
    ------
    DiscretizationError
        When the node cap is reached first.
    """
    gens = list(generators)
    if not gens:
        raise ParameterError("at least one generator is required")
    if n_nodes < 64:
        raise ParameterError("n_nodes must be at least 64")
    if any(h.domain != LINE for h in gens):
        raise ParameterError("operator traces need line densities")
    if max_nodes is None:
        max_nodes = 4096 if len(gens) <= 2 else 2048
    cache = {}
    tables = []
    for h in gens:
        if id(h) not in cache:
            cache[id(h)] = CovarianceTable(h, T)
        tables.append(cache[id(h)])
    history = []
    estimates = []
    n = int(n_nodes)
    while n <= max_nodes:
        history.append((n, _nystrom_value(tables, T, n)))
        values = [v for _, v in history]
        cur = values[-1]
        if len(values) >= 2 and abs(cur - values[-2]) <= tol * max(abs(cur), 1e-300):
            return (cur, history) if return_history else cur
        extrapolated = _richardson(values)
        if extrapolated is not None:
            estimates.append(extrapolated)
            if len(estimates) >= 2 and abs(estimates[-1] - estimates[-2]) <= tol * abs(estimates[-1]):
                return (estimates[-1], history) if return_history else estimates[-1]
        n *= 2
    raise DiscretizationError("Nystrom trace did not converge", [v for _, v in history[-2:]])


def _richardson(values):
    """Extrapolate the last three doubling iterates, or None if they are not geometric."""
    if len(values) < 3:
        return None
    d1 = values[-2] - values[-3]
    d2 = values[-1] - values[-2]
    if d2 == 0:
        return values[-1]
    ratio = d1 / d2
    # the diagonal kink of the kernel gives algebraic orders between 1 and 4
    if not 2.0 <= ratio <= 16.5:
        return None
    return values[-1] + d2 / (ratio - 1.0)


def exact_trace_m2(f1: SpectralDensity, f2: SpectralDensity, T: float, tol: float = 1e-11) -> float:
    """``(1/T) tr[W_T(f1) W_T(f2)]`` from the triangle-weighted covariance product."""
    if f1.domain != LINE or f2.domain != LINE:
        raise ParameterError("operator traces need line densities")
    T = float(T)
    if T <= 0:
        raise ParameterError("T must be positive")
    memo = {}

    def cov(h, t):
        key = (id(h), t)
        if key not in memo:
            memo[key] = fourier_transform(h, t)
        return memo[key]

    def integrand(t):
        return (1 - t / T) * cov(f1, t) * cov(f2, t)

    # split so that each piece sees a few correlation lengths
    edges = np.unique(np.concatenate([[0.0], np.geomspace(min(1.0, T), T, 1 + max(1, int(np.log2(max(T, 2))))), [T]]))
    total, err = 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, e = integrate.quad(integrand, lo, hi, limit=200, epsabs=tol * 1e-2, epsrel=tol)
        total += val
        err += e
    value = 2.0 * total
    if 2 * err > 1e-8 * max(abs(value), 1e-300):
        raise AccuracyError("triangle-weighted covariance integral", 2 * err / abs(value))
    return value


# ---------------------------------------------------------------------------
# second-order expansion for FRBm pairs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContinuousExpansion:
    leading: float
    constant: float
    predicted_S: float
    exponent: float


def frbm_second_order_constant(alpha1, alpha2, C1, C2):
    """Coefficient of ``T^{-(1-2 alpha)}`` in the expansion of ``S(T)`` for two FRBm densities."""
    a = alpha1 + alpha2
    num = 2 * C1 * C2 * math.pi**2
    den = math.cos(math.pi * alpha1) * math.cos(math.pi * alpha2) * gamma(2 * alpha1) * gamma(2 * alpha2)
    return num / den / (2 * a * (1 - 2 * a))


def second_order_expansion_continuous(alpha1, alpha2, beta1, beta2, C1, C2, T) -> ContinuousExpansion:
    """Two-term expansion ``S(T) ~ 2 pi int f1 f2 - C(alpha1, alpha2) T^{-(1 - 2 alpha)}``."""
    a = alpha1 + alpha2
    b = beta1 + beta2
    if not (alpha1 > 0 and alpha2 > 0) or a >= 0.5:
        raise TheoremInapplicableError("expansion needs alpha_i > 0 and alpha1 + alpha2 < 1/2")
    if alpha1 + beta1 <= 0.5 or alpha2 + beta2 <= 0.5:
        raise TheoremInapplicableError("expansion needs alpha_i + beta_i > 1/2")
    leading = 2 * math.pi * C1 * C2 * beta_fn(0.5 - a, a + b - 0.5)
    constant = frbm_second_order_constant(alpha1, alpha2, C1, C2)
    exponent = 1 - 2 * a
    return ContinuousExpansion(leading, constant, leading - constant * float(T) ** (-exponent), exponent)


# ---------------------------------------------------------------------------
# theoretical rates
# ---------------------------------------------------------------------------


def _frbm_sigma(h, theorem):
    if isinstance(h, FRBm):
        return h.pole_exponent
    raise TheoremInapplicableError(f"{theorem}: {h.kind} carries no (B4) envelope metadata")


def predicted_rate_continuous(generators: Sequence[SpectralDensity], theorem: str, p: Optional[Sequence[float]] = None) -> RatePrediction:
    """Rate exponent for operator traces under a named theorem.

    Supported names: ``T5-1.B1`` (rate 1 for covariances with finite first
    moment), ``T5-1.B3`` (common Lipschitz order, conjugate ``p``),
    ``T5-1.B4`` (``(1 - sigma)/m``), ``T5-2`` (two Lipschitz orders),
    ``T5-3`` (``1 - (sigma_1 + sigma_2)``), ``M51`` (o(1) only), ``M52``
    (``1/p - 2 alpha``), ``M53`` (``1/(2 nu) - (alpha_1 + alpha_2)``).
    Here ``sigma_i = 2 alpha_i`` for FRBm densities.
    """
    gens = list(generators)
    m = len(gens)
    name = theorem.upper()
    if name == "M51":
        return RatePrediction(name, None)
    if name == "T5-1.B1":
        if not all(isinstance(h, FRBm) and h.alpha == 0 for h in gens):
            raise TheoremInapplicableError("T5-1.B1 needs integrable t r(t); FRBm with alpha = 0 qualifies")
        return RatePrediction(name, 1.0)
    if name == "T5-1.B2":
        raise TheoremInapplicableError("T5-1.B2 needs a Hoelder bound on phi that is not derived from metadata")
    if name == "T5-1.B4":
        sig = sum(_frbm_sigma(h, name) for h in gens)
        if any(_frbm_sigma(h, name) <= 0 for h in gens) or sig >= 1:
            raise TheoremInapplicableError("T5-1.B4 needs sigma_i > 0 and sum sigma_i < 1")
        return RatePrediction(name, (1 - sig) / m)
    if name == "T5-1.B3":
        ps = list(p) if p is not None else [float(m)] * m
        if sum(1 / q for q in ps) > 1 + 1e-12:
            raise TheoremInapplicableError("T5-1.B3 needs sum 1/p_i <= 1")
        orders = [_lip_order(h, q, name) for h, q in zip(gens, ps)]
        return RatePrediction(name, min(orders))
    if name == "T5-2":
        if m != 2:
            raise TheoremInapplicableError("T5-2 concerns two generators")
        p1, p2 = p if p is not None else (2.0, 2.0)
        if abs(1 / p1 + 1 / p2 - 1) > 1e-12:
            raise TheoremInapplicableError("T5-2 needs 1/p1 + 1/p2 = 1")
        total = _lip_order(gens[0], p1, name) + _lip_order(gens[1], p2, name)
        return RatePrediction(name, min(total, 1.0), log_factor=abs(total - 1) < 1e-12)
    if name == "T5-3":
        if m != 2:
            raise TheoremInapplicableError("T5-3 concerns two generators")
        sig = _frbm_sigma(gens[0], name) + _frbm_sigma(gens[1], name)
        if sig >= 1:
            raise TheoremInapplicableError("T5-3 needs sigma_1 + sigma_2 < 1")
        return RatePrediction(name, 1 - sig)
    if name == "M52":
        if p is None:
            raise TheoremInapplicableError("M52 needs the exponent p of the FRBm factor")
        pf = float(p[0])
        f = gens[0]
        if not isinstance(f, FRBm) or not 0 < f.alpha < 1 / (2 * pf):
            raise TheoremInapplicableError("M52 needs an FRBm first factor with 0 < alpha < 1/(2p)")
        return RatePrediction(name, 1 / pf - 2 * f.alpha)
    if name == "M53":
        if m % 2 or not all(isinstance(h, FRBm) for h in gens):
            raise TheoremInapplicableError("M53 concerns an even number of FRBm generators")
        a1, a2 = gens[0].alpha, gens[1].alpha
        nu = m // 2
        if not (a1 > 0 and a2 > 0) or a1 + a2 >= 1 / (2 * nu):
            raise TheoremInapplicableError(f"M53 needs 0 < alpha_i and alpha_1 + alpha_2 < 1/(2 nu)")
        return RatePrediction(name, 1 / (2 * nu) - (a1 + a2))
    raise TheoremInapplicableError(f"unknown theorem {theorem!r}")


def _lip_order(h, p, theorem):
    sigma = _frbm_sigma(h, theorem)
    if sigma <= 0:
        return 1.0
    if sigma >= 1 / p:
        raise TheoremInapplicableError(f"{theorem}: sigma = {sigma} >= 1/p = {1 / p}")
    return 1 / p - sigma


# ---------------------------------------------------------------------------
# experiment rows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OperatorTraceSpec:
    """Ordered line densities whose truncated operators are multiplied."""

    generators: tuple
    model_id: str = ""

    def __post_init__(self):
        gens = tuple(self.generators)
        if not gens:
            raise ParameterError("a trace needs at least one generator")
        if any(h.domain != LINE for h in gens):
            raise ParameterError("operator traces need line densities")
        object.__setattr__(self, "generators", gens)
        if not self.model_id:
            object.__setattr__(self, "model_id", "-".join(h.kind for h in gens))

    @property
    def m(self) -> int:
        return len(self.generators)

    @property
    def tau_signature(self) -> str:
        return "+" * self.m


def operator_limit(spec: OperatorTraceSpec) -> float:
    """``M = (2 pi)^{m-1} int prod_i h_i`` for operator traces."""
    return (2 * math.pi) ** (spec.m - 1) * product_integral(spec.generators)


def operator_trace(spec: OperatorTraceSpec, T: float, method: str = "auto") -> float:
    """``(1/T) tr[prod_i W_T(h_i)]``; ``auto`` uses the exact identity when ``m = 2``."""
    if method == "auto":
        method = "exact" if spec.m == 2 else "nystrom"
    if method == "exact":
        if spec.m != 2:
            raise ParameterError("the exact identity needs two generators")
        return exact_trace_m2(spec.generators[0], spec.generators[1], T)
    if method == "nystrom":
        return nystrom_trace_product(spec.generators, T)
    raise ParameterError(f"unknown method {method!r}")


def operator_rows(spec: OperatorTraceSpec, grid, method: str = "auto", model_id=None):
    """Evaluate ``(T, S, M, Delta)`` rows with ``domain = line``."""
    limit = operator_limit(spec)
    rows = []
    for T in grid:
        s = operator_trace(spec, float(T), method)
        rows.append(ExperimentRow(model_id or spec.model_id, spec.m, spec.tau_signature, float(T), s, limit, abs(s - limit), LINE))
    return rows
