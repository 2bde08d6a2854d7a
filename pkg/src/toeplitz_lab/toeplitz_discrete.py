"""Toeplitz matrices B_T(f), traces of their products and the error Delta(T).

For generators ``h_1..h_m`` and exponents ``tau_i = +-1`` the normalized
trace is

    S(T) = (1/T) tr[ prod_i B_T(h_i)^{tau_i} ]

and its limit is ``M = (2 pi)^{n_+ - n_- - 1} * integral of prod_i h_i^{tau_i}``,
where ``n_+`` and ``n_-`` count the positive and negative exponents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.special import gamma

from ._numerics import ToeplitzFFT
from .errors import (
    NotPositiveDefiniteError,
    ParameterError,
    TheoremInapplicableError,
)
from .spectral_models import (
    CIRCLE,
    Arfima0d0,
    ArfimaPDQ,
    Constant,
    CosineSeries,
    FGn,
    PowerLogLaw,
    SpectralDensity,
    fourier_coefficients,
    product_integral,
)

DENSE_CAP = 2048
INVERSE_CAP = 1024
FFT_CAP = 16384
FASTM2_CAP = 2**20
#: generators inverted in a trace must stay above this value on the sample grid
POSITIVITY_FLOOR = 1e-6


@dataclass(frozen=True)
class ToeplitzMatrix:
    """Symmetric Toeplitz matrix with entries ``coeffs[|s - t|]``."""

    T: int
    coeffs: np.ndarray = field(repr=False)

    def dense(self) -> np.ndarray:
        idx = np.arange(self.T)
        return self.coeffs[np.abs(idx[:, None] - idx[None, :])]

    def matvec(self, x):
        return ToeplitzFFT(self.coeffs).matmat(x)

    def entry(self, s, t):
        return float(self.coeffs[abs(s - t)])


def build_matrix(f: SpectralDensity, T: int) -> ToeplitzMatrix:
    """Toeplitz matrix of size ``T`` generated by the circle density ``f``."""
    if f.domain != CIRCLE:
        raise ParameterError("Toeplitz matrices need a circle density")
    T = int(T)
    if T < 1:
        raise ParameterError("T must be at least 1")
    return ToeplitzMatrix(T, fourier_coefficients(f, T - 1))


@dataclass(frozen=True)
class TraceSpec:
    """Ordered generators with exponents ``+1`` (matrix) or ``-1`` (inverse)."""

    generators: tuple
    exponents: tuple = ()
    model_id: str = ""

    def __post_init__(self):
        gens = tuple(self.generators)
        if not gens:
            raise ParameterError("a trace needs at least one generator")
        taus = tuple(int(t) for t in self.exponents) if self.exponents else (1,) * len(gens)
        if len(taus) != len(gens):
            raise ParameterError("dimension mismatch between generators and exponents")
        if any(t not in (1, -1) for t in taus):
            raise ParameterError("exponents must be +1 or -1")
        if any(h.domain != CIRCLE for h in gens):
            raise ParameterError("discrete traces need circle densities")
        for h, t in zip(gens, taus):
            if t == -1:
                _screen_positive(h)
        object.__setattr__(self, "generators", gens)
        if not self.model_id:
            object.__setattr__(self, "model_id", "-".join(h.kind for h in gens))
        object.__setattr__(self, "exponents", taus)

    @property
    def m(self) -> int:
        return len(self.generators)

    @property
    def tau_signature(self) -> str:
        return "".join("+" if t > 0 else "-" for t in self.exponents)

    @property
    def has_inverse(self) -> bool:
        return any(t < 0 for t in self.exponents)


def _screen_positive(h):
    a = h.pole_exponent
    if a is not None and a < 0:
        raise NotPositiveDefiniteError(f"{h.kind} vanishes at the origin; it cannot be inverted")
    grid = np.linspace(1e-4, np.pi, 2001)
    low = float(np.min(h(grid)))
    if not low >= POSITIVITY_FLOOR:
        raise NotPositiveDefiniteError(
            f"{h.kind} falls to {low:.3g} on the sample grid; it cannot be inverted"
        )


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------


def _coefficient_table(spec, T):
    cache = {}
    out = []
    for h in spec.generators:
        key = id(h)
        if key not in cache:
            cache[key] = fourier_coefficients(h, T - 1)
        out.append(cache[key])
    return out


def trace_product(spec: TraceSpec, T: int, method: str = "auto", workers: Optional[int] = None) -> float:
    """Normalized trace ``(1/T) tr[prod_i B_T(h_i)]``.

    Parameters
    ----------
    method : {"auto", "dense", "fastm2", "fft"}
        ``dense`` multiplies materialized matrices (T <= 2048).
        ``fastm2`` uses ``(1/T) sum_{|k|<T} (T-|k|) h1hat(k) h2hat(k)`` (m = 2).
        ``fft`` multiplies Toeplitz factors into column blocks with FFTs,
        O(m T^2 log T) time and O(T) memory per block (T <= 16384).
    """
    if spec.has_inverse:
        raise ParameterError("use trace_product_inverse for specs with inverse factors")
    T = int(T)
    if T < 1:
        raise ParameterError("T must be at least 1")
    method = method.lower()
    if method == "auto":
        method = "fastm2" if spec.m <= 2 else ("dense" if T <= 512 else "fft")
    coeffs = _coefficient_table(spec, T)
    if spec.m == 1:
        return float(coeffs[0][0])
    if method == "fastm2":
        if spec.m != 2:
            raise ParameterError("the FastM2 identity needs exactly two generators")
        if T > FASTM2_CAP:
            raise ParameterError(f"FastM2 is capped at T = {FASTM2_CAP}")
        return _fastm2(coeffs[0], coeffs[1], T)
    if method == "dense":
        if T > DENSE_CAP:
            raise ParameterError(f"dense traces are capped at T = {DENSE_CAP}")
        return _dense_trace([ToeplitzMatrix(T, c).dense() for c in coeffs], T)
    if method == "fft":
        if T > FFT_CAP:
            raise ParameterError(f"FFT traces are capped at T = {FFT_CAP}")
        return _fft_trace(coeffs, T, workers)
    raise ParameterError(f"unknown method {method!r}")


def _fastm2(c1, c2, T):
    k = np.arange(1, T)
    # the product c1 * c2 is formed first so the result is symmetric in (c1, c2) bit for bit
    return float(c1[0] * c2[0] + 2.0 * np.sum((T - k) * (c1[1:] * c2[1:])) / T)


def _dense_trace(mats, T):
    acc = mats[0]
    for mat in mats[1:-1]:
        acc = acc @ mat
    # tr(A B) = sum_ij A_ij B_ji
    return float(np.sum(acc * mats[-1].T) / T)


def _fft_trace(coeffs, T, workers, block=256):
    """tr(P Q) with P = H_1..H_j and Q = H_{j+1}..H_m, via column blocks of P and Q^T."""
    ops = [ToeplitzFFT(c, workers) for c in coeffs]
    m = len(ops)
    half = m // 2
    left = list(range(half))  # P = H_0 ... H_{half-1}
    right = list(range(m - 1, half - 1, -1))  # Q^T = H_{m-1} ... H_half (symmetric factors)
    total = 0.0
    for start in range(0, T, block):
        stop = min(T, start + block)
        p_blk = ops[left[-1]].columns(start, stop, coeffs[left[-1]])
        for i in reversed(left[:-1]):
            p_blk = ops[i].matmat(p_blk)
        q_blk = ops[right[-1]].columns(start, stop, coeffs[right[-1]])
        for i in reversed(right[:-1]):
            q_blk = ops[i].matmat(q_blk)
        total += float(np.sum(p_blk * q_blk))
    return total / T


def trace_product_inverse(spec: TraceSpec, T: int) -> float:
    """Normalized trace ``(1/T) tr[prod_i B_T(f_i)^{-1} B_T(g_i)]`` via Cholesky solves.

    The exponents must alternate ``(-1, +1, -1, +1, ...)``.
    """
    taus = spec.exponents
    if spec.m % 2 or any(t != (-1 if i % 2 == 0 else 1) for i, t in enumerate(taus)):
        raise ParameterError("inverse traces need alternating exponents (-1, +1, ...)")
    T = int(T)
    if T > INVERSE_CAP:
        raise ParameterError(f"inverse traces are capped at T = {INVERSE_CAP}")
    coeffs = _coefficient_table(spec, T)
    acc = None
    for i in range(0, spec.m, 2):
        bf = ToeplitzMatrix(T, coeffs[i]).dense()
        bg = ToeplitzMatrix(T, coeffs[i + 1]).dense()
        try:
            factor = linalg.cho_factor(bf, lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(f"B_T({spec.generators[i].kind}) is not positive definite") from exc
        x = linalg.cho_solve(factor, bg, check_finite=False)
        acc = x if acc is None else acc @ x
    return float(np.trace(acc) / T)


def limit_value(spec: TraceSpec) -> float:
    """The integral target ``M`` of the normalized trace."""
    power = sum(spec.exponents) - 1
    return (2 * np.pi) ** power * product_integral(spec.generators, spec.exponents)


def normalized_trace(spec: TraceSpec, T: int, method: str = "auto", workers=None) -> float:
    """``S(T)`` or ``SI(T)`` depending on the exponents of ``spec``."""
    if spec.has_inverse:
        return trace_product_inverse(spec, T)
    return trace_product(spec, T, method=method, workers=workers)


def delta(spec: TraceSpec, T: int, method: str = "auto", workers=None, limit: Optional[float] = None) -> float:
    """Approximation error ``Delta(T) = |S(T) - M|``."""
    if limit is None:
        limit = limit_value(spec)
    return abs(normalized_trace(spec, T, method=method, workers=workers) - limit)


# ---------------------------------------------------------------------------
# theoretical rates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RatePrediction:
    """Theoretical convergence exponent ``gamma`` in ``Delta(T) = O(T^{-gamma})``.

    ``gamma`` is None when the theorem only guarantees ``o(1)``;
    ``log_factor`` marks an extra ``log T`` in the bound.
    """

    theorem: str
    gamma: Optional[float]
    log_factor: bool = False

    @property
    def o1_only(self) -> bool:
        return self.gamma is None


SMOOTH_KINDS = (Constant, CosineSeries)
PARAMETRIC_POWER_KINDS = (Arfima0d0, ArfimaPDQ, FGn, PowerLogLaw, Constant, CosineSeries)


def _is_smooth(h):
    if isinstance(h, SMOOTH_KINDS):
        return True
    if isinstance(h, (Arfima0d0, ArfimaPDQ)):
        return h.d == 0
    if isinstance(h, FGn):
        return h.H == 0.5
    return False


def _power_exponent(h, theorem):
    """Exponent of a pure power-type singularity, or raise when the kind has none."""
    if not isinstance(h, PARAMETRIC_POWER_KINDS) or (isinstance(h, PowerLogLaw) and h.gamma < 0):
        raise TheoremInapplicableError(f"{theorem}: {h.kind} has no power-type derivative bound")
    return max(h.pole_exponent, 0.0)


def _arfima_d(h):
    if isinstance(h, (Arfima0d0, ArfimaPDQ)):
        return h.d
    return None


def predicted_rate(spec: TraceSpec, theorem: str, p: Sequence[float] = (2.0, 2.0)) -> RatePrediction:
    """Rate exponent promised by a named theorem for the generators in ``spec``.

    Supported names: ``B1`` (summable ``|k| hhat(k)``, rate 1), ``B5``
    (power singularities, ``(1 - sum alpha_i)/m``), ``T4-1`` (Lipschitz
    classes, ``min(g1 + g2, 1)``), ``T4-2`` (``1 - (alpha_1 + alpha_2)``),
    ``FM`` (ARFIMA pairs, ``1/(2 nu) - (d_1 + d_2)``), ``T4`` (inverse
    traces with ARMA-type ``f``, rate 1), ``T1`` and ``T2`` (o(1) only).
    """
    gens, taus = spec.generators, spec.exponents
    name = theorem.upper()
    if name in ("T1", "T2"):
        if name == "T2" and not spec.has_inverse:
            raise TheoremInapplicableError("T2 concerns traces with inverse factors")
        return RatePrediction(name, None)
    if name == "T4":
        if not spec.has_inverse:
            raise TheoremInapplicableError("T4 concerns traces with inverse factors")
        for i, h in enumerate(gens):
            if not _is_smooth(h) and not (isinstance(h, ArfimaPDQ) and h.d == 0):
                raise TheoremInapplicableError(f"T4 needs smooth generators; {h.kind} is not")
        return RatePrediction(name, 1.0)
    if spec.has_inverse:
        raise TheoremInapplicableError(f"{name} concerns products without inverses")
    if name == "B1":
        if not all(_is_smooth(h) for h in gens):
            raise TheoremInapplicableError("B1 needs generators with summable |k| hhat(k)")
        return RatePrediction(name, 1.0)
    if name == "B5":
        alphas = [_power_exponent(h, name) for h in gens]
        total = sum(alphas)
        if any(a >= 1 for a in alphas) or total >= 1:
            raise TheoremInapplicableError("B5 needs alpha_i < 1 and sum alpha_i < 1")
        return RatePrediction(name, (1 - total) / spec.m)
    if name == "T4-2":
        if spec.m != 2:
            raise TheoremInapplicableError("T4-2 concerns two generators")
        alphas = [_power_exponent(h, name) for h in gens]
        if sum(alphas) >= 1:
            raise TheoremInapplicableError("T4-2 needs alpha_1 + alpha_2 < 1")
        return RatePrediction(name, 1 - sum(alphas))
    if name == "T4-1":
        if spec.m != 2:
            raise TheoremInapplicableError("T4-1 concerns two generators")
        p1, p2 = p
        if abs(1 / p1 + 1 / p2 - 1) > 1e-12:
            raise TheoremInapplicableError("T4-1 needs conjugate exponents 1/p1 + 1/p2 = 1")
        gammas = [_lipschitz_order(h, pi) for h, pi in zip(gens, (p1, p2))]
        total = sum(gammas)
        return RatePrediction(name, min(total, 1.0), log_factor=abs(total - 1) < 1e-12)
    if name == "FM":
        ds = [_arfima_d(h) for h in gens]
        if any(d is None for d in ds) or spec.m % 2:
            raise TheoremInapplicableError("FM concerns an even number of ARFIMA generators")
        d1, d2 = ds[0], ds[1]
        if any(ds[i] != (d1 if i % 2 == 0 else d2) for i in range(spec.m)):
            raise TheoremInapplicableError("FM needs alternating generators f1, f2, f1, f2, ...")
        nu = spec.m // 2
        if not (0 < d1 < 0.5 and 0 < d2 < 0.5):
            raise TheoremInapplicableError("FM needs 0 < d_i < 1/2")
        if d1 + d2 >= 1 / (2 * nu):
            raise TheoremInapplicableError(f"FM needs d1 + d2 < 1/(2 nu) = {1 / (2 * nu):.4g}")
        return RatePrediction(name, 1 / (2 * nu) - (d1 + d2))
    raise TheoremInapplicableError(f"unknown theorem {theorem!r}")


def _lipschitz_order(h, p):
    if _is_smooth(h):
        return 1.0
    a = _power_exponent(h, "T4-1")
    if h.pole_exponent < 0:
        return min(1.0, 1 / p - h.pole_exponent)
    if a >= 1 / p:
        raise TheoremInapplicableError(f"T4-1: {h.kind} is not in L^{p}")
    return 1 / p - a


# ---------------------------------------------------------------------------
# second-order expansion for ARFIMA pairs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SecondOrderExpansion:
    leading: float
    constant: float
    predicted_S: float
    exponent: float


def arfima_second_order_constant(d1, d2, sigma2_1, sigma2_2):
    """Coefficient of ``T^{-(1-2d)}`` in the expansion of ``S(T)`` for two ARFIMA(0,d,0) densities.

    Each covariance behaves like ``sigma2 / (2 cos(pi d) Gamma(2d)) k^{2d-1}``;
    summing the tail and the triangular weight of the trace gives the
    factor ``1 / (2d (1 - 2d))`` with ``d = d1 + d2``.
    """
    d = d1 + d2
    lead1 = sigma2_1 / (2 * math.cos(math.pi * d1) * gamma(2 * d1))
    lead2 = sigma2_2 / (2 * math.cos(math.pi * d2) * gamma(2 * d2))
    return 2 * lead1 * lead2 / (2 * d * (1 - 2 * d))


def second_order_expansion_discrete(d1, d2, sigma2_1, sigma2_2, T) -> SecondOrderExpansion:
    """Two-term expansion ``S(T) ~ 2 pi int f1 f2 - C(d1, d2) T^{-(1-2d)}``."""
    d = d1 + d2
    if not (0 < d1 < 0.5 and 0 < d2 < 0.5) or d >= 0.5:
        raise TheoremInapplicableError("expansion needs 0 < d_i and d1 + d2 < 1/2")
    f1, f2 = Arfima0d0(sigma2_1, d1), Arfima0d0(sigma2_2, d2)
    leading = 2 * np.pi * product_integral([f1, f2])
    constant = arfima_second_order_constant(d1, d2, sigma2_1, sigma2_2)
    exponent = 1 - 2 * d
    return SecondOrderExpansion(leading, constant, leading - constant * float(T) ** (-exponent), exponent)


# ---------------------------------------------------------------------------
# experiment rows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentRow:
    model_id: str
    m: int
    tau_signature: str
    T: float
    S: float
    M: float
    delta: float
    domain: str = CIRCLE

    FIELDS = ("model_id", "m", "tau_signature", "T", "S", "M", "delta", "domain")

    def as_dict(self):
        return {k: getattr(self, k) for k in self.FIELDS}


def trace_rows(spec: TraceSpec, grid, method="auto", workers=None, model_id=None):
    """Evaluate ``(T, S, M, Delta)`` over a T-grid."""
    limit = limit_value(spec)
    rows = []
    for T in grid:
        s = normalized_trace(spec, int(T), method=method, workers=workers)
        rows.append(
            ExperimentRow(model_id or spec.model_id, spec.m, spec.tau_signature, int(T), s, limit, abs(s - limit))
        )
    return rows
