"""Gaussian stationary sequences and their Toeplitz quadratic forms.

For a centered Gaussian vector ``X`` with covariance ``B_T(f)`` the form
``Q_T = X' B_T(g) X`` has cumulants ``2^{k-1} (k-1)! tr[(B_T(f) B_T(g))^k]``.
This module simulates such vectors, evaluates ``Q_T``, computes the
cumulants exactly, and runs the distributional checks (central limit,
Berry-Esseen, non-central scaling, large deviations).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, linalg, optimize, stats
from scipy import fft as sfft
from scipy.special import beta as beta_fn
from scipy.special import gamma

from ._numerics import ToeplitzFFT, composite_legendre, jacobi_rule, singular_rule
from .errors import (
    AccuracyError,
    DivergentIntegralError,
    ParameterError,
    RosenblattRegimeError,
)
from .spectral_models import (
    CIRCLE,
    LINE,
    Constant,
    LinearCombination,
    PiecewiseDyadic,
    PowerLogLaw,
    SpectralDensity,
    fourier_coefficients,
    fourier_transform,
    product_integral,
)
from .toeplitz_discrete import DENSE_CAP, TraceSpec, trace_product

CHOLESKY_CAP = 4096
EMBEDDING_TOL = 1e-10
CHUNK = 256


# ---------------------------------------------------------------------------
# specification and simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticFormSpec:
    """Process density ``f``, generating function ``g`` and sample size ``T``.

    For line densities the process is observed on the grid ``k * step``,
    ``k = 0..T-1``, and the double integral is replaced by a Riemann sum.
    """

    f: SpectralDensity
    g: SpectralDensity
    T: int
    step: Optional[float] = None

    def __post_init__(self):
        if self.f.domain != self.g.domain:
            raise ParameterError("f and g must share a domain")
        if int(self.T) < 1:
            raise ParameterError("T must be positive")
        object.__setattr__(self, "T", int(self.T))
        if self.f.domain == LINE and self.step is None:
            object.__setattr__(self, "step", 1.0)

    @property
    def domain(self):
        return self.f.domain


def _lag_values(h: SpectralDensity, n: int, step: Optional[float]):
    """``hhat`` at lags ``0..n-1`` (integer lags, or multiples of ``step`` on the line)."""
    if h.domain == CIRCLE:
        return fourier_coefficients(h, n - 1)
    return fourier_transform(h, step * np.arange(n))


@dataclass(frozen=True)
class SimulationResult:
    """Sample paths with the metadata needed to reproduce them."""

    paths: np.ndarray
    seed: int
    method: str
    embedding_size: int
    fallback: bool
    min_eigenvalue: float


def _chunk_rng(seed, index):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def _circulant_spectrum(r, size):
    """Eigenvalues of the circulant of length ``2 size`` built from ``r[0..size]``."""
    c = np.concatenate([r[: size + 1], r[size - 1 : 0 : -1]])
    return sfft.fft(c).real, c.size


def simulate_process(
    f: SpectralDensity,
    T: int,
    seed: int,
    replicates: int = 1,
    step: Optional[float] = None,
) -> SimulationResult:
    """Draw centered Gaussian paths with covariance matrix ``B_T(f)``.

    Circulant embedding of size ``2T`` (then ``4T``) is used when its
    spectrum is nonnegative up to ``1e-10`` relative; otherwise the exact
    Cholesky factor is used for ``T <= 4096``. Replicates are produced in
    chunks of 256 with independent counter-based streams derived from
    ``seed``, so the output does not depend on how the work is split.
    """
    T = int(T)
    if f.domain == LINE and step is None:
        step = 1.0
    R = int(replicates)
    if R < 1:
        raise ParameterError("replicates must be positive")
    r = _lag_values(f, 2 * T + 1, step)
    method, fallback = "circulant", False
    eig, size = None, 0
    for n in (T, 2 * T):
        lam, m = _circulant_spectrum(r, n)
        if lam.min() >= -EMBEDDING_TOL * lam.max():
            eig, size = np.clip(lam, 0.0, None), m
            break
    min_eig = float(lam.min() / lam.max())
    if eig is None:
        if T > CHOLESKY_CAP:
            raise AccuracyError("circulant embedding failed and T exceeds the Cholesky cap", min_eig)
        method, fallback = "cholesky", True
        factor = np.linalg.cholesky(linalg.toeplitz(r[:T]))
    paths = np.empty((R, T))
    for index, start in enumerate(range(0, R, CHUNK)):
        stop = min(R, start + CHUNK)
        rng = _chunk_rng(seed, index)
        count = stop - start
        if method == "cholesky":
            paths[start:stop] = rng.standard_normal((count, T)) @ factor.T
            continue
        pairs = (count + 1) // 2
        z = rng.standard_normal((pairs, size)) + 1j * rng.standard_normal((pairs, size))
        y = sfft.fft(np.sqrt(eig / size) * z, axis=1)[:, :T]
        both = np.concatenate([y.real, y.imag])[:count]
        paths[start:stop] = both
    return SimulationResult(paths, int(seed), method, size if method == "circulant" else T, fallback, min_eig)


def compute_QT(spec: QuadraticFormSpec, path) -> np.ndarray:
    """``Q_T = X' B_T(g) X`` for one path ``(T,)`` or a batch ``(R, T)``."""
    x = np.asarray(path, dtype=float)
    if x.shape[-1] != spec.T:
        raise ParameterError(f"path length {x.shape[-1]} does not match T = {spec.T}")
    coeffs = _lag_values(spec.g, spec.T, spec.step)
    if spec.domain == LINE:
        coeffs = coeffs * spec.step**2
    op = ToeplitzFFT(coeffs)
    batch = np.atleast_2d(x)
    out = np.empty(batch.shape[0])
    for start in range(0, batch.shape[0], CHUNK):
        blk = batch[start : start + CHUNK]
        out[start : start + CHUNK] = np.sum(blk * op.matmat(blk.T).T, axis=1)
    return out if x.ndim > 1 else float(out[0])


def eigen_mixture_samples(spec: QuadraticFormSpec, replicates: int, seed: int) -> np.ndarray:
    """Samples of ``sum_k lambda_k xi_k^2``, which has the law of ``Q_T``."""
    lam = product_eigenvalues(spec)
    out = np.empty(int(replicates))
    for index, start in enumerate(range(0, out.size, CHUNK)):
        stop = min(out.size, start + CHUNK)
        xi = _chunk_rng(seed, index).standard_normal((stop - start, lam.size))
        out[start:stop] = (xi**2) @ lam
    return out


# ---------------------------------------------------------------------------
# cumulants
# ---------------------------------------------------------------------------


def _matrices(spec: QuadraticFormSpec):
    if spec.T > DENSE_CAP:
        raise ParameterError(f"dense cumulants are capped at T = {DENSE_CAP}")
    bf = linalg.toeplitz(_lag_values(spec.f, spec.T, spec.step))
    bg = linalg.toeplitz(_lag_values(spec.g, spec.T, spec.step))
    if spec.domain == LINE:
        bg = bg * spec.step**2
    return bf, bg


def product_eigenvalues(spec: QuadraticFormSpec) -> np.ndarray:
    """Eigenvalues of ``B(f)^{1/2} B(g) B(f)^{1/2}`` (the spectrum of ``B(f) B(g)``)."""
    bf, bg = _matrices(spec)
    try:
        low = np.linalg.cholesky(bf)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(bf)
        low = v * np.sqrt(np.clip(w, 0.0, None))
    return np.linalg.eigvalsh(low.T @ bg @ low)


@dataclass(frozen=True)
class CumulantVector:
    """Cumulants ``chi_1..chi_K`` of the normalized form ``(Q_T - E Q_T)/sqrt(T)``."""

    values: tuple
    by_powers: tuple
    by_eigenvalues: tuple
    discrepancy: float

    def __getitem__(self, k):
        """Cumulant of order ``k`` (1-based)."""
        return self.values[k - 1]


def cumulants_via_trace(spec: QuadraticFormSpec, K: int = 4) -> CumulantVector:
    """Cumulants from ``tr[(B(f) B(g))^k]`` by matrix powers and by eigenvalues.

    Returns the eigenvalue route as ``values``; ``discrepancy`` is the largest
    relative difference between the two routes.
    """
    if K < 2:
        raise ParameterError("K must be at least 2")
    bf, bg = _matrices(spec)
    prod = bf @ bg
    power = np.eye(spec.T)
    traces_pow = []
    for _ in range(K):
        power = power @ prod
        traces_pow.append(float(np.trace(power)))
    lam = product_eigenvalues(spec)
    traces_eig = [float(np.sum(lam**k)) for k in range(1, K + 1)]
    T = spec.T

    def scale(k):
        return T ** (-k / 2) * 2 ** (k - 1) * math.factorial(k - 1)

    by_pow = (0.0,) + tuple(scale(k) * traces_pow[k - 1] for k in range(2, K + 1))
    by_eig = (0.0,) + tuple(scale(k) * traces_eig[k - 1] for k in range(2, K + 1))
    disc = max(abs(a - b) / max(abs(b), 1e-300) for a, b in zip(by_pow[1:], by_eig[1:]))
    return CumulantVector(by_eig, by_pow, by_eig, float(disc))


def chi2(f: SpectralDensity, g: SpectralDensity, T: int, method: str = "auto") -> float:
    """Second cumulant ``(2/T) tr[(B(f) B(g))^2]`` via Toeplitz traces."""
    return 2.0 * trace_product(TraceSpec((f, g, f, g)), T, method=method)


def sigma0_squared(f: SpectralDensity, g: SpectralDensity) -> float:
    """Limiting variance ``16 pi^3 int f^2 g^2``.

    Raises
    ------
    RosenblattRegimeError
        When ``f^2 g^2`` is not integrable.
    """
    try:
        value = product_integral([f, f, g, g])
    except DivergentIntegralError as exc:
        raise RosenblattRegimeError(f"f^2 g^2 is not integrable: {exc}") from exc
    return 16 * math.pi**3 * value


# ---------------------------------------------------------------------------
# central limit conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CLTConditionReport:
    """Conditions of the central limit theorem that were established.

    ``analytic`` holds conditions proven from exponent metadata (C and E);
    ``numeric`` holds non-authoritative flags for A and D from finite grids.
    """

    analytic: frozenset
    numeric: dict
    notes: tuple = ()

    @property
    def satisfied(self) -> frozenset:
        return self.analytic | frozenset(k for k, v in self.numeric.items() if v)

    @property
    def provable(self) -> bool:
        return bool(self.analytic)

    @property
    def verdict(self) -> str:
        return ",".join(sorted(self.satisfied)) if self.satisfied else "none provable"


def _exponents(h):
    a = h.pole_exponent
    if a is None:
        return None
    return float(a), float(h.log_exponent)


def _lp_threshold(a, gamma_log):
    """``(inverse_p, attained)``: ``h`` lies in ``L^p`` for ``1/p > a`` (and at ``1/p = a`` if attained)."""
    if a <= 0:
        return 0.0, gamma_log >= 0 or a < 0
    return a, gamma_log > a


def _in_l2(a, gamma_log):
    return a < 0.5 or (a == 0.5 and gamma_log > 0.5)


def clt_condition_check(f: SpectralDensity, g: SpectralDensity, numeric: bool = True) -> CLTConditionReport:
    """Check which sufficient conditions for the central limit theorem hold.

    Raises
    ------
    UnclassifiableError
        Never; densities without exponent metadata yield ``"none provable"``.
    """
    ef, eg = _exponents(f), _exponents(g)
    if ef is None or eg is None:
        return CLTConditionReport(frozenset(), {}, ("no exponent metadata",))
    (af, lf), (ag, lg) = ef, eg
    analytic = set()
    notes = []
    # (C): 1/p + 1/q <= 1/2 with p, q >= 2
    pf, attained_f = _lp_threshold(af, lf)
    pg, attained_g = _lp_threshold(ag, lg)
    if pf <= 0.5 and pg <= 0.5:
        total = pf + pg
        if total < 0.5 or (total == 0.5 and attained_f and attained_g):
            analytic.add("C")
    # (E): power bounds with slowly varying factors, alpha + beta <= 1/2
    a, b = af, ag
    if a < 1 and b < 1:
        s = a + b
        if s < 0.5:
            analytic.add("E")
        elif s == 0.5 and lf > 0.5 and lg > 0.5:
            analytic.add("E")
    fg_pole = af + ag
    fg_log = lf + lg
    fg_in_l2 = _in_l2(fg_pole, fg_log)
    flags = {}
    if numeric:
        if fg_in_l2:
            flags["A"] = _numeric_condition_a(f, g)
        else:
            flags["A"] = False
            notes.append("f g is not square integrable")
        if _in_l2(af, lf) and _in_l2(ag, lg) and fg_in_l2:
            flags["D"] = _numeric_condition_d(f, g)
        else:
            flags["D"] = False
    return CLTConditionReport(frozenset(analytic), flags, tuple(notes))


def _numeric_condition_a(f, g, Ts=(256, 512, 1024)):
    try:
        target = sigma0_squared(f, g)
        values = [chi2(f, g, T) for T in Ts]
    except (ParameterError, DivergentIntegralError, AccuracyError):
        return False
    gaps = [abs(v - target) / target for v in values]
    return gaps[-1] < 0.05 and gaps[-1] <= gaps[0] + 1e-12


def _numeric_condition_d(f, g, shifts=2.0 ** -np.arange(4, 11)):
    if f.domain != CIRCLE:
        return None
    try:
        target = product_integral([f, f, g, g])
    except DivergentIntegralError:
        return False

    def shifted(mu):
        def fn(lam):
            return float(f(np.asarray(lam)) ** 2 * g(np.asarray(lam - mu)) ** 2)

        pts = sorted({0.0, float(mu)})
        val, _ = integrate.quad(fn, -np.pi, np.pi, points=pts, limit=400)
        return val

    try:
        gaps = [abs(shifted(mu) - target) / target for mu in shifts]
    except Exception:
        return None
    return gaps[-1] < 0.02 and gaps[-1] <= gaps[0]


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MonteCarloStudy:
    seed: int
    replicates: int
    T: int
    samples: np.ndarray = field(repr=False)
    mean: float
    variance: float
    ks_distance: float
    ks_pvalue: float
    sigma0_sq: float
    chi2_T: float
    method: str

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "R": self.replicates,
            "T": self.T,
            "stats": {
                "ks": self.ks_distance,
                "ks_pvalue": self.ks_pvalue,
                "mean": self.mean,
                "var": self.variance,
                "sigma0_sq": self.sigma0_sq,
                "chi2_T": self.chi2_T,
            },
            "simulation": self.method,
        }


def normalized_forms(spec: QuadraticFormSpec, replicates: int, seed: int):
    """Samples of ``(Q_T - E Q_T)/sqrt(T)`` and the simulation method used."""
    sim = simulate_process(spec.f, spec.T, seed, replicates, spec.step)
    q = compute_QT(spec, sim.paths)
    mean = spec.T * trace_product(TraceSpec((spec.f, spec.g)), spec.T)
    return (q - mean) / math.sqrt(spec.T), sim.method


def clt_monte_carlo(spec: QuadraticFormSpec, replicates: int, seed: int) -> MonteCarloStudy:
    """Kolmogorov-Smirnov distance between simulated ``Q~_T`` and ``N(0, sigma0^2)``."""
    if spec.domain != CIRCLE:
        raise ParameterError("the Monte Carlo study is implemented for sequences")
    samples, method = normalized_forms(spec, replicates, seed)
    s2 = sigma0_squared(spec.f, spec.g)
    ks = stats.kstest(samples, stats.norm(scale=math.sqrt(s2)).cdf)
    chi2_T = chi2(spec.f, spec.g, spec.T)
    return MonteCarloStudy(
        int(seed), int(replicates), spec.T, samples, float(samples.mean()), float(samples.var(ddof=1)),
        float(ks.statistic), float(ks.pvalue), float(s2), float(chi2_T), method,
    )


# ---------------------------------------------------------------------------
# counterexample to the variance criterion
# ---------------------------------------------------------------------------


def counterexample_pair(p: float, q: float, C: float):
    """``(f0, g_plus, g_minus)`` built from complementary dyadic step functions."""
    if p < 2 or q <= 1 or 1 / p + 1 / q <= 1:
        raise ParameterError("need p >= 2, q > 1 and 1/p + 1/q > 1")
    if not C > 0:
        raise ParameterError("C must be positive")
    f0 = PiecewiseDyadic(p, offset=0)
    g0 = PiecewiseDyadic(q, offset=1)
    g_plus = LinearCombination(((1.0, g0), (C, Constant(1.0))))
    g_minus = LinearCombination(((1.0, g0), (-C, Constant(1.0))))
    return f0, g_plus, g_minus


@dataclass(frozen=True)
class CounterexampleResult:
    Ts: tuple
    chi2: tuple
    ratios: tuple
    integral_f2g2: float


def counterexample_chi2_divergence(p: float, q: float, C: float, Ts: Sequence[int], sign: int = 1) -> CounterexampleResult:
    """``chi_2`` of the normalized form for the dyadic pair over a grid of sample sizes."""
    f0, g_plus, g_minus = counterexample_pair(p, q, C)
    g = g_plus if sign > 0 else g_minus
    integral = product_integral([f0, f0, g, g])
    values = tuple(chi2(f0, g, int(T), method="fft" if T > 512 else "dense") for T in Ts)
    ratios = tuple(b / a for a, b in zip(values[:-1], values[1:]))
    return CounterexampleResult(tuple(int(T) for T in Ts), values, ratios, float(integral))


# ---------------------------------------------------------------------------
# non-central regime
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoncentralFit:
    alpha: float
    beta: float
    Ts: tuple
    variances: tuple
    slope: float
    expected: float
    local_slopes: tuple


def noncentral_pair(alpha: float, beta: float):
    f = PowerLogLaw(alpha)
    g = PowerLogLaw(beta) if beta != 0 else Constant(1.0)
    return f, g


def noncentral_scaling_check(
    alpha: float, beta: float, Ts: Sequence[int], replicates: Optional[int] = None, seed: Optional[int] = None
) -> NoncentralFit:
    """Fit the growth exponent of ``Var(Q_T)`` for power-law ``f`` and ``g``.

    The variance ``2 tr[(B(f) B(g))^2]`` is exact; with ``replicates`` the
    Monte Carlo sample variance is used instead.
    """
    if not (alpha < 1 and beta < 1):
        raise ParameterError("alpha and beta must be below 1")
    f, g = noncentral_pair(alpha, beta)
    variances = []
    for T in Ts:
        if replicates is None:
            variances.append(T * chi2(f, g, int(T)))
        else:
            spec = QuadraticFormSpec(f, g, int(T))
            samples, _ = normalized_forms(spec, replicates, 0 if seed is None else seed)
            variances.append(T * float(samples.var(ddof=1)))
    logs = np.log(np.asarray(Ts, dtype=float))
    lv = np.log(variances)
    slope = float(np.polyfit(logs, lv, 1)[0])
    local = tuple(np.diff(lv) / np.diff(logs))
    return NoncentralFit(alpha, beta, tuple(int(T) for T in Ts), tuple(variances), slope, 2 * (alpha + beta), local)


def _jacobi_moments(omega, t, beta, n=64):
    """``int_0^t v^{beta-1} e^{i omega v} dv`` for ``|omega| t <= 30`` (Gauss-Jacobi)."""
    x, w = jacobi_rule(n, 1.0 - beta)
    phase = np.exp(1j * np.multiply.outer(omega * t, x))
    return t**beta * (phase @ w)


def _oscillatory_moments(omega, t, beta, terms=40):
    """Same integral for ``|omega| t > 30``: complete integral minus an asymptotic tail."""
    s = np.sign(omega)
    full = gamma(beta) * np.exp(1j * np.pi * beta / 2 * s) * np.abs(omega) ** (-beta)
    tail = np.zeros_like(omega, dtype=complex)
    coef = 1.0
    iw = 1j * omega
    for n in range(terms):
        if n > 0:
            coef *= beta - n
        tail += coef * (-1) ** n * t ** (beta - 1 - n) / iw ** (n + 1)
    return full + np.exp(1j * omega * t) * tail


def _power_moments(omega, t, beta):
    omega = np.asarray(omega, dtype=float)
    out = np.empty(omega.shape, dtype=complex)
    small = np.abs(omega) * t <= 30.0
    out[small] = _jacobi_moments(omega[small], t, beta)
    out[~small] = _oscillatory_moments(omega[~small], t, beta)
    return out


def _kernel_sq(p, q, alpha, beta, t):
    """``|K_t(x, y)|^2`` at ``x = p + q``, ``y = p - q``."""
    x, y = p + q, p - q
    weight = np.abs(x * y) ** (-alpha)
    if beta == 0:
        amp = 2 * np.pi * np.sin(p * t) / p
        return weight * amp**2
    c_beta = 2 * gamma(1 - beta) * math.sin(math.pi * beta / 2)
    s = _power_moments(x, t, beta) + _power_moments(y, t, beta)
    amp = c_beta / p * (s.real * np.sin(p * t) - s.imag * np.cos(p * t))
    return weight * amp**2


def _inner_q_integral(p, alpha, beta, t, n=20, max_panels=64):
    """``int_0^inf |K_t|^2 dq`` at fixed ``p > 0``."""
    h = alpha + beta
    # both sides of the singular line q = p
    xs, ws = singular_rule(p, alpha, n=n, grading=0.25, levels=10)
    total = np.sum(ws * _kernel_sq(p, p - xs, alpha, beta, t))
    total += np.sum(ws * _kernel_sq(p, p + xs, alpha, beta, t))
    upper = max(200.0 * p, 400.0 / t)
    edges = [2 * p]
    while edges[-1] < upper:
        nxt = min(2 * edges[-1], upper)
        # resolve the e^{i x t} oscillation where it is not yet negligible
        pieces = max(1, min(int(math.ceil((nxt - edges[-1]) * t / math.pi)), max_panels))
        edges.extend(np.linspace(edges[-1], nxt, pieces + 1)[1:])
    qs, wq = composite_legendre(np.asarray(edges), n)
    total += np.sum(wq * _kernel_sq(p, qs, alpha, beta, t))
    # tail: the moment sum behaves like 2 Gamma(beta) cos(pi beta/2) q^{-beta}
    if beta == 0:
        lead = (2 * np.pi * math.sin(p * t) / p) ** 2
    else:
        c_beta = 2 * gamma(1 - beta) * math.sin(math.pi * beta / 2)
        lead = (c_beta / p * math.sin(p * t)) ** 2 * (2 * gamma(beta) * math.cos(math.pi * beta / 2)) ** 2
    total += lead * upper ** (1 - 2 * h) / (2 * h - 1)
    return total


def rosenblatt_second_moment(alpha: float, beta: float, t: float, rtol: float = 1e-6, panels: int = 41, return_error: bool = False):
    """Second moment ``int_{R^2} |K_t(x, y)|^2 dx dy`` of the non-central limit.

    The kernel is reduced in closed form to one-dimensional moments
    ``int_0^t v^{beta-1} e^{i omega v} dv``; the remaining double integral is
    taken in the coordinates ``p = (x+y)/2``, ``q = (x-y)/2`` with a
    singularity-adapted rule across ``|x y| = 0`` and an analytic tail.

    Notes
    -----
    Only ``0 <= beta < 1`` is supported.
    """
    if not (alpha < 1 and 0 <= beta < 1 and alpha + beta > 0.5):
        raise ParameterError("need alpha < 1, 0 <= beta < 1 and alpha + beta > 1/2")
    if alpha <= 0:
        raise ParameterError("alpha must be positive for the kernel representation")
    t = float(t)
    if t < 0:
        raise ParameterError("t must be nonnegative")
    if t == 0:
        return (0.0, 0.0) if return_error else 0.0

    h = alpha + beta
    quarter = 0.5 * np.pi / t
    # near p = 0 the inner integral behaves like p^{1 - 2 alpha}
    nodes0, w0 = singular_rule(quarter, max(2 * alpha - 1, 0.0), n=20, grading=0.25, levels=6)
    upper = panels * quarter
    nodes1, w1 = composite_legendre(np.linspace(quarter, upper, panels), 16)
    g0 = np.array([_inner_q_integral(p, alpha, beta, t) for p in nodes0])
    g1 = np.array([_inner_q_integral(p, alpha, beta, t) for p in nodes1])
    body = float(w0 @ g0 + w1 @ g1)
    # beyond the last panel: G(p) p^{1+2H} ~ c0 + c1 cos(2pt) + c2 sin(2pt)
    fit_range = nodes1 > upper / 2
    pf = nodes1[fit_range]
    design = np.column_stack([np.ones_like(pf), np.cos(2 * pf * t), np.sin(2 * pf * t)])
    target = g1[fit_range] * pf ** (1 + 2 * h)
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    resid = float(np.max(np.abs(design @ coef - target)) / np.max(np.abs(target)))
    power = 1 + 2 * h
    tail = coef[0] * upper ** (1 - power) / (power - 1)
    for c, kind in ((coef[1], "cos"), (coef[2], "sin")):
        val, _ = integrate.quad(lambda p: p ** (-power), upper, np.inf, weight=kind, wvar=2 * t)
        tail += c * val
    value = 8.0 * (body + tail)
    err = 8.0 * abs(tail) * max(resid, 1e-3)
    if err > rtol * abs(value) * 1e3:
        raise AccuracyError("Rosenblatt second moment", err / abs(value))
    return (value, err) if return_error else value


def rosenblatt_second_moment_beta0(alpha: float, t: float) -> float:
    """Closed form of the same moment when ``beta = 0``."""
    c = beta_fn(1 - alpha, 2 * alpha - 1) * 2 + beta_fn(1 - alpha, 1 - alpha)
    return 16 * math.pi**2 * c * t ** (2 * alpha) * (-gamma(-2 * alpha) * math.cos(math.pi * alpha))


# ---------------------------------------------------------------------------
# Berry-Esseen
# ---------------------------------------------------------------------------


def berry_esseen_limit(f: SpectralDensity, g: SpectralDensity, z):
    """``sqrt(2/3) [int f^3 g^3 / (int f^2 g^2)^{3/2}] (1 - z^2) exp(-z^2/2)``."""
    try:
        i3 = product_integral([f, f, f, g, g, g])
        i2 = product_integral([f, f, g, g])
    except DivergentIntegralError:
        raise
    z = np.asarray(z, dtype=float)
    return math.sqrt(2.0 / 3.0) * i3 / i2**1.5 * (1 - z**2) * np.exp(-(z**2) / 2)


def edgeworth_limit(f: SpectralDensity, g: SpectralDensity, z):
    """One-term Edgeworth limit of ``sqrt(T) (P(Q^_T <= z) - Phi(z))`` from the cumulant asymptotics."""
    return berry_esseen_limit(f, g, z) / math.sqrt(3.0)


def imhof_cdf(eigenvalues, x):
    """``P(sum_k lambda_k xi_k^2 <= x)`` for ``lambda_k >= 0`` by Imhof's inversion."""
    lam = np.asarray(eigenvalues, dtype=float)
    lam = lam[np.abs(lam) > 1e-14 * np.max(np.abs(lam))]

    def integrand(u, xv):
        theta = 0.5 * np.sum(np.arctan(lam * u)) - 0.5 * xv * u
        with np.errstate(over="ignore"):
            rho = np.exp(0.25 * np.sum(np.log1p((lam * u) ** 2)))
            return math.sin(theta) / (u * rho)

    scale = 1.0 / np.sqrt(np.sum(lam**2))
    out = []
    for xv in np.atleast_1d(x):
        val = 0.0
        # the integrand decays like u^{-1 - T/2}; a few scale lengths suffice
        edges = scale * np.array([0, 1, 2, 4, 8, 16, 32, 64, 128], dtype=float)
        for lo, hi in zip(edges[:-1], edges[1:]):
            piece, _ = integrate.quad(integrand, lo, hi, args=(xv,), limit=200, epsabs=1e-13, epsrel=1e-11)
            val += piece
        out.append(0.5 - val / math.pi)
    return np.asarray(out) if np.ndim(x) else float(out[0])


@dataclass(frozen=True)
class BerryEsseenGap:
    T: int
    z: np.ndarray
    gap: np.ndarray
    sup_scaled: float
    method: str


def berry_esseen_gap(spec: QuadraticFormSpec, z=None, method: str = "imhof", replicates: int = 10000, seed: int = 0) -> BerryEsseenGap:
    """``sqrt(T) (P(Q^_T <= z) - Phi(z))`` on a grid of ``z``.

    ``imhof`` inverts the exact characteristic function of ``Q_T``;
    ``monte_carlo`` uses the empirical distribution of simulated forms.
    """
    z = np.linspace(-4, 4, 161) if z is None else np.asarray(z, dtype=float)
    T = spec.T
    if method == "imhof":
        lam = product_eigenvalues(spec)
        if np.min(lam) < -1e-12 * np.max(np.abs(lam)):
            raise ParameterError("Imhof inversion is implemented for nonnegative spectra")
        mean = float(np.sum(lam))
        sd = math.sqrt(2 * float(np.sum(lam**2)))
        cdf = imhof_cdf(lam, mean + sd * z)
    elif method == "monte_carlo":
        samples, _ = normalized_forms(spec, replicates, seed)
        samples = samples / samples.std(ddof=1)
        cdf = np.searchsorted(np.sort(samples), z, side="right") / samples.size
    else:
        raise ParameterError(f"unknown method {method!r}")
    gap = math.sqrt(T) * (cdf - stats.norm.cdf(z))
    return BerryEsseenGap(T, z, gap, float(np.max(np.abs(gap))), method)


# ---------------------------------------------------------------------------
# large deviations
# ---------------------------------------------------------------------------


@dataclass
class LDPTable:
    x: np.ndarray
    rate: np.ndarray
    y_max: float
    sup_fg: float
    mean: float
    normalization: str


class _ProductGrid:
    """Quadrature nodes and values of ``f g`` over the domain."""

    def __init__(self, f, g, normalization, n=16):
        pts = sorted(set(f.breakpoints()) | set(g.breakpoints()))
        if f.domain == CIRCLE:
            edges = np.unique(np.concatenate([np.linspace(0, np.pi, 65), [b for b in pts if 0 < b < np.pi]]))
            nodes, weights = composite_legendre(edges, n)
        else:
            edges = np.unique(np.concatenate([np.linspace(0, 1, 33), [b for b in pts if 0 < b < 1]]))
            nodes, weights = composite_legendre(edges, n)
            # (1, inf) mapped by lam = 1/s
            s, ws = composite_legendre(np.linspace(0, 1, 33), n)
            nodes = np.concatenate([nodes, 1.0 / s])
            weights = np.concatenate([weights, ws / s**2])
        self.nodes = nodes
        self.weights = 2.0 * weights
        scale = 4 * np.pi**2 if normalization == "matrix" else 1.0
        self.values = scale * f(nodes) * g(nodes)
        self.sup = float(np.max(self.values))


def ldp_cgf(f: SpectralDensity, g: SpectralDensity, y, normalization: str = "formula"):
    """``V(f, g; y) = -(1/4 pi) int log(1 - 2 y f g)`` for ``y < 1/(2 sup f g)``."""
    grid = _ProductGrid(f, g, normalization)
    return _cgf(grid, np.asarray(y, dtype=float))


def _cgf(grid, y):
    arg = 1 - 2 * np.multiply.outer(y, grid.values)
    if np.any(arg <= 0):
        return np.where(np.all(arg > 0, axis=-1), -(np.log(np.where(arg > 0, arg, 1.0)) @ grid.weights) / (4 * np.pi), np.inf)
    return -(np.log(arg) @ grid.weights) / (4 * np.pi)


def _cgf_slope(grid, y):
    return float(np.sum(grid.weights * grid.values / (1 - 2 * y * grid.values)) / (2 * np.pi))


def ldp_rate_function(f: SpectralDensity, g: SpectralDensity, xs, normalization: str = "formula", eps: float = 1e-9) -> LDPTable:
    """Rate function ``I(x) = sup_{y < 1/(2C)} (x y - V(y))`` on a grid of ``x``.

    ``normalization="formula"`` uses ``f g`` as given; ``"matrix"`` multiplies
    ``f g`` by ``4 pi^2`` so that ``V'(0)`` equals the limit of ``E[Q_T]/T``
    for the Toeplitz matrices of this package. Points outside the effective
    domain get ``inf``.
    """
    if normalization not in ("formula", "matrix"):
        raise ParameterError("normalization must be 'formula' or 'matrix'")
    exps = [h.pole_exponent for h in (f, g)]
    if all(a is not None for a in exps) and sum(exps) > 0:
        raise ParameterError("f g must be essentially bounded; the product has a pole at the origin")
    grid = _ProductGrid(f, g, normalization)
    if not np.all(np.isfinite(grid.values)):
        raise ParameterError("f g must be essentially bounded")
    if np.any(grid.values < 0):
        raise ParameterError("the rate-function routine expects f g >= 0")
    C = grid.sup
    y_max = 1.0 / (2.0 * C) - eps
    mean = _cgf_slope(grid, 0.0)
    rates = []
    for x in np.atleast_1d(np.asarray(xs, dtype=float)):
        if x <= 0:
            rates.append(np.inf)
            continue
        lo = -1.0 / (2.0 * C)
        # move left until the objective x y - V(y) is increasing there
        while x - _cgf_slope(grid, lo) <= 0:
            lo *= 2.0
            if lo < -1e300:
                break
        objective = lambda y: -(x * y - float(_cgf(grid, np.asarray(y))))  # noqa: E731
        res = optimize.minimize_scalar(objective, bounds=(lo, y_max), method="bounded", options={"xatol": 1e-13 / (2 * C)})
        best = -res.fun
        # the supremum may sit at the upper edge of the domain
        best = max(best, -objective(y_max))
        rates.append(best)
    return LDPTable(np.atleast_1d(np.asarray(xs, dtype=float)), np.asarray(rates), y_max, C, mean, normalization)
