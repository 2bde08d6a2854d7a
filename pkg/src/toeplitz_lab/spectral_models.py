"""Parametric spectral densities, Fourier coefficients and closed-form integrals.

All densities are even functions. Those living on the circle ``(-pi, pi]``
generate Toeplitz matrices through their Fourier coefficients

    fhat(k) = integral over (-pi, pi] of exp(i k lam) f(lam) dlam,

and those on the real line generate truncated Toeplitz operators through
their Fourier transform ``r(t)``, which is the covariance function of the
associated stationary process.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import integrate
from scipy.special import beta as beta_fn
from scipy.special import gamma, gammaln

from ._numerics import cosine_moments, half_period_rule, singular_rule
from .errors import (
    AccuracyError,
    DivergentIntegralError,
    ParameterError,
    SingularPointError,
    UnclassifiableError,
)

CIRCLE = "circle"
LINE = "line"

#: relative error targeted by the quadrature routines
TARGET_TOL = 1e-10
#: relative error above which quadrature results are rejected
FALLBACK_TOL = 1e-8


class MemoryClass(str, Enum):
    SHORT = "ShortMemory"
    LONG = "LongMemory"
    ANTI_PERSISTENT = "AntiPersistent"
    MIXED = "Mixed"


# ---------------------------------------------------------------------------
# density kinds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralDensity:
    """Base class for the parametric density kinds.

    Subclasses describe their behaviour at the origin through
    ``pole_exponent`` (``|h(lam)| <= C |lam|**(-a)`` near 0) and an optional
    ``log_exponent`` for the slowly varying factor ``|log|^(-gamma)``.
    """

    @property
    def kind(self) -> str:
        return type(self).__name__

    domain = CIRCLE
    signed = False

    @property
    def pole_exponent(self):
        return 0.0

    @property
    def log_exponent(self):
        return 0.0

    @property
    def decay_exponent(self):
        """Power of the decay at infinity (line densities only)."""
        return None

    @property
    def has_pole(self):
        a = self.pole_exponent
        return a is not None and (a > 0 or (a == 0 and self.log_exponent < 0))

    def breakpoints(self):
        """Points in (0, pi] where the density is not smooth."""
        return ()

    def __call__(self, lam):
        lam = np.abs(np.asarray(lam, dtype=float))
        if self.has_pole and np.any(lam == 0):
            raise SingularPointError(f"{self.kind} has a pole at lambda = 0")
        if self.domain == CIRCLE:
            lam = np.where(lam > np.pi, np.abs(np.mod(lam + np.pi, 2 * np.pi) - np.pi), lam)
        return self._value(lam)

    def _value(self, lam):
        raise NotImplementedError

    def _closed_coefficients(self, kmax):
        """Exact Fourier coefficients 0..kmax, or None when unavailable."""
        return None

    def _closed_integral(self):
        """Exact integral over the domain, or None when unavailable."""
        return None

    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params(), "domain": self.domain}


@dataclass(frozen=True)
class Constant(SpectralDensity):
    """Flat density ``h(lam) = c`` on the circle (c may be negative for a generating function)."""

    c: float

    @property
    def signed(self):
        return self.c < 0

    def _value(self, lam):
        return np.full(np.shape(lam), float(self.c))

    def _closed_coefficients(self, kmax):
        out = np.zeros(kmax + 1)
        out[0] = 2 * np.pi * self.c
        return out

    def _closed_integral(self):
        return 2 * np.pi * self.c

    def params(self):
        return {"c": self.c}


@dataclass(frozen=True)
class CosineSeries(SpectralDensity):
    """Trigonometric polynomial ``h(lam) = sum_j a_j cos(j lam)``; useful as a signed generating function."""

    coeffs: tuple

    signed = True

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(a) for a in self.coeffs))
        if not self.coeffs:
            raise ParameterError("CosineSeries needs at least one coefficient")

    def _value(self, lam):
        j = np.arange(len(self.coeffs))
        return np.cos(np.multiply.outer(lam, j)) @ np.asarray(self.coeffs)

    def _closed_coefficients(self, kmax):
        out = np.zeros(kmax + 1)
        a = np.asarray(self.coeffs)
        n = min(kmax + 1, a.size)
        out[:n] = np.pi * a[:n]
        out[0] = 2 * np.pi * a[0]
        return out

    def _closed_integral(self):
        return 2 * np.pi * self.coeffs[0]

    def params(self):
        return {"coeffs": list(self.coeffs)}


def _arfima_covariances(sigma2, d, kmax):
    """Covariances of ARFIMA(0,d,0) with innovation variance sigma2, lags 0..kmax."""
    r0 = sigma2 * math.exp(gammaln(1 - 2 * d) - 2 * gammaln(1 - d))
    k = np.arange(1, kmax + 1, dtype=float)
    ratios = (k - 1 + d) / (k - d)
    return r0 * np.concatenate([[1.0], np.cumprod(ratios)])


def _arfima_power_integral(d):
    """Integral of |1 - e^{i lam}|^{-2d} over the circle."""
    if d >= 0.5:
        raise DivergentIntegralError(f"|1-e^(i lam)|^(-2d) is not integrable for d = {d}")
    return 2 * np.pi * math.exp(gammaln(1 - 2 * d) - 2 * gammaln(1 - d))


@dataclass(frozen=True)
class Arfima0d0(SpectralDensity):
    """Fractionally integrated noise, ``sigma2/(2 pi) |1 - e^{i lam}|^{-2d}``."""

    sigma2: float
    d: float

    def __post_init__(self):
        if not self.d < 0.5:
            raise ParameterError(f"ARFIMA density is not integrable for d = {self.d} >= 1/2")
        if self.sigma2 <= 0:
            raise ParameterError("sigma2 must be positive")

    @property
    def pole_exponent(self):
        return 2.0 * self.d

    def _value(self, lam):
        with np.errstate(divide="ignore"):
            return self.sigma2 / (2 * np.pi) * (2 * np.sin(lam / 2)) ** (-2 * self.d)

    def _closed_coefficients(self, kmax):
        return _arfima_covariances(self.sigma2, self.d, kmax)

    def _closed_integral(self):
        return self.sigma2 / (2 * np.pi) * _arfima_power_integral(self.d)

    def params(self):
        return {"sigma2": self.sigma2, "d": self.d}


@dataclass(frozen=True)
class ArfimaPDQ(SpectralDensity):
    """ARFIMA(p,d,q) density ``sigma2/(2 pi) |1-e^{i lam}|^{-2d} |theta(e^{i lam})|^2 / |phi(e^{i lam})|^2``.

    ``phi(z) = 1 - sum ar[j] z^{j+1}`` and ``theta(z) = 1 + sum ma[j] z^{j+1}``.
    """

    d: float
    ar: tuple = ()
    ma: tuple = ()
    sigma2: float = 2 * np.pi

    def __post_init__(self):
        object.__setattr__(self, "ar", tuple(float(a) for a in self.ar))
        object.__setattr__(self, "ma", tuple(float(a) for a in self.ma))
        if not self.d < 0.5:
            raise ParameterError(f"ARFIMA density is not integrable for d = {self.d} >= 1/2")
        if self.sigma2 <= 0:
            raise ParameterError("sigma2 must be positive")
        if self.ar:
            roots = np.roots(np.concatenate([-np.asarray(self.ar)[::-1], [1.0]]))
            if np.any(np.abs(roots) <= 1.0 + 1e-12):
                raise ParameterError("autoregressive polynomial must have all roots outside the unit circle")

    @property
    def pole_exponent(self):
        return 2.0 * self.d

    def _arma_factor(self, lam):
        z = np.exp(1j * np.asarray(lam))
        num = np.polyval(np.concatenate([np.asarray(self.ma)[::-1], [1.0]]), z)
        den = np.polyval(np.concatenate([-np.asarray(self.ar)[::-1], [1.0]]), z)
        return np.abs(num) ** 2 / np.abs(den) ** 2

    def _value(self, lam):
        with np.errstate(divide="ignore"):
            frac = (2 * np.sin(lam / 2)) ** (-2 * self.d)
        return self.sigma2 / (2 * np.pi) * frac * self._arma_factor(lam)

    def _arma_coefficients(self):
        """Fourier coefficients of the smooth ARMA factor, truncated where negligible."""
        n = 256
        while True:
            lam = 2 * np.pi * np.arange(n) / n
            h = np.fft.fft(self._arma_factor(lam)).real * (2 * np.pi / n)
            tail = np.abs(h[n // 2 - 4 : n // 2 + 4]).max()
            if tail < 1e-17 * abs(h[0]) or n > 2**22:
                half = h[: n // 2]
                keep = np.nonzero(np.abs(half) > 1e-18 * abs(h[0]))[0]
                return half[: keep[-1] + 1]
            n *= 2

    def _closed_coefficients(self, kmax):
        arma = self._arma_coefficients()
        j = arma.size - 1
        base = _arfima_covariances(self.sigma2, self.d, kmax + j)
        lags = np.arange(-j, kmax + j + 1)
        two_sided = base[np.abs(lags)]
        kernel = np.concatenate([arma[:0:-1], arma])
        full = np.convolve(two_sided, kernel, mode="valid") / (2 * np.pi)
        return full[: kmax + 1]

    def _closed_integral(self):
        return float(self._closed_coefficients(0)[0])

    def params(self):
        return {"d": self.d, "ar": list(self.ar), "ma": list(self.ma), "sigma2": self.sigma2}


@dataclass(frozen=True)
class FGn(SpectralDensity):
    """Fractional Gaussian noise with variance ``sigma02`` and Hurst index ``H``.

    The aliasing sum is truncated at ``|k| <= terms`` and the remainder is
    replaced by its midpoint-rule integral, whose relative error is of
    order ``terms**-2``.
    """

    sigma02: float
    H: float
    terms: int = 200

    def __post_init__(self):
        if not 0 < self.H < 1:
            raise ParameterError("Hurst index must lie in (0, 1)")
        if self.sigma02 <= 0:
            raise ParameterError("sigma02 must be positive")

    @property
    def scale(self):
        """Constant ``c`` in front of the aliasing sum, fixed by ``r(0) = sigma02``."""
        return self.sigma02 * gamma(2 * self.H + 1) * math.sin(math.pi * self.H) / (2 * math.pi)

    @property
    def pole_exponent(self):
        return 2.0 * self.H - 1.0

    def _value(self, lam):
        lam = np.asarray(lam, dtype=float)
        s = 2 * self.H + 1
        k = np.arange(-self.terms, self.terms + 1)
        with np.errstate(divide="ignore"):
            total = (np.abs(np.add.outer(lam, 2 * np.pi * k)) ** (-s)).sum(axis=-1)
        edge = 2 * np.pi * (self.terms + 0.5)
        tail = ((edge + lam) ** (1 - s) + (edge - lam) ** (1 - s)) / (2 * np.pi * (s - 1))
        with np.errstate(invalid="ignore"):
            factor = 4.0 * np.sin(lam / 2) ** 2
            out = self.scale * factor * (total + tail)
        if np.any(lam == 0):
            # limit of |1-e^{i lam}|^2 |lam|^{-2H-1} at the origin
            out = np.where(lam == 0, self.scale if self.H == 0.5 else 0.0, out)
        return out

    def _closed_coefficients(self, kmax):
        k = np.arange(kmax + 1, dtype=float)
        two_h = 2 * self.H
        out = np.empty(kmax + 1)
        small = k < 8
        ks = k[small]
        out[small] = 0.5 * self.sigma02 * (
            np.abs(ks + 1) ** two_h - 2 * ks**two_h + np.abs(ks - 1) ** two_h
        )
        kl = k[~small]
        # second difference written without cancellation
        lp = np.expm1(two_h * np.log1p(1 / kl))
        lm = np.expm1(two_h * np.log1p(-1 / kl))
        out[~small] = 0.5 * self.sigma02 * kl**two_h * (lp + lm)
        return out

    def _closed_integral(self):
        return self.sigma02

    def params(self):
        return {"sigma02": self.sigma02, "H": self.H, "terms": self.terms}


@dataclass(frozen=True)
class FRBm(SpectralDensity):
    """Fractional Riesz-Bessel density ``C |lam|^{-2 alpha} (1 + lam^2)^{-beta}`` on the real line."""

    C: float
    alpha: float
    beta: float

    domain = LINE

    def __post_init__(self):
        if self.C <= 0:
            raise ParameterError("C must be positive")
        if not self.alpha < 0.5:
            raise ParameterError(f"alpha = {self.alpha} must be < 1/2 for integrability at 0")
        if not self.alpha + self.beta > 0.5:
            raise ParameterError("alpha + beta must exceed 1/2 for integrability at infinity")

    @property
    def pole_exponent(self):
        return 2.0 * self.alpha

    @property
    def decay_exponent(self):
        return 2.0 * (self.alpha + self.beta)

    def _value(self, lam):
        with np.errstate(divide="ignore"):
            return self.C * lam ** (-2 * self.alpha) * (1 + lam**2) ** (-self.beta)

    def _closed_integral(self):
        a, b = self.alpha, self.beta
        return self.C * beta_fn(0.5 - a, a + b - 0.5)

    def params(self):
        return {"C": self.C, "alpha": self.alpha, "beta": self.beta}


@dataclass(frozen=True)
class PowerLogLaw(SpectralDensity):
    """Power law with a logarithmic slowly varying factor, ``|lam|^{-alpha} (log(scale/|lam|))^{-gamma}``.

    ``scale`` must exceed pi so that the logarithm stays positive on the
    circle; the factor then increases on (0, pi], is bounded, and vanishes
    at the origin when ``gamma > 0``.
    """

    alpha: float
    gamma: float = 0.0
    scale: float = 2 * np.pi

    def __post_init__(self):
        if self.scale <= np.pi:
            raise ParameterError("scale must exceed pi")
        if not (self.alpha < 1 or (self.alpha == 1 and self.gamma > 1)):
            raise ParameterError("power-log density is not integrable")

    @property
    def pole_exponent(self):
        return float(self.alpha)

    @property
    def log_exponent(self):
        return float(self.gamma)

    def _value(self, lam):
        with np.errstate(divide="ignore"):
            return lam ** (-self.alpha) * np.log(self.scale / lam) ** (-self.gamma)

    def _closed_integral(self):
        if self.gamma == 0:
            return 2 * np.pi ** (1 - self.alpha) / (1 - self.alpha)
        return None

    def params(self):
        return {"alpha": self.alpha, "gamma": self.gamma, "scale": self.scale}


@dataclass(frozen=True)
class PiecewiseDyadic(SpectralDensity):
    """Dyadic step function taking ``(2^s / s^2)^{1/p}`` on ``[2^{-s-1}, 2^{-s}]``.

    Only panels with ``s = 2m + offset`` (m >= 1) are active; all other
    panels and all of ``|lam| > 1`` are zero. The function is reflected to
    negative frequencies.
    """

    p: float
    offset: int = 0
    max_level: int = 0
    _levels: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.p <= 1:
            raise ParameterError("exponent p must exceed 1")
        if self.offset not in (0, 1):
            raise ParameterError("offset must be 0 or 1")
        top = self.max_level
        if top <= 0:
            # stop once a panel's mass drops below 1e-18 of the first panel
            s = np.arange(2, 4000)
            mass = s / self.p * np.log(2) - 2 / self.p * np.log(s) - (s + 1) * np.log(2)
            top = int(s[np.nonzero(mass < mass[0] + np.log(1e-18))[0][0]])
        levels = np.arange(2 + self.offset, top + 1, 2)
        object.__setattr__(self, "_levels", levels)

    @property
    def pole_exponent(self):
        return 1.0 / self.p

    @property
    def log_exponent(self):
        return 2.0 / self.p

    def panel_values(self):
        s = self._levels.astype(float)
        return s, np.exp((s * np.log(2) - 2 * np.log(s)) / self.p)

    def breakpoints(self):
        s = self._levels
        return tuple(np.unique(np.concatenate([2.0 ** (-s - 1.0), 2.0 ** (-s.astype(float))])))

    def _value(self, lam):
        lam = np.asarray(lam, dtype=float)
        out = np.zeros(lam.shape)
        inside = (lam > 0) & (lam <= 1)
        with np.errstate(divide="ignore"):
            s = np.floor(-np.log2(np.where(inside, lam, 1.0))).astype(int)
        active = inside & (s >= 2) & ((s - self.offset) % 2 == 0) & (s <= self._levels[-1])
        sv = s[active].astype(float)
        out[active] = np.exp((sv * np.log(2) - 2 * np.log(sv)) / self.p)
        return out

    def _closed_coefficients(self, kmax):
        s, v = self.panel_values()
        lo, hi = 2.0 ** (-s - 1), 2.0**-s
        out = np.empty(kmax + 1)
        out[0] = 2 * np.sum(v * (hi - lo))
        k = np.arange(1, kmax + 1, dtype=float)
        for start in range(0, k.size, 2048):
            kk = k[start : start + 2048, None]
            # sin(k hi) - sin(k lo) = 2 cos(k (hi+lo)/2) sin(k (hi-lo)/2)
            diff = 2 * np.cos(kk * (hi + lo) / 2) * np.sin(kk * (hi - lo) / 2)
            out[1 + start : 1 + start + kk.shape[0]] = 2 * (diff / kk) @ v
        return out

    def _closed_integral(self):
        return float(self._closed_coefficients(0)[0])

    def params(self):
        return {"p": self.p, "offset": self.offset, "max_level": self.max_level}


@dataclass(frozen=True)
class Tabulated(SpectralDensity):
    """Density given by values on a grid of ``[0, pi]``, linearly interpolated and reflected."""

    grid: tuple
    values: tuple

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape or g.size < 2:
            raise ParameterError("grid and values must be 1-D of equal length >= 2")
        if np.any(np.diff(g) <= 0) or g[0] < 0 or g[-1] > np.pi + 1e-12:
            raise ParameterError("grid must be strictly increasing inside [0, pi]")
        object.__setattr__(self, "grid", tuple(g))
        object.__setattr__(self, "values", tuple(v))

    @property
    def signed(self):
        return min(self.values) < 0

    @property
    def pole_exponent(self):
        return None

    def breakpoints(self):
        return self.grid

    def _value(self, lam):
        return np.interp(lam, self.grid, self.values)

    def _segments(self):
        g = np.asarray(self.grid)
        v = np.asarray(self.values)
        a = np.concatenate([[0.0], g, [np.pi]])
        y = np.concatenate([[v[0]], v, [v[-1]]])
        keep = np.diff(a) > 0
        return a[:-1][keep], a[1:][keep], y[:-1][keep], y[1:][keep]

    def _closed_coefficients(self, kmax):
        a, b, ya, yb = self._segments()
        slope = (yb - ya) / (b - a)
        out = np.empty(kmax + 1)
        out[0] = 2 * np.sum(0.5 * (ya + yb) * (b - a))
        k = np.arange(1, kmax + 1, dtype=float)
        for start in range(0, k.size, 2048):
            kk = k[start : start + 2048, None]
            sb, sa = np.sin(kk * b), np.sin(kk * a)
            cb, ca = np.cos(kk * b), np.cos(kk * a)
            const = ya * (sb - sa) / kk
            lin = slope * ((b - a) * sb / kk + (cb - ca) / kk**2)
            out[1 + start : 1 + start + kk.shape[0]] = 2 * (const + lin).sum(axis=1)
        return out

    def _closed_integral(self):
        return float(self._closed_coefficients(0)[0])

    def params(self):
        return {"grid": list(self.grid), "values": list(self.values)}


@dataclass(frozen=True)
class LinearCombination(SpectralDensity):
    """Weighted sum ``sum_i w_i h_i`` of densities sharing one domain."""

    terms: tuple

    def __post_init__(self):
        terms = tuple((float(w), h) for w, h in self.terms)
        if not terms:
            raise ParameterError("LinearCombination needs at least one term")
        domains = {h.domain for _, h in terms}
        if len(domains) != 1:
            raise ParameterError("all terms must share a domain")
        object.__setattr__(self, "terms", terms)

    @property
    def domain(self):
        return self.terms[0][1].domain

    @property
    def signed(self):
        return any(w < 0 or h.signed for w, h in self.terms)

    @property
    def pole_exponent(self):
        exps = [h.pole_exponent for w, h in self.terms if w != 0]
        if any(a is None for a in exps):
            return None
        return max(exps) if exps else 0.0

    @property
    def log_exponent(self):
        top = self.pole_exponent
        if top is None:
            return 0.0
        return min(h.log_exponent for w, h in self.terms if w != 0 and h.pole_exponent == top)

    @property
    def decay_exponent(self):
        exps = [h.decay_exponent for w, h in self.terms if w != 0]
        return None if any(e is None for e in exps) else min(exps)

    def breakpoints(self):
        pts = set()
        for _, h in self.terms:
            pts.update(h.breakpoints())
        return tuple(sorted(pts))

    def _value(self, lam):
        return sum(w * h._value(lam) for w, h in self.terms)

    def _closed_coefficients(self, kmax):
        return sum(w * fourier_coefficients(h, kmax) for w, h in self.terms)

    def _closed_integral(self):
        return sum(w * total_integral(h) for w, h in self.terms)

    def params(self):
        return {"terms": [{"weight": w, "density": h.to_dict()} for w, h in self.terms]}


KINDS = {
    cls.__name__: cls
    for cls in (
        Constant,
        CosineSeries,
        Arfima0d0,
        ArfimaPDQ,
        FGn,
        FRBm,
        PowerLogLaw,
        PiecewiseDyadic,
        Tabulated,
        LinearCombination,
    )
}


def density_from_dict(obj) -> SpectralDensity:
    """Build a density from its JSON form ``{kind, params, domain}``."""
    try:
        kind = obj["kind"]
        params = dict(obj.get("params", {}))
    except (TypeError, KeyError) as exc:
        raise ParameterError(f"density object needs 'kind' and 'params': {obj!r}") from exc
    if kind not in KINDS:
        raise ParameterError(f"unknown density kind {kind!r}")
    if kind == "LinearCombination":
        params["terms"] = [(t["weight"], density_from_dict(t["density"])) for t in params["terms"]]
    try:
        dens = KINDS[kind](**params)
    except TypeError as exc:
        raise ParameterError(f"bad parameters for {kind}: {exc}") from exc
    domain = obj.get("domain", dens.domain)
    if domain != dens.domain:
        raise ParameterError(f"{kind} lives on the {dens.domain}, not the {domain}")
    return dens


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def evaluate(f: SpectralDensity, lam):
    """Value of the density at ``lam`` (scalar or array)."""
    out = f(lam)
    return float(out) if np.ndim(out) == 0 else out


def _check_accuracy(value, error, what):
    scale = max(abs(value), 1e-300)
    if error > FALLBACK_TOL * scale and error > 1e-14:
        raise AccuracyError(f"{what} did not converge", error / scale)
    if error > TARGET_TOL * scale and error > 1e-14:
        warnings.warn(f"{what}: relative error {error / scale:.1e} above 1e-10 target", RuntimeWarning)


def _quadrature_coefficients(f, kmax, n=16):
    a = f.pole_exponent
    if a is None:
        a = 0.0
    nodes, weights = half_period_rule(kmax, a, n=n, breakpoints=f.breakpoints())
    return 2 * cosine_moments(nodes, weights * f._value(nodes), kmax)


def fourier_coefficients(f: SpectralDensity, kmax: int, method: str = "auto") -> np.ndarray:
    """Fourier coefficients ``fhat(0), ..., fhat(kmax)`` of a circle density.

    Parameters
    ----------
    method : {"auto", "closed", "quadrature"}
        ``auto`` uses the exact formula when the kind has one.
    """
    if f.domain != CIRCLE:
        raise ParameterError("Fourier coefficients are defined for circle densities")
    kmax = int(kmax)
    if kmax < 0:
        raise ParameterError("kmax must be nonnegative")
    if method in ("auto", "closed"):
        out = f._closed_coefficients(kmax)
        if out is not None:
            return np.asarray(out, dtype=float)
        if method == "closed":
            raise ParameterError(f"{f.kind} has no closed-form coefficients")
    a = f.pole_exponent
    if a is not None and a >= 1:
        raise DivergentIntegralError(f"{f.kind} is not integrable")
    out = _quadrature_coefficients(f, kmax)
    # error estimate from a refined rule on a few representative lags
    probe = sorted({0, kmax // 2, kmax})
    fine = _quadrature_coefficients(f, kmax, n=24)
    err = np.max(np.abs(fine[probe] - out[probe]))
    _check_accuracy(float(np.max(np.abs(fine[probe]))), err, f"Fourier coefficients of {f.kind}")
    return fine


def fourier_coefficient(f: SpectralDensity, k: int, method: str = "auto") -> float:
    """Single Fourier coefficient ``fhat(k)``; symmetric in ``k``."""
    return float(fourier_coefficients(f, abs(int(k)), method=method)[-1])


def fourier_transform(f: SpectralDensity, t, tol: float = 1e-11):
    """Covariance ``r(t)`` of a line density, i.e. its Fourier transform.

    The integral over (0, inf) is split into a singular panel near the
    origin (Gauss-Jacobi), a finite oscillatory stretch and a QAWF tail.
    """
    if f.domain != LINE:
        raise ParameterError("Fourier transforms are defined for line densities")
    ts = np.atleast_1d(np.abs(np.asarray(t, dtype=float)))
    out = np.array([_transform_one(f, float(x), tol) for x in ts])
    return float(out[0]) if np.ndim(t) == 0 else out.reshape(np.shape(t))


def _transform_one(f, t, tol):
    if t == 0:
        return total_integral(f)
    a = f.pole_exponent or 0.0
    edge = min(1.0, 1.0 / t)
    nodes, weights = singular_rule(edge, a, n=30)
    head = np.sum(weights * f._value(nodes) * np.cos(t * nodes))
    err = 0.0
    mid = 0.0
    # QAWF extrapolates poorly over the first slowly decaying cycles, so
    # start it only after a few dozen periods
    start = max(1.0, 40.0 * np.pi / t)
    if edge < start:
        with warnings.catch_warnings():
            # the error estimate is checked below
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            mid, e1 = integrate.quad(f._value, edge, start, weight="cos", wvar=t, limit=800, epsabs=tol * 1e-2, epsrel=1e-13)
        err += e1
    tail, e2 = integrate.quad(f._value, start, np.inf, weight="cos", wvar=t, limlst=200, epsabs=tol * 1e-2)
    err += e2
    value = 2.0 * (head + mid + tail)
    if 2 * err > tol * max(1.0, abs(value)) and 2 * err > FALLBACK_TOL * abs(value):
        raise AccuracyError(f"Fourier transform of {f.kind} at t={t}", 2 * err / max(abs(value), 1e-300))
    return value


def _integrable_exponent(exponent, log_exp, what):
    if exponent > 1 or (exponent == 1 and log_exp <= 1):
        raise DivergentIntegralError(f"{what} is not integrable at the origin")


def _generic_integral(func, exponent, breakpoints, upper, line=False, log_exp=0.0):
    """Integrate an even function over the domain using its singular exponent at 0."""
    pts = sorted({b for b in breakpoints if 0 < b < upper} | {min(1.0, upper)})
    total, err = 0.0, 0.0
    first = pts[0]
    if exponent >= 1:
        # borderline pole x^{-1} |log x|^{-gamma}: integrate in s = -log x
        def in_log(s):
            x = math.exp(-s)
            return float(func(np.asarray(x)) * x)

        if log_exp <= 1:
            raise DivergentIntegralError("borderline pole without enough logarithmic decay")
        s_max = 600.0
        val, e = integrate.quad(in_log, -math.log(first), s_max, limit=400, epsabs=1e-13, epsrel=1e-11)
        # beyond s_max the integrand behaves like a (s + c)^{-log_exp}; fit c from two samples
        v_half, v_end = in_log(s_max / 2), in_log(s_max)
        shift = 0.0
        if v_end > 0 and v_half > 0:
            root = (v_half / v_end) ** (1.0 / log_exp)
            if root != 1:
                shift = (root * s_max / 2 - s_max) / (1 - root)
        val += v_end * (s_max + shift) / (log_exp - 1)
    elif exponent != 0:
        floor = first * 1e-15

        def smooth_part(x):
            # QAWS samples the endpoint; use the one-sided limit there
            x = max(x, floor)
            return float(func(np.asarray(x)) * x**exponent)

        val, e = integrate.quad(smooth_part, 0.0, first, weight="alg", wvar=(-exponent, 0.0), limit=400)
    else:
        val, e = integrate.quad(lambda x: float(func(np.asarray(x))), 0.0, first, limit=400)
    total, err = total + val, err + e
    edges = pts + ([upper] if pts[-1] < upper else [])
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, e = integrate.quad(lambda x: float(func(np.asarray(x))), lo, hi, limit=400, epsabs=1e-14, epsrel=1e-12)
        total, err = total + val, err + e
    if line:
        val, e = integrate.quad(lambda x: float(func(np.asarray(x))), edges[-1], np.inf, limit=400, epsabs=1e-14, epsrel=1e-12)
        total, err = total + val, err + e
    return 2 * total, 2 * err


def total_integral(f: SpectralDensity) -> float:
    """Integral of the density over its domain."""
    exact = f._closed_integral()
    if exact is not None:
        return float(exact)
    a = f.pole_exponent or 0.0
    _integrable_exponent(a, f.log_exponent, f.kind)
    value, err = _generic_integral(f._value, a, f.breakpoints(), np.pi if f.domain == CIRCLE else 1.0, f.domain == LINE, f.log_exponent)
    _check_accuracy(value, err, f"integral of {f.kind}")
    return value


def product_integral(densities, exponents=None) -> float:
    """Integral over the common domain of ``prod_i h_i**tau_i`` with ``tau_i = +-1``."""
    densities = list(densities)
    taus = [1] * len(densities) if exponents is None else [int(t) for t in exponents]
    if len(taus) != len(densities) or not densities:
        raise ParameterError("one exponent per density is required")
    domains = {h.domain for h in densities}
    if len(domains) != 1:
        raise ParameterError("densities must share a domain")
    domain = domains.pop()

    exact = _exact_product_integral(densities, taus)
    if exact is not None:
        return exact

    if any(h.pole_exponent is None for h in densities):
        exponent, log_exp = 0.0, 0.0
    else:
        exponent = sum(t * h.pole_exponent for h, t in zip(densities, taus))
        log_exp = sum(t * h.log_exponent for h, t in zip(densities, taus))
    _integrable_exponent(exponent, log_exp, "product of densities")
    if domain == LINE:
        decay = sum(t * (h.decay_exponent or 0.0) for h, t in zip(densities, taus))
        if decay <= 1:
            raise DivergentIntegralError("product of densities is not integrable at infinity")

    def func(x):
        out = np.ones_like(np.asarray(x, dtype=float))
        for h, t in zip(densities, taus):
            out = out * (h._value(x) if t > 0 else 1.0 / h._value(x))
        return out

    pts = set()
    for h in densities:
        pts.update(h.breakpoints())
    value, err = _generic_integral(func, max(exponent, 0.0), pts, np.pi if domain == CIRCLE else 1.0, domain == LINE, log_exp)
    _check_accuracy(value, err, "product integral")
    return value


def _exact_product_integral(densities, taus):
    """Closed forms for products of ARFIMA(0,d,0)/constant or FRBm factors."""
    if all(isinstance(h, (Arfima0d0, Constant)) for h in densities):
        scale, d = 1.0, 0.0
        for h, t in zip(densities, taus):
            if isinstance(h, Constant):
                if h.c == 0 and t < 0:
                    raise DivergentIntegralError("reciprocal of a zero constant")
                scale *= h.c**t
            else:
                scale *= (h.sigma2 / (2 * np.pi)) ** t
                d += t * h.d
        return scale * _arfima_power_integral(d)
    if all(_is_step(h) for h in densities) and densities[0].domain == CIRCLE:
        # piecewise constant: midpoint values times panel widths are exact
        pts = {np.pi}
        for h in densities:
            pts.update(h.breakpoints())
        edges = np.array(sorted(x for x in pts if 0 < x <= np.pi))
        edges = np.concatenate([[0.0], edges])
        mids = 0.5 * (edges[:-1] + edges[1:])
        vals = np.ones_like(mids)
        for h, t in zip(densities, taus):
            v = h._value(mids)
            if t < 0 and np.any(v == 0):
                raise DivergentIntegralError("reciprocal of a step function that vanishes")
            vals = vals * (v if t > 0 else 1.0 / v)
        return float(2.0 * np.sum(vals * np.diff(edges)))
    if all(isinstance(h, FRBm) for h in densities) and all(t == 1 for t in taus):
        a = sum(h.alpha for h in densities)
        b = sum(h.beta for h in densities)
        if a >= 0.5 or a + b <= 0.5:
            raise DivergentIntegralError("FRBm product is not integrable")
        return float(np.prod([h.C for h in densities]) * beta_fn(0.5 - a, a + b - 0.5))
    return None


def _is_step(h):
    if isinstance(h, LinearCombination):
        return all(_is_step(g) for _, g in h.terms)
    return isinstance(h, (Constant, PiecewiseDyadic))


def closed_form_integral(f1: SpectralDensity, f2: SpectralDensity) -> float:
    """Integral of ``f1 * f2`` over the common domain (closed form when available)."""
    return product_integral([f1, f2])


@dataclass(frozen=True)
class LpModulus:
    """Estimated L^p modulus of continuity on a dyadic grid."""

    deltas: np.ndarray
    omegas: np.ndarray
    slope: float
    expected_slope: float


def lp_modulus_check(f: SpectralDensity, p: float, sigma: float, deltas=None) -> LpModulus:
    """Estimate ``omega_p(f, delta)`` and fit its log-log slope.

    The slope is expected to be at least ``1/p - sigma`` when ``f`` has a
    power singularity of order ``sigma`` at the origin.
    """
    if p <= 1:
        raise ParameterError("p must exceed 1")
    if not 0 < sigma < 1 / p:
        raise ParameterError(f"sigma = {sigma} must lie in (0, 1/p) = (0, {1 / p:.4g})")
    if deltas is None:
        deltas = 2.0 ** -np.arange(4, 11)
    deltas = np.asarray(deltas, dtype=float)
    omegas = np.array([_lp_modulus(f, p, dl) for dl in deltas])
    if np.all(omegas == 0):
        slope = float("nan")
    else:
        slope = float(np.polyfit(np.log(deltas), np.log(omegas), 1)[0])
    return LpModulus(deltas, omegas, slope, 1 / p - sigma)


def _lp_modulus(f, p, delta):
    best = 0.0
    for frac in (1.0, 0.75, 0.5):
        h = frac * delta
        best = max(best, _shift_norm(f, p, h))
    return best


def _shift_norm(f, p, h):
    if isinstance(f, Constant):
        return 0.0

    def diff(x):
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.abs(f._value(np.abs(x + h)) - f._value(np.abs(x))) ** p
        return float(np.nan_to_num(val, nan=0.0, posinf=0.0))

    if f.domain == CIRCLE:
        pieces = [(-np.pi, -h), (-h, 0.0), (0.0, np.pi - h), (np.pi - h, np.pi)]
        total = 0.0
        for lo, hi in pieces:
            total += integrate.quad(diff, lo, hi, limit=400, epsabs=1e-15)[0]
    else:
        big = 1e3
        pieces = [(-big, -h - 1), (-h - 1, -h), (-h, 0.0), (0.0, 1.0), (1.0, big)]
        total = 0.0
        for lo, hi in pieces:
            total += integrate.quad(diff, lo, hi, limit=400, epsabs=1e-15)[0]
    return total ** (1 / p)


def classify_memory(f: SpectralDensity) -> MemoryClass:
    """Short / long / anti-persistent classification from the behaviour at the origin."""
    if isinstance(f, LinearCombination):
        labels = {classify_memory(h) for w, h in f.terms if w != 0}
        return labels.pop() if len(labels) == 1 else MemoryClass.MIXED
    a = f.pole_exponent
    if a is None:
        raise UnclassifiableError(f"{f.kind} carries no exponent metadata")
    if a > 0:
        return MemoryClass.LONG
    if a < 0:
        return MemoryClass.ANTI_PERSISTENT
    return MemoryClass.SHORT


# ---------------------------------------------------------------------------
# FRBm covariance asymptotics
# ---------------------------------------------------------------------------


def frbm_covariance_constant(C: float, alpha: float) -> float:
    """Constant ``A`` in ``r(t) ~ A t^{2 alpha - 1}`` for an FRBm density, reflection form."""
    return math.pi * C / (math.cos(math.pi * alpha) * gamma(2 * alpha))


def frbm_covariance_constant_sine(C: float, alpha: float) -> float:
    """The same constant written as ``2 C sin(pi alpha) Gamma(1 - 2 alpha)``."""
    return 2 * C * math.sin(math.pi * alpha) * gamma(1 - 2 * alpha)
