"""Quadrature rules and FFT helpers used by several modules."""

from functools import lru_cache

import numpy as np
from scipy import fft as sfft
from scipy.special import roots_jacobi, roots_legendre


@lru_cache(maxsize=64)
def legendre_rule(n):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=64)
def jacobi_rule(n, exponent):
    """Gauss rule on [0, 1] for the weight ``x**(-exponent)``."""
    x, w = roots_jacobi(n, 0.0, -exponent)
    # map [-1, 1] -> [0, 1]; the weight (1+x)^b picks up a factor 2^(-1-b)
    return 0.5 * (x + 1.0), w * 0.5 ** (1.0 - exponent)


def composite_legendre(edges, n):
    """Composite Gauss-Legendre rule over consecutive panels given by ``edges``."""
    edges = np.asarray(edges, dtype=float)
    x0, w0 = legendre_rule(n)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = a + (b - a) * x0
    weights = (b - a) * w0
    return nodes.ravel(), weights.ravel()


def singular_rule(length, exponent, n=20, grading=0.2, levels=8):
    """Rule for integrating ``h(x)`` over [0, length] when ``h ~ x**(-exponent)``.

    The innermost panel uses a Gauss-Jacobi rule that absorbs the power;
    the returned weights already divide that power back out, so the rule
    is applied to ``h`` itself. Geometric panels handle slowly varying
    factors such as logarithms.
    """
    inner = length * grading**levels
    xj, wj = jacobi_rule(n, float(exponent))
    nodes_in = inner * xj
    # weights for x^{-a} s(x) dx: w_j inner^{1-a} s(x_j), and s = h x^a
    weights_in = wj * inner ** (1.0 - exponent) * nodes_in**exponent
    edges = length * grading ** np.arange(levels, -1, -1, dtype=float)
    nodes_out, weights_out = composite_legendre(edges, n)
    return np.concatenate([nodes_in, nodes_out]), np.concatenate([weights_in, weights_out])


def half_period_rule(kmax, exponent, n=16, upper=np.pi, breakpoints=()):
    """Nodes and weights on (0, upper] resolving ``cos(k x)`` for ``k <= kmax``.

    A singular panel of width about one period at frequency ``kmax`` is
    followed by uniform Gauss-Legendre panels of the same width, split
    further at any ``breakpoints`` where the integrand has kinks.
    """
    width = min(upper, 2.0 * np.pi / max(kmax, 1))
    nodes_s, weights_s = singular_rule(width, exponent, n=max(n, 20))
    count = int(np.ceil((upper - width) / width - 1e-12))
    if count <= 0:
        return nodes_s, weights_s
    edges = np.linspace(width, upper, count + 1)
    extra = [b for b in breakpoints if width < b < upper]
    if extra:
        edges = np.unique(np.concatenate([edges, extra]))
    nodes_r, weights_r = composite_legendre(edges, n)
    return np.concatenate([nodes_s, nodes_r]), np.concatenate([weights_s, weights_r])


def cosine_moments(nodes, weighted_values, kmax):
    """Return ``sum_j weighted_values[j] * cos(k * nodes[j])`` for k = 0..kmax.

    Uses the three-term Chebyshev recurrence, which costs one vector
    operation per k and is stable for cosines.
    """
    out = np.empty(kmax + 1)
    c = np.cos(nodes)
    prev = np.ones_like(nodes)
    cur = c.copy()
    out[0] = weighted_values.sum()
    if kmax >= 1:
        out[1] = weighted_values @ cur
    two_c = 2.0 * c
    for k in range(2, kmax + 1):
        prev, cur = cur, two_c * cur - prev
        out[k] = weighted_values @ cur
        if k % 256 == 0:
            # reset drift by recomputing the pair exactly
            prev = np.cos((k - 1) * nodes)
            cur = np.cos(k * nodes)
    return out


class ToeplitzFFT:
    """Fast products of a symmetric Toeplitz matrix with dense blocks.

    Parameters
    ----------
    coeffs : array_like
        First column ``c[0..T-1]`` of the symmetric Toeplitz matrix.
    workers : int, optional
        Thread count passed to ``scipy.fft``.
    """

    def __init__(self, coeffs, workers=None):
        c = np.asarray(coeffs, dtype=float)
        self.size = c.size
        circ = np.concatenate([c, [0.0], c[:0:-1]])
        self._n = circ.size
        self._eig = sfft.rfft(circ)
        self._workers = workers

    def matmat(self, block):
        """Return ``B @ block`` for a (T, k) or (T,) array."""
        block = np.asarray(block, dtype=float)
        squeeze = block.ndim == 1
        if squeeze:
            block = block[:, None]
        spec = sfft.rfft(block, n=self._n, axis=0, workers=self._workers)
        spec *= self._eig[:, None]
        out = sfft.irfft(spec, n=self._n, axis=0, workers=self._workers)[: self.size]
        return out[:, 0] if squeeze else out

    def columns(self, start, stop, coeffs):
        """Dense columns ``start..stop-1`` of the matrix with first column ``coeffs``."""
        rows = np.arange(self.size)[:, None]
        cols = np.arange(start, stop)[None, :]
        return coeffs[np.abs(rows - cols)]
