"""Convergence-rate experiments: sweep T, fit log-log slopes, compare with theory."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import stats

from .errors import DegenerateExperimentError, ParameterError
from .spectral_models import Arfima0d0, FRBm
from .toeplitz_continuous import (
    OperatorTraceSpec,
    exact_trace_m2,
    operator_rows,
    predicted_rate_continuous,
    second_order_expansion_continuous,
)
from .toeplitz_discrete import (
    TraceSpec,
    normalized_trace,
    predicted_rate,
    second_order_expansion_discrete,
    trace_rows,
)

DISCRETE_GRID = (256, 512, 1024, 2048, 4096)
CONTINUOUS_GRID = (25.0, 50.0, 100.0, 200.0)
#: a Delta below this multiple of max(1, |M|) counts as exactly zero
ZERO_DELTA = 1e-12
SLOPE_SLACK = 0.1


@dataclass(frozen=True)
class RateFit:
    model_id: str
    Ts: tuple
    deltas: tuple
    fitted_slope: float
    slope_stderr: float
    theoretical_gamma: Optional[float]
    verdict: str
    theorem: str = ""
    log_factor: bool = False
    excluded: tuple = ()

    def as_dict(self):
        return {
            "model_id": self.model_id,
            "theorem": self.theorem,
            "T": list(self.Ts),
            "delta": list(self.deltas),
            "fitted_slope": self.fitted_slope,
            "slope_stderr": self.slope_stderr,
            "theoretical_gamma": self.theoretical_gamma,
            "log_factor": self.log_factor,
            "verdict": self.verdict,
            "excluded_T": list(self.excluded),
        }


def fit_slope(Ts, deltas):
    """Least-squares slope of ``log delta`` against ``log T`` and its standard error."""
    x = np.log(np.asarray(Ts, dtype=float))
    y = np.log(np.asarray(deltas, dtype=float))
    if x.size < 2:
        raise DegenerateExperimentError("at least two points are needed for a slope")
    if x.size == 2:
        return float((y[1] - y[0]) / (x[1] - x[0])), float("nan")
    res = stats.linregress(x, y)
    return float(res.slope), float(res.stderr)


def verdict_for(slope: float, stderr: float, gamma: Optional[float]) -> str:
    """``consistent`` iff ``|slope + gamma| <= max(0.1, 2 stderr)``; ``o1_only`` without a rate."""
    if gamma is None:
        return "o1_only"
    tol = max(SLOPE_SLACK, 2 * stderr if np.isfinite(stderr) else 0.0)
    return "consistent" if abs(slope + gamma) <= tol else "inconsistent"


def run_rate_experiment(
    spec: Union[TraceSpec, OperatorTraceSpec],
    grid: Optional[Sequence[float]] = None,
    theorem: str = "",
    p: Optional[Sequence[float]] = None,
    method: str = "auto",
    rows: Optional[list] = None,
) -> RateFit:
    """Fit the decay exponent of ``Delta(T)`` and compare it with a named theorem.

    Grid points where ``Delta`` vanishes (up to ``1e-12 max(1, |M|)``) are
    excluded from the fit.

    Raises
    ------
    DegenerateExperimentError
        When fewer than four usable points remain.
    """
    continuous = isinstance(spec, OperatorTraceSpec)
    if grid is None:
        grid = CONTINUOUS_GRID if continuous else DISCRETE_GRID
    if continuous:
        table = operator_rows(spec, grid, method)
    else:
        table = trace_rows(spec, grid, method)
    if rows is not None:
        rows.extend(table)
    kept = [r for r in table if r.delta > ZERO_DELTA * max(1.0, abs(r.M))]
    excluded = tuple(r.T for r in table if r not in kept)
    if len(kept) < 4:
        raise DegenerateExperimentError(f"only {len(kept)} grid points with nonzero Delta remain; 4 are needed")
    Ts = tuple(r.T for r in kept)
    deltas = tuple(r.delta for r in kept)
    slope, stderr = fit_slope(Ts, deltas)
    gamma, log_factor = None, False
    if theorem:
        if continuous:
            pred = predicted_rate_continuous(spec.generators, theorem, p)
        else:
            pred = predicted_rate(spec, theorem, p if p is not None else (2.0, 2.0))
        gamma, log_factor = pred.gamma, pred.log_factor
    verdict = verdict_for(slope, stderr, gamma) if theorem else "o1_only"
    return RateFit(spec.model_id, Ts, deltas, slope, stderr, gamma, verdict, theorem, log_factor, excluded)


@dataclass(frozen=True)
class SecondOrderRow:
    T: float
    S: float
    leading: float
    predicted_S: float
    residual: float
    normalized_residual: float

    FIELDS = ("T", "S", "leading", "predicted_S", "residual", "normalized_residual")

    def as_dict(self):
        return {k: getattr(self, k) for k in self.FIELDS}


@dataclass(frozen=True)
class SecondOrderTable:
    kind: str
    params: dict
    rows: tuple = field(default_factory=tuple)

    @property
    def normalized_residuals(self):
        return tuple(r.normalized_residual for r in self.rows)

    @property
    def decreasing(self) -> bool:
        v = self.normalized_residuals
        return all(b < a for a, b in zip(v[:-1], v[1:]))

    @property
    def reduction(self) -> float:
        """First normalized residual divided by the last."""
        v = self.normalized_residuals
        return v[0] / v[-1]


def run_second_order_experiment(kind: str, params: dict, grid: Sequence[float]) -> SecondOrderTable:
    """Residual of the two-term expansion of ``S(T)`` on a grid.

    ``kind="discrete"`` takes ``d1, d2, sigma2_1, sigma2_2`` (ARFIMA pair);
    ``kind="continuous"`` takes ``alpha1, alpha2, beta1, beta2, C1, C2``
    (FRBm pair, exact time-domain traces).
    """
    rows = []
    if kind == "discrete":
        d1, d2 = params["d1"], params["d2"]
        s1, s2 = params.get("sigma2_1", 2 * math.pi), params.get("sigma2_2", 2 * math.pi)
        spec = TraceSpec((Arfima0d0(s1, d1), Arfima0d0(s2, d2)))
        for T in grid:
            exp = second_order_expansion_discrete(d1, d2, s1, s2, int(T))
            S = normalized_trace(spec, int(T))
            rows.append(_second_order_row(int(T), S, exp))
    elif kind == "continuous":
        a1, a2 = params["alpha1"], params["alpha2"]
        b1, b2 = params.get("beta1", 1.0), params.get("beta2", 1.0)
        c1, c2 = params.get("C1", 1.0), params.get("C2", 1.0)
        f1, f2 = FRBm(c1, a1, b1), FRBm(c2, a2, b2)
        for T in grid:
            exp = second_order_expansion_continuous(a1, a2, b1, b2, c1, c2, float(T))
            S = exact_trace_m2(f1, f2, float(T))
            rows.append(_second_order_row(float(T), S, exp))
    else:
        raise ParameterError("kind must be 'discrete' or 'continuous'")
    return SecondOrderTable(kind, dict(params), tuple(rows))


def _second_order_row(T, S, exp):
    residual = abs(S - exp.predicted_S)
    return SecondOrderRow(T, S, exp.leading, exp.predicted_S, residual, residual / float(T) ** (-exp.exponent))
