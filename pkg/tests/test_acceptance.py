"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances are pinned to the acceptance targets. Runtime budgets are
measured and printed; the sub-minute budgets are asserted as stated.
"""

import math
import time

import numpy as np

from toeplitz_lab.kernels import dirichlet_bound_grid, fejer_mass, phi_mass
from toeplitz_lab.quadratic_forms import (
    QuadraticFormSpec,
    berry_esseen_gap,
    berry_esseen_limit,
    chi2,
    clt_monte_carlo,
    counterexample_chi2_divergence,
    cumulants_via_trace,
    ldp_rate_function,
    noncentral_scaling_check,
)
from toeplitz_lab.rate_lab import DISCRETE_GRID, run_rate_experiment, run_second_order_experiment
from toeplitz_lab.spectral_models import (
    Arfima0d0,
    ArfimaPDQ,
    Constant,
    CosineSeries,
    FGn,
    FRBm,
    PowerLogLaw,
    fourier_transform,
)
from toeplitz_lab.toeplitz_discrete import TraceSpec, delta, trace_product

WHITE = Constant(1 / (2 * math.pi))
SEED = 12345


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def test_criterion_01_trivial_exactness(report):
    pairs = [(WHITE, WHITE), (Constant(0.3), Constant(2.5)), (Constant(1.0), Constant(-0.7))]
    with Timer() as tm:
        worst = max(delta(TraceSpec(p), T) for p in pairs for T in DISCRETE_GRID)
    ok = report(1, "trivial exactness", worst <= 1e-12 and tm.seconds < 1.0, f"max Delta {worst:.1e} (tol 1e-12), {tm.seconds:.2f}s (budget 1s)")
    assert ok


def test_criterion_02_oracle_equivalence(report):
    zoo = [
        Arfima0d0(2 * math.pi, 0.1),
        Arfima0d0(1.0, 0.3),
        Arfima0d0(1.0, -0.2),
        ArfimaPDQ(0.2, ar=(0.5,)),
        ArfimaPDQ(0.0, ma=(0.4,)),
        FGn(1.0, 0.8),
        FGn(1.0, 0.3),
        PowerLogLaw(0.4),
        CosineSeries((1.0, 0.5, 0.25)),
        WHITE,
    ]
    pairs = [(zoo[i], zoo[j]) for i in range(len(zoo)) for j in range(i, len(zoo)) if (i + j) % 3 == 0]
    worst = 0.0
    with Timer() as tm:
        for f, g in pairs:
            spec = TraceSpec((f, g))
            for T in (16, 100, 257, 512):
                dense = trace_product(spec, T, method="dense")
                fast = trace_product(spec, T, method="fastm2")
                worst = max(worst, abs(fast - dense) / abs(dense))
    ok = report(
        2, "FastM2 vs dense", worst <= 1e-10 and len(pairs) >= 10 and tm.seconds < 60,
        f"{len(pairs)} pairs, max rel diff {worst:.1e} (tol 1e-10), {tm.seconds:.1f}s",
    )
    assert ok


def test_criterion_03_rate_reproduction(report):
    spec = TraceSpec((Arfima0d0(2 * math.pi, 0.1), Arfima0d0(2 * math.pi, 0.1)))
    with Timer() as tm:
        fit = run_rate_experiment(spec, DISCRETE_GRID, "T4-2")
    ok = report(
        3, "ARFIMA rate", abs(fit.fitted_slope + 0.6) <= 0.1,
        f"slope {fit.fitted_slope:.4f} (target -0.6 +/- 0.1), {tm.seconds:.1f}s",
    )
    assert ok


def test_criterion_04_discrete_expansion(report):
    with Timer() as tm:
        table = run_second_order_experiment(
            "discrete", {"d1": 0.15, "d2": 0.15, "sigma2_1": 2 * math.pi, "sigma2_2": 2 * math.pi}, [512, 1024, 2048, 4096]
        )
    ratio = table.reduction
    ok = report(4, "discrete second-order", ratio >= 2, f"normalized residual reduced {ratio:.2f}x from T=512 to 4096 (need >= 2)")
    assert ok


def test_criterion_05_continuous_expansion(report):
    with Timer() as tm:
        table = run_second_order_experiment(
            "continuous", {"alpha1": 0.1, "alpha2": 0.1, "beta1": 1.0, "beta2": 1.0}, [50, 100, 200, 400, 800]
        )
    ratio = table.reduction
    ok = report(
        5, "continuous second-order", ratio >= 2 and table.decreasing,
        f"normalized residual reduced {ratio:.2f}x over T=50..800 (need >= 2), decreasing={table.decreasing}, {tm.seconds:.1f}s",
    )
    assert ok


def test_criterion_06_covariance_asymptotics(report):
    alpha = 0.3
    with Timer() as tm:
        r = fourier_transform(FRBm(1.0, alpha, 1.0), 1e3)
    scaled = r * 1e3 ** (1 - 2 * alpha)
    target = math.pi / (math.cos(math.pi * alpha) * math.gamma(2 * alpha))
    rel = abs(scaled / target - 1)
    ok = report(6, "covariance tail", rel <= 0.05 and tm.seconds < 30, f"r(t) t^0.4 = {scaled:.5f} vs {target:.5f}, rel {rel:.3%} (tol 5%)")
    assert ok


def test_criterion_07_kernel_identities(report):
    with Timer() as tm:
        mass_err = max(abs(fejer_mass(T) - 1) for T in (10.0, 100.0, 1000.0, 10000.0))
        worst, count = dirichlet_bound_grid()
        phi_err = abs(phi_mass(100.0) - 1)
    ok = report(
        7, "kernel identities", mass_err <= 1e-6 and worst <= 1 and count >= 1000 and phi_err <= 1e-4,
        f"Fejer mass err {mass_err:.1e}, Dirichlet worst ratio {worst:.3f} on {count} points, Phi mass err {phi_err:.1e}",
    )
    assert ok


def test_criterion_08_cumulant_link(report):
    spec = QuadraticFormSpec(Arfima0d0(1.0, 0.1), Arfima0d0(1.0, 0.15), 256)
    cum = cumulants_via_trace(spec, K=2)
    rel = abs(cum.by_powers[1] - cum.by_eigenvalues[1]) / abs(cum.by_powers[1])
    white = chi2(WHITE, WHITE, 256)
    ok = report(8, "cumulant link", rel <= 1e-10 and white == 2.0, f"routes differ by {rel:.1e} (tol 1e-10), constant-pair chi2 = {white!r}")
    assert ok


def test_criterion_09_clt_monte_carlo(report):
    with Timer() as tm:
        white = clt_monte_carlo(QuadraticFormSpec(WHITE, WHITE, 1024), 10000, SEED)
        arf = clt_monte_carlo(QuadraticFormSpec(Arfima0d0(1.0, 0.1), Constant(1.0), 1024), 10000, SEED)
    ok = report(
        9, "CLT Monte Carlo", white.ks_distance < 0.02 and arf.ks_distance < 0.05,
        f"KS constant {white.ks_distance:.4f} (< 0.02), KS ARFIMA {arf.ks_distance:.4f} (< 0.05), seed {SEED}, {tm.seconds:.1f}s",
    )
    assert ok


def test_criterion_10_counterexample(report):
    Ts = [2**k for k in range(8, 14)]
    with Timer() as tm:
        res = counterexample_chi2_divergence(2.0, 1.2, 1.0, Ts)
    ok = report(
        10, "counterexample divergence", min(res.ratios) > 1.1,
        f"chi2 {', '.join(f'{v:.1f}' for v in res.chi2)}; min ratio {min(res.ratios):.3f} (> 1.1), {tm.seconds:.1f}s",
    )
    assert ok


def test_criterion_11_noncentral_scaling(report):
    Ts = [256, 512, 1024, 2048, 4096]
    fits = [noncentral_scaling_check(a, b, Ts) for a, b in ((0.6, 0.0), (0.4, 0.3))]
    errs = [abs(f.slope - 2 * (f.alpha + f.beta)) for f in fits]
    ok = report(
        11, "non-central scaling", max(errs) <= 0.1,
        "; ".join(f"({f.alpha},{f.beta}) slope {f.slope:.4f} vs {2 * (f.alpha + f.beta):.1f}" for f in fits) + " (tol 0.1)",
    )
    assert ok


def test_criterion_12_ldp(report):
    kappa = 0.3
    f, g = Constant(0.5), Constant(0.6)
    xs = np.linspace(0.2 * kappa, 5 * kappa, 97)
    with Timer() as tm:
        table = ldp_rate_function(f, g, xs)
        at_mean = ldp_rate_function(f, g, [table.mean]).rate[0]
    closed = 0.5 * (xs / kappa - 1 - np.log(xs / kappa))
    err = float(np.max(np.abs(table.rate - closed)))
    second = table.rate[:-2] - 2 * table.rate[1:-1] + table.rate[2:]
    convex = bool(np.all(second >= -1e-10))
    ok = report(
        12, "LDP rate function", err <= 1e-6 and convex and abs(at_mean) <= 1e-8 and tm.seconds < 10,
        f"max err {err:.1e} (tol 1e-6), convex={convex}, I(mean)={at_mean:.1e}",
    )
    assert ok


def test_criterion_13_berry_esseen(report):
    zero = [float(berry_esseen_limit(WHITE, WHITE, z)) for z in (1.0, -1.0)]
    f, g = ArfimaPDQ(0.0, ar=(0.5,)), WHITE
    Ts = (256, 512, 1024)
    exact = [berry_esseen_gap(QuadraticFormSpec(f, g, T)).sup_scaled for T in Ts]
    sampled = [
        berry_esseen_gap(QuadraticFormSpec(f, g, T), method="monte_carlo", replicates=20000, seed=SEED).sup_scaled
        for T in Ts
    ]
    bounded = max(exact) <= 1.5 * min(exact) and max(sampled) <= 1.5 * min(sampled)
    ok = report(
        13, "Berry-Esseen", zero == [0.0, 0.0] and bounded,
        f"limit at z=+-1: {zero}; sqrt(T) sup-gap exact {', '.join(f'{v:.3f}' for v in exact)}, "
        f"sampled {', '.join(f'{v:.3f}' for v in sampled)}",
    )
    assert ok
