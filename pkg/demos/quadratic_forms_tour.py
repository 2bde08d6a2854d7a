"""Central limit behaviour of Toeplitz quadratic forms, and where it breaks.

    python demos/quadratic_forms_tour.py
"""

import math

from toeplitz_lab.quadratic_forms import (
    QuadraticFormSpec,
    clt_condition_check,
    clt_monte_carlo,
    counterexample_chi2_divergence,
    noncentral_scaling_check,
    rosenblatt_second_moment,
    rosenblatt_second_moment_beta0,
)
from toeplitz_lab.spectral_models import Arfima0d0, Constant, PowerLogLaw

SEED = 12345


def main():
    white = Constant(1 / (2 * math.pi))
    study = clt_monte_carlo(QuadraticFormSpec(white, white, 1024), 10000, SEED)
    print(f"white pair, T=1024: variance {study.variance:.4f} (limit {study.sigma0_sq}), KS {study.ks_distance:.4f}")
    study = clt_monte_carlo(QuadraticFormSpec(Arfima0d0(1.0, 0.1), Constant(1.0), 1024), 10000, SEED)
    print(f"ARFIMA(0.1) with g = 1: variance {study.variance:.3f} (limit {study.sigma0_sq:.3f}), KS {study.ks_distance:.4f}")

    for f, g in [(PowerLogLaw(0.25, 0.6), PowerLogLaw(0.25, 0.6)), (PowerLogLaw(0.3), PowerLogLaw(0.3))]:
        print(f"conditions for {f.params()} x {g.params()}: {clt_condition_check(f, g).verdict}")

    res = counterexample_chi2_divergence(2.0, 1.2, 1.0, [2**k for k in range(8, 14)])
    print(f"step-function pair, int f^2 g^2 = {res.integral_f2g2:.5f}")
    for T, v in zip(res.Ts, res.chi2):
        print(f"    T = {T:>5}   chi2 = {v:.2f}")

    for a, b in ((0.6, 0.0), (0.4, 0.3), (0.25, 0.25)):
        fit = noncentral_scaling_check(a, b, [256, 512, 1024, 2048, 4096])
        print(f"Var(Q_T) growth for ({a}, {b}): slope {fit.slope:.4f}, expected {fit.expected:.2f}")

    print(f"E Q(1)^2, alpha = 0.6, beta = 0: {rosenblatt_second_moment(0.6, 0.0, 1.0):.5f}"
          f" (closed form {rosenblatt_second_moment_beta0(0.6, 1.0):.5f})")


if __name__ == "__main__":
    main()
