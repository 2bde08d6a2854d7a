"""Trace approximation rates for long-memory pairs, discrete and continuous.

    python demos/rate_experiments.py
"""

import math

from toeplitz_lab.rate_lab import run_rate_experiment, run_second_order_experiment
from toeplitz_lab.spectral_models import Arfima0d0, FRBm
from toeplitz_lab.toeplitz_continuous import OperatorTraceSpec
from toeplitz_lab.toeplitz_discrete import TraceSpec


def show_fit(fit):
    print(f"  {fit.model_id} under {fit.theorem}")
    for T, d in zip(fit.Ts, fit.deltas):
        print(f"    T = {T:>7g}   Delta = {d:.6e}")
    print(f"  slope {fit.fitted_slope:.4f} +/- {fit.slope_stderr:.4f}; predicted -{fit.theoretical_gamma}; {fit.verdict}")


def main():
    print("Matrices: two ARFIMA(0, 0.1, 0) densities")
    pair = TraceSpec((Arfima0d0(2 * math.pi, 0.1), Arfima0d0(2 * math.pi, 0.1)), model_id="arfima-0.1")
    show_fit(run_rate_experiment(pair, theorem="T4-2"))

    print("\nOperators: two FRBm(1, 0.1, 1) densities")
    ops = OperatorTraceSpec((FRBm(1.0, 0.1, 1.0), FRBm(1.0, 0.1, 1.0)), model_id="frbm-0.1")
    show_fit(run_rate_experiment(ops, theorem="T5-3"))

    print("\nTwo-term expansion, ARFIMA d1 = d2 = 0.15")
    table = run_second_order_experiment("discrete", {"d1": 0.15, "d2": 0.15}, [512, 1024, 2048, 4096])
    for row in table.rows:
        print(f"    T = {row.T:>5}   S = {row.S:.8f}   predicted {row.predicted_S:.8f}   scaled residual {row.normalized_residual:.4e}")

    print("\nTwo-term expansion near the pole, FRBm alpha1 = alpha2 = 0.24")
    table = run_second_order_experiment("continuous", {"alpha1": 0.24, "alpha2": 0.24}, [25, 50, 100, 200])
    for row in table.rows:
        print(f"    T = {row.T:>5g}   S = {row.S:.4f}   leading {row.leading:.1f}   predicted {row.predicted_S:.4f}")


if __name__ == "__main__":
    main()
