"""Fejer, Dirichlet and Phi_T kernels and the two-point power integral.

    python demos/kernels_tour.py
"""

from toeplitz_lab.kernels import kernel_checks, lemma1_scaling_check, phi_abs_outside


def main():
    for check in kernel_checks():
        print(f"{check.name:<34} {'PASS' if check.passed else 'FAIL'}  {check.achieved:.3e}  (tol {check.tolerance:.3e})")
    for T in (20.0, 50.0, 200.0):
        print(f"mass of |Phi_T| outside the box, T = {T:g}: {phi_abs_outside(T):.4f}")
    for y in (0.5, 1.0, 2.0, 4.0):
        print(f"I(y) |y|^0.2 at y = {y}: {lemma1_scaling_check(0.6, 0.6, y):.10f}")


if __name__ == "__main__":
    main()
