"""Classical conjugacy for a perturbed field, and its induced unitary.

A small analytic vector field over a golden-mean frequency pair is
straightened: the quadratic sweep produces a corrected frequency phi and a
torus diffeomorphism theta with (d theta) omega = phi + v o theta.  The
weighted composition operator by theta then conjugates the perturbed
transport matrix exactly onto the unperturbed one.
"""

import math

import numpy as np

from kamtorus import (
    TorusVectorField,
    kam_conjugate,
    symplectic_lift,
    transport_unitary,
    verify_egorov,
)

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def main():
    eps = 1e-3
    omega = [1.0, GOLDEN]
    v = TorusVectorField.from_modes(
        2, [((1, 0), [eps / 2j, 0.0]), ((1, 1), [0.0, eps / 2.0])]
    )
    print(f"field: eps (sin x1, cos(x1+x2)) with eps = {eps}; omega = (1, golden)")

    freq_map, diffeo, residual, records = kam_conjugate(v, omega, n_max=8, tol=1e-12, grid_size=64)
    print("\n sweep   residual      sup|u|        |phi-omega|")
    for rec in records:
        print(f"   {rec['sweep']}     {rec['residual']:.3e}    {rec['sup_u']:.3e}    {rec['freq_shift']:.3e}")
    print(f"\nrenormalized frequency phi = {np.round(freq_map.phi, 12)}")
    print(f"conjugacy residual sup |(d theta)^-1 (phi + v o theta) - omega| = {residual:.3e}")

    lift = symplectic_lift(diffeo)
    x = np.array([[0.4, 1.1]])
    xi = np.array([[1.0, 0.5]])
    y, eta = lift(x, xi)
    print(f"symplectic lift sample: ({x[0]}, {xi[0]}) -> ({np.round(y[0], 6)}, {np.round(eta[0], 6)})")

    n = 16  # desk-scale truncation keeps the demo quick
    u_op = transport_unitary(diffeo, n, hbar=0.1, margin=8)
    idx = u_op.interior_indices(8)
    gram = u_op.mat[:, idx].conj().T @ u_op.mat[:, idx]
    print(f"\ncomposition unitary at truncation {n}: interior defect "
          f"{np.max(np.abs(gram - np.eye(len(idx)))):.2e}")

    egorov = verify_egorov(diffeo, omega, freq_map.phi, v, 0.1, n, margin=8)
    print(f"conjugation identity |U P U* - L|_interior = {egorov:.3e}")


if __name__ == "__main__":
    main()
