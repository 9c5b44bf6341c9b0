"""Semiclassical diagnostics across a ladder of scales.

After renormalization, eigenvectors in a fixed spectral window stay glued to
the unperturbed picture: observables conjugated by the assembled unitary
move by O(eps), Wigner pairings match the flat-torus prediction at the
quantized action, and position densities flatten at rate O(hbar).
"""

import math

import numpy as np

from kamtorus import (
    ModeSymbol,
    NormParams,
    SemiclassicalScale,
    StateVector,
    check,
    density_flatness,
    haar_prediction,
    multiply,
    weyl_matrix,
    wigner_eval,
    window_spectrum,
)
from kamtorus import renormalize as rn
from kamtorus.quantize import operator_norm
from kamtorus.wigner import fit_loglog_slope


def main():
    params = NormParams(1.0, 1.0)
    cert = check([1.0], 2.0, 1.0, 400)
    base = multiply(ModeSymbol.cosine((1,), (0,)), ModeSymbol.cosine((0,), (1,)))
    V = (0.5 * rn.smallness_threshold(cert, 1.0) / base.norm(1, 1)) * base
    observable = ModeSymbol.cosine((1,), (0,))

    hbars = [0.1, 0.05, 0.025]
    moved_norms, flatness, wigner_devs = [], [], []
    for hbar in hbars:
        scale = SemiclassicalScale.equal(hbar)
        r_total, state = rn.run(V, cert, params, scale, n_max=8)
        n = math.ceil(2.4 / hbar)        # fixed action window across the ladder
        margin = math.ceil(0.6 / hbar)
        u_op = rn.assemble_unitary(state.f_list, scale, n, d=1, margin=margin)
        idx = u_op.interior_indices(margin)
        a_mat = weyl_matrix(observable, hbar, n).mat
        diff = (u_op.mat @ a_mat @ u_op.mat.conj().T - a_mat)[np.ix_(idx, idx)]
        moved_norms.append(operator_norm(diff))

        q_op = rn.renormalized_operator(V, r_total, cert, scale, n)
        pairs = window_spectrum(q_op, 1.0, 0.2, cert.omega)
        flats, devs = [], []
        for p in pairs:
            psi = StateVector.from_vector(p.vector, n, 1, hbar)
            flats.append(density_flatness(psi))
            xi_star = hbar * np.asarray(psi.dominant_index(), dtype=float)
            devs.append(abs(wigner_eval(psi, observable) - haar_prediction(observable, xi_star)))
        flatness.append(max(flats))
        wigner_devs.append(max(devs))

    print(" hbar     |U a U* - a|   sup|dens - flat|   wigner deviation")
    for h, mv, fl, wd in zip(hbars, moved_norms, flatness, wigner_devs):
        print(f" {h:<7}  {mv:.3e}      {fl:.3e}          {wd:.3e}")
    print("\nfitted log-log slopes against hbar:")
    print(f"  observable invariance: {fit_loglog_slope(hbars, moved_norms):.2f}   (linear)")
    print(f"  density flatness:      {fit_loglog_slope(hbars, flatness):.2f}   (linear)")
    print(f"  wigner deviation:      {fit_loglog_slope(hbars, wigner_devs):.2f}   (linear)")


if __name__ == "__main__":
    main()
