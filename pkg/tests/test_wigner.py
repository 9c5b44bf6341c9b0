import math

import numpy as np
import pytest

from kamtorus.quantize import transport_matrix, weyl_matrix, window_spectrum
from kamtorus.symbols import ModeSymbol, multiply
from kamtorus.wigner import (
    StateVector,
    action_multiplier_pairing,
    density,
    density_flatness,
    density_integral,
    fit_loglog_slope,
    haar_prediction,
    measure_diagnostics,
    wigner_eval,
)

from test_symbols import random_real_symbol


def test_basis_state_pairing_is_frozen_average():
    hbar = 0.3
    a = random_real_symbol(1, 6, 3, 3, seed=2)
    for k in (-5, 0, 3):
        psi = StateVector.basis_state((k,), 8, hbar)
        got = wigner_eval(psi, a)
        expected = haar_prediction(a, hbar * np.array([k]))
        assert abs(got - expected) < 1e-14


def test_pairing_with_unit_symbol():
    psi = StateVector.basis_state((2,), 6, 0.2)
    assert wigner_eval(psi, ModeSymbol.constant(1.0, 1)) == pytest.approx(1.0)


def test_cross_term_pairing():
    # (e_0 + e_1)/sqrt(2) against cos(x): two half-amplitude cross entries
    coeffs = np.zeros(13, dtype=complex)
    coeffs[6] = coeffs[7] = 1.0 / math.sqrt(2.0)
    psi = StateVector(n_trunc=6, d=1, hbar=0.2, coeffs=coeffs)
    val = wigner_eval(psi, ModeSymbol.cosine((1,), (0,)))
    assert val.real == pytest.approx(0.5)
    assert abs(val.imag) < 1e-14


def test_pairing_real_for_real_symbol():
    rng = np.random.default_rng(5)
    vec = rng.normal(size=9) + 1j * rng.normal(size=9)
    psi = StateVector.from_vector(vec, 4, 1, 0.4)
    a = random_real_symbol(1, 5, 2, 2, seed=11)
    assert abs(wigner_eval(psi, a).imag) < 1e-13


def test_density_of_basis_state_is_flat():
    psi = StateVector.basis_state((3,), 6, 0.2)
    dens = density(psi, 64)
    flat = 1.0 / (2.0 * math.pi)
    assert np.max(np.abs(dens - flat)) < 1e-14
    assert density_integral(dens, 1) == pytest.approx(1.0, abs=1e-12)


def test_density_two_mode_state():
    coeffs = np.zeros(13, dtype=complex)
    coeffs[6] = coeffs[7] = 1.0 / math.sqrt(2.0)
    psi = StateVector(n_trunc=6, d=1, hbar=0.2, coeffs=coeffs)
    g = 64
    dens = density(psi, g)
    x = np.linspace(0, 2 * math.pi, g, endpoint=False)
    expected = (1.0 + np.cos(x)) / (2.0 * math.pi)
    assert np.max(np.abs(dens - expected)) < 1e-13
    assert density_integral(dens, 1) == pytest.approx(1.0, abs=1e-12)


def test_density_integral_random_state():
    rng = np.random.default_rng(9)
    vec = rng.normal(size=17) + 1j * rng.normal(size=17)
    psi = StateVector.from_vector(vec, 8, 1, 0.1)
    assert density_integral(density(psi), 1) == pytest.approx(1.0, abs=1e-10)


def test_density_flatness_detects_structure():
    psi_flat = StateVector.basis_state((0,), 4, 0.2)
    assert density_flatness(psi_flat) < 1e-14
    coeffs = np.zeros(9, dtype=complex)
    coeffs[4] = coeffs[5] = 1.0 / math.sqrt(2.0)
    psi = StateVector(n_trunc=4, d=1, hbar=0.2, coeffs=coeffs)
    assert density_flatness(psi) == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-10)


def test_unperturbed_diagnostics_have_zero_deviation():
    hbar = 0.25
    seq = [(hbar, StateVector.basis_state((k,), 8, hbar), hbar * k) for k in range(2, 5)]
    tests = [("cos_x", ModeSymbol.cosine((1,), (0,))), ("cos_xi", ModeSymbol.cosine((0,), (1,)))]
    report = measure_diagnostics(seq, tests)
    assert all(row["deviation"] < 1e-14 for row in report["rows"])


def test_action_multiplier_dichotomy():
    # a compactly supported action observable pairs to zero once the state
    # sits outside its support
    hbar = 0.2
    bump = lambda xi: max(0.0, 1.0 - abs(float(xi[0]) - 1.0))
    inside = StateVector.basis_state((5,), 12, hbar)   # hbar*k = 1.0
    outside = StateVector.basis_state((12,), 12, hbar)  # hbar*k = 2.4
    assert action_multiplier_pairing(inside, bump) == pytest.approx(1.0)
    assert action_multiplier_pairing(outside, bump) == 0.0


def test_fit_loglog_slope_on_powers():
    x = [0.1, 0.05, 0.025]
    assert fit_loglog_slope(x, [v**2 for v in x]) == pytest.approx(2.0)
    assert math.isnan(fit_loglog_slope(x, [0.0, 0.0, 0.0]))


def test_semiclassical_positivity_in_window():
    # a pointwise-nonnegative observable pairs nonnegatively (up to O(hbar))
    # against renormalized window eigenvectors
    from kamtorus import renormalize as rn
    from kamtorus.diophantine import check
    from kamtorus.symbols import NormParams, SemiclassicalScale

    params = NormParams(1.0, 1.0)
    cert = check([1.0], 2.0, 1.0, 200)
    base = multiply(ModeSymbol.cosine((1,), (0,)), ModeSymbol.cosine((0,), (1,)))
    V = (0.5 * rn.smallness_threshold(cert, 1.0) / base.norm(1, 1)) * base
    one = ModeSymbol.constant(1.0, 1)
    nonneg = multiply(one + ModeSymbol.cosine((1,), (0,)), one + ModeSymbol.cosine((0,), (1,)))
    for hbar in (0.1, 0.05):
        scale = SemiclassicalScale.equal(hbar)
        r_total, _ = rn.run(V, cert, params, scale, n_max=8)
        n = math.ceil(2.4 / hbar)
        q_op = rn.renormalized_operator(V, r_total, cert, scale, n)
        for p in window_spectrum(q_op, 1.0, 0.2, cert.omega):
            psi = StateVector.from_vector(p.vector, n, 1, hbar)
            assert wigner_eval(psi, nonneg).real >= -2.0 * hbar


def test_pushforward_density_identity():
    # eigenvectors of the conjugated transport operator are U* e_k, and their
    # densities push forward exactly: int b |U* e_k|^2 = (2 pi)^-1 int b(theta(x)) dx
    from kamtorus.classical import TorusVectorField, kam_conjugate, transport_unitary
    from kamtorus.quantize import basis_k

    eps = 1e-3
    v = TorusVectorField.from_modes(1, [((1,), [eps / 2j])])
    _, diffeo, _, _ = kam_conjugate(v, [1.0], n_max=8, tol=1e-13)
    n = 24
    u_op = transport_unitary(diffeo, n, hbar=0.1)
    box = basis_k(n, 1)
    g = 4096
    x = np.linspace(0.0, 2.0 * math.pi, g, endpoint=False)[:, None]
    theta_x = diffeo(x)[:, 0]
    for b_fn in (np.cos, lambda y: np.sin(2 * y)):
        rhs = float(np.mean(b_fn(theta_x)))
        b_vals = b_fn(x[:, 0])
        for k in (0, 3, -5):
            col = int(np.nonzero(box[:, 0] == k)[0][0])
            psi = StateVector.from_vector(u_op.mat.conj().T[:, col], n, 1, 0.1)
            dens = density(psi, g)
            lhs = float(np.sum(b_vals * dens)) * (2.0 * math.pi / g)
            assert lhs == pytest.approx(rhs, abs=1e-10)


def test_window_eigenvectors_flatness_scale():
    # perturbed transport operator: window eigenvectors stay near-flat at
    # strength eps, and the wigner pairing matches its prediction to O(eps)
    hbar, eps = 0.1, 1e-3
    n = 24
    V = multiply(ModeSymbol.cosine((1,), (0,)), ModeSymbol.cosine((0,), (1,)))
    q = transport_matrix([1.0], hbar, n).mat + eps * weyl_matrix(V, hbar, n).mat
    from kamtorus.quantize import TorusOperator

    op = TorusOperator(n_trunc=n, d=1, hbar=hbar, mat=q)
    pairs = window_spectrum(op, 1.0, 0.3, [1.0])
    assert pairs
    for p in pairs:
        psi = StateVector.from_vector(p.vector, n, 1, hbar)
        assert density_flatness(psi) < 10 * eps
