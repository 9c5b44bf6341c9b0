import math

import numpy as np
import pytest

from kamtorus.classical import (
    DiffeoBreakdownError,
    GridTooSmallError,
    TorusDiffeo,
    TorusVectorField,
    classical_smallness,
    kam_conjugate,
    linear_transport_matrix,
    proof_constants,
    symplectic_lift,
    transport_unitary,
    verify_egorov,
)
GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
EPS = 1e-3


def sine_field(eps=EPS):
    # v(x) = eps sin(x)
    return TorusVectorField.from_modes(1, [((1,), [eps / 2j])])


def golden_field(eps=EPS):
    # v(x) = eps (sin(x1), cos(x1 + x2))
    return TorusVectorField.from_modes(
        2, [((1, 0), [eps / 2j, 0.0]), ((1, 1), [0.0, eps / 2.0])]
    )


# ----------------------------------------------------------------------
# vector fields and diffeos
# ----------------------------------------------------------------------


def test_field_evaluation_and_reality():
    v = sine_field()
    x = np.array([[0.0], [math.pi / 2.0], [math.pi]])
    vals = v.value(x)
    assert np.allclose(vals[:, 0], [0.0, EPS, 0.0], atol=1e-15)
    assert v.reality_defect() < 1e-15
    assert v.norm(0.0) == pytest.approx(EPS)


def test_diffeo_jacobian_and_det():
    # theta(x) = x + 0.1 sin(x): jacobian 1 + 0.1 cos(x)
    th = TorusDiffeo(1, TorusVectorField.from_modes(1, [((1,), [0.1 / 2j])]))
    x = np.array([[0.3]])
    assert th.jacobian(x)[0, 0, 0] == pytest.approx(1 + 0.1 * math.cos(0.3))
    assert th.min_jacobian_det() == pytest.approx(0.9, abs=1e-6)
    assert th.sup_displacement() == pytest.approx(0.1, abs=1e-6)


# ----------------------------------------------------------------------
# the conjugacy iteration
# ----------------------------------------------------------------------


def test_zero_field_is_fixed_point():
    v = TorusVectorField(1)
    freq_map, diffeo, residual, _ = kam_conjugate(v, [1.0], n_max=3)
    assert residual == 0.0
    assert np.allclose(freq_map.phi, [1.0])
    assert diffeo.sup_displacement() == 0.0


def test_constant_field_absorbed_in_one_sweep():
    v = TorusVectorField.from_modes(1, [((0,), [0.25])], symmetrize=False)
    freq_map, diffeo, residual, records = kam_conjugate(v, [1.0], n_max=4, tol=1e-14)
    assert residual < 1e-14
    assert freq_map.phi[0] == pytest.approx(0.75)
    assert diffeo.sup_displacement() < 1e-14
    assert len(records) <= 3


def test_sine_field_quadratic_convergence():
    freq_map, diffeo, residual, records = kam_conjugate(sine_field(), [1.0], n_max=8, tol=1e-13)
    resids = [r["residual"] for r in records]
    assert resids[0] == pytest.approx(EPS)
    # one sweep contracts to O(eps^2), three reach the floor
    assert resids[1] < 10 * EPS**2
    assert residual < 1e-12
    assert len(records) <= 4
    assert freq_map.shift <= EPS


def test_golden_pair_superlinear():
    freq_map, diffeo, residual, records = kam_conjugate(
        golden_field(), [1.0, GOLDEN], n_max=8, tol=1e-12, grid_size=64
    )
    assert residual <= 1e-10
    assert len(records) <= 6
    resids = [r["residual"] for r in records]
    ratios = [
        math.log(b) / math.log(a)
        for a, b in zip(resids, resids[1:])
        if a < 1.0 and b > 1e-14
    ]
    assert ratios and all(r >= 1.8 for r in ratios)
    assert freq_map.shift <= EPS


def test_displacement_within_proof_budget():
    # sup|theta - id| stays under the proof-side budget r/varsigma*lam^gamma*eps
    from kamtorus.diophantine import certify_best

    v = golden_field()
    cert = certify_best([1.0, GOLDEN], 2.0, 100)
    _, diffeo, _, _ = kam_conjugate(v, cert.omega, n_max=8, tol=1e-12, grid_size=64)
    lam, r = proof_constants(1.0, cert.gamma)
    budget = r / cert.varsigma * lam**cert.gamma * v.norm(1.0)
    assert diffeo.sup_displacement() <= budget


def test_divergence_reported_for_large_field():
    v = sine_field(1.5)
    with pytest.raises((ArithmeticError, DiffeoBreakdownError)):
        kam_conjugate(v, [1.0], n_max=6)


def test_uncertified_certificate_rejected():
    from kamtorus.diophantine import check

    cert = check([1.0, GOLDEN], 2.0, varsigma=10.0, k_max=50)  # witness < 10
    assert not cert.certified
    with pytest.raises(ValueError):
        kam_conjugate(golden_field(), [1.0, GOLDEN], cert=cert, n_max=4)


# ----------------------------------------------------------------------
# symplectic lift
# ----------------------------------------------------------------------


def test_lift_identity_and_translation():
    ident = TorusDiffeo.identity(1)
    x = np.array([[0.4]])
    xi = np.array([[2.0]])
    y, eta = symplectic_lift(ident)(x, xi)
    assert np.allclose(y, x) and np.allclose(eta, xi)

    shift = TorusDiffeo(1, TorusVectorField.from_modes(1, [((0,), [0.5])], symmetrize=False))
    y, eta = symplectic_lift(shift)(x, xi)
    assert np.allclose(y, x + 0.5) and np.allclose(eta, xi)


def test_lift_hand_jacobian():
    th = TorusDiffeo(1, TorusVectorField.from_modes(1, [((1,), [0.1 / 2j])]))
    x = np.array([[0.3]])
    xi = np.array([[2.0]])
    y, eta = symplectic_lift(th)(x, xi)
    assert y[0, 0] == pytest.approx(0.3 + 0.1 * math.sin(0.3))
    assert eta[0, 0] == pytest.approx(2.0 / (1 + 0.1 * math.cos(0.3)))


def test_lift_preserves_linearity():
    th = TorusDiffeo(1, TorusVectorField.from_modes(1, [((1,), [0.05 / 2j])]))
    lift = symplectic_lift(th)
    f = sine_field(0.3)
    coeff = lift.pullback_linear_coefficients(f)
    x = np.array([[0.7]])
    for lam in (1.0, 2.5):
        _, eta = lift(x, np.array([[lam]]))
        direct = f.value(th(x))[0, 0] * eta[0, 0]
        assert coeff(x)[0, 0] * lam == pytest.approx(direct)


# ----------------------------------------------------------------------
# transport unitary
# ----------------------------------------------------------------------


def test_unitary_identity_map():
    op = transport_unitary(TorusDiffeo.identity(1), 6)
    assert np.max(np.abs(op.mat - np.eye(13))) < 1e-13


def test_unitary_translation_is_diagonal_phase():
    c = 0.7
    shift = TorusDiffeo(1, TorusVectorField.from_modes(1, [((0,), [c])], symmetrize=False))
    op = transport_unitary(shift, 8)
    k = np.arange(-8, 9)
    assert np.max(np.abs(np.diag(op.mat) - np.exp(1j * k * c))) < 1e-13
    assert np.max(np.abs(op.mat - np.diag(np.diag(op.mat)))) < 1e-13


def test_unitary_interior_defect_small():
    th = TorusDiffeo(1, TorusVectorField.from_modes(1, [((1,), [0.1 / 2j])]))
    op = transport_unitary(th, 16, margin=8, defect_tol=1e-10)
    idx = op.interior_indices(8)
    gram = op.mat[:, idx].conj().T @ op.mat[:, idx]
    assert np.max(np.abs(gram - np.eye(len(idx)))) < 1e-10


def test_unitary_unreachable_defect_raises():
    th = TorusDiffeo(1, TorusVectorField.from_modes(1, [((1,), [0.3 / 2j])]))
    with pytest.raises(GridTooSmallError):
        transport_unitary(th, 16, defect_tol=1e-30)


def test_unitary_grid_validation():
    with pytest.raises(ValueError):
        transport_unitary(TorusDiffeo.identity(1), 8, grid_size=16)


def test_unitary_breakdown_detection():
    th = TorusDiffeo(1, TorusVectorField.from_modes(1, [((1,), [1.2 / 2j])]))
    with pytest.raises(DiffeoBreakdownError):
        transport_unitary(th, 8)


# ----------------------------------------------------------------------
# transport operator and the exact Egorov identity
# ----------------------------------------------------------------------


def test_linear_transport_matrix_hermitian_and_diagonal_part():
    op = linear_transport_matrix([1.0], sine_field(0.2), 0.1, 8)
    assert op.is_hermitian(1e-13)
    assert np.allclose(np.diag(op.mat).real, 0.1 * np.arange(-8, 9), atol=1e-14)


def test_egorov_zero_field():
    res = verify_egorov(TorusDiffeo.identity(1), [1.0], [1.0], TorusVectorField(1), 0.1, 8)
    assert res < 1e-14


def test_egorov_worked_example_d1():
    freq_map, diffeo, _, _ = kam_conjugate(sine_field(), [1.0], n_max=8, tol=1e-13)
    res = verify_egorov(diffeo, [1.0], freq_map.phi, sine_field(), 0.1, 32, margin=16)
    assert res <= 1e-6


def test_egorov_residual_tracks_conjugacy_tolerance():
    v = sine_field()
    results = []
    for tol in (1e-4, 1e-12):
        freq_map, diffeo, _, _ = kam_conjugate(v, [1.0], n_max=8, tol=tol)
        results.append(verify_egorov(diffeo, [1.0], freq_map.phi, v, 0.1, 24, margin=10))
    assert results[1] < results[0]


# ----------------------------------------------------------------------
# proof-side constants
# ----------------------------------------------------------------------


def test_proof_constants_monotone():
    lam, r = proof_constants(1.0, 2.0)
    assert r < 0.5
    lam2, r2 = proof_constants(2.0, 2.0)
    assert lam2 <= lam and r2 < 1.0


def test_classical_smallness_chain_reported():
    report = classical_smallness(1e-3, 1.0, 1.0, 2.0, 1.0)
    assert report["eps_ok"]
    # the proof-side cap is far below desk scale; the chain reports that
    assert not report["chain_ok"]
    assert report["lam"] > 1.0
