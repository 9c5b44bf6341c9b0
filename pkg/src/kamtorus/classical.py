"""Classical KAM for perturbed constant vector fields on the torus.

Given a small analytic field v, the conjugacy problem asks for a corrected
frequency phi and a near-identity diffeomorphism theta with

    d_theta(x) . omega = phi + v(theta(x)),

so that theta transports the straight flow of omega onto the flow of
phi + v.  The iteration below is the standard quadratic scheme: each sweep
absorbs the residual's mean into the frequency (through the accumulated
Jacobian, which keeps the step quadratic), solves one directional-derivative
equation by Fourier division, and composes the correction into theta.  The
output is validated by the conjugacy residual, never by internal iterates.

The same module realizes the induced unitary (weighted composition by theta)
on the truncated Fourier basis and verifies the exact Egorov identity
``U P U* = L`` at matrix level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .quantize import TorusOperator, basis_k, operator_norm, transport_matrix, _flat_index


class DiffeoBreakdownError(ArithmeticError):
    """The accumulated displacement stopped being a diffeomorphism."""


class DivergenceError(ArithmeticError):
    """The quadratic iteration failed to contract."""


class GridTooSmallError(ValueError):
    """Quadrature aliasing detected (unitarity defect above tolerance)."""


# ----------------------------------------------------------------------
# trigonometric vector fields and diffeomorphisms
# ----------------------------------------------------------------------


class TorusVectorField:
    """Real trigonometric-polynomial vector field on the d-torus.

    Stored as Fourier coefficients ``coeffs[k] in C^d`` with the reality
    symmetry ``coeffs[-k] = conj(coeffs[k])`` enforced at construction.
    """

    def __init__(self, d, coeffs=None):
        self.d = int(d)
        self.coeffs = {}
        if coeffs:
            for k, c in coeffs.items():
                c = np.asarray(c, dtype=complex)
                if c.shape != (self.d,):
                    raise ValueError("coefficient vectors must have length d")
                if np.any(c != 0):
                    self.coeffs[tuple(int(x) for x in k)] = c

    @classmethod
    def from_modes(cls, d, modes, symmetrize=True):
        """modes: iterable of (k, coefficient vector).  With ``symmetrize``
        the conjugate mode is added automatically."""
        coeffs = {}
        for k, c in modes:
            k = tuple(int(x) for x in k)
            c = np.asarray(c, dtype=complex)
            coeffs[k] = coeffs.get(k, np.zeros(d, dtype=complex)) + c
            if symmetrize and any(x != 0 for x in k):
                mk = tuple(-x for x in k)
                coeffs[mk] = coeffs.get(mk, np.zeros(d, dtype=complex)) + c.conj()
        return cls(d, coeffs)

    def angle_band(self):
        if not self.coeffs:
            return 0
        return max(sum(abs(x) for x in k) for k in self.coeffs)

    def angle_band_inf(self):
        if not self.coeffs:
            return 0
        return max(max(abs(x) for x in k) for k in self.coeffs)

    def norm(self, s=0.0):
        return sum(
            float(np.linalg.norm(c)) * math.exp(s * sum(abs(x) for x in k))
            for k, c in self.coeffs.items()
        )

    def mean(self):
        zero = (0,) * self.d
        return self.coeffs.get(zero, np.zeros(self.d, dtype=complex)).real.copy()

    def reality_defect(self):
        worst = 0.0
        for k, c in self.coeffs.items():
            mirror = self.coeffs.get(tuple(-x for x in k), np.zeros(self.d, dtype=complex))
            worst = max(worst, float(np.max(np.abs(c - mirror.conj()))))
        return worst

    def value(self, x):
        """Evaluate at points x of shape (..., d); returns a real array (..., d)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for k, c in self.coeffs.items():
            phase = np.exp(1j * (x @ np.asarray(k, dtype=float)))
            out += phase[..., None] * c
        return out.real


@dataclass
class TorusDiffeo:
    """Near-identity torus map theta(x) = x + u(x), u a trigonometric polynomial."""

    d: int
    displacement_field: TorusVectorField

    @classmethod
    def identity(cls, d):
        return cls(d=d, displacement_field=TorusVectorField(d))

    def displacement(self, x):
        return self.displacement_field.value(x)

    def __call__(self, x):
        return np.asarray(x, dtype=float) + self.displacement(x)

    def jacobian(self, x):
        """I + du(x), shape (..., d, d)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (self.d,), dtype=complex)
        for k, c in self.displacement_field.coeffs.items():
            ka = np.asarray(k, dtype=float)
            phase = np.exp(1j * (x @ ka))
            out += phase[..., None, None] * np.outer(c, 1j * ka)
        jac = out.real
        jac += np.eye(self.d)
        return jac

    def sup_displacement(self, grid_size=64):
        pts = grid_points(self.d, grid_size)
        return float(np.max(np.linalg.norm(self.displacement(pts), axis=-1)))

    def min_jacobian_det(self, grid_size=64):
        pts = grid_points(self.d, grid_size)
        return float(np.min(np.linalg.det(self.jacobian(pts))))


@dataclass
class FrequencyMap:
    """Input frequency, renormalized output, and the per-sweep corrections."""

    omega: np.ndarray
    phi: np.ndarray
    corrections: list = field(default_factory=list)

    @property
    def shift(self):
        return float(np.linalg.norm(self.phi - self.omega))


class SymplecticLift:
    """Phase-space lift (x, xi) -> (theta(x), [(d theta)^T]^{-1} xi)."""

    def __init__(self, diffeo: TorusDiffeo):
        self.diffeo = diffeo

    def __call__(self, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        jac_t = np.swapaxes(self.diffeo.jacobian(x), -1, -2)
        return self.diffeo(x), np.linalg.solve(jac_t, xi[..., None])[..., 0]

    def pullback_scalar(self, fn):
        """x -> fn(theta(x)); composition with the base map."""
        return lambda x: fn(self.diffeo(x))

    def pullback_linear_coefficients(self, vfield: TorusVectorField):
        """For a symbol f(x).xi, the lifted composition is again linear in xi
        with coefficient vector J(x)^{-1} f(theta(x)); returns that map."""

        def coefficients(x):
            jac = self.diffeo.jacobian(np.asarray(x, dtype=float))
            return np.linalg.solve(jac, vfield.value(self.diffeo(x))[..., None])[..., 0]

        return coefficients


# ----------------------------------------------------------------------
# the quadratic conjugacy iteration
# ----------------------------------------------------------------------


def grid_points(d, g):
    axes = [np.linspace(0.0, 2.0 * math.pi, g, endpoint=False)] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1)


def _fft_int_freqs(d, g):
    f = (np.fft.fftfreq(g) * g).astype(np.int64)
    mesh = np.meshgrid(*([f] * d), indexing="ij")
    return np.stack(mesh, axis=-1)


def _coeffs_from_grid(values, threshold):
    """FFT projection of real grid samples (shape (g,)*d + (d,)) to a
    Hermitian-symmetrized coefficient dict."""
    d = values.shape[-1]
    g = values.shape[0]
    freqs = _fft_int_freqs(d, g)
    flat_k = freqs.reshape(-1, d)
    hat = np.stack(
        [np.fft.fftn(values[..., i]) / g**d for i in range(d)], axis=-1
    ).reshape(-1, d)
    mags = np.max(np.abs(hat), axis=1)
    keep = np.nonzero(mags > threshold)[0]
    raw = {tuple(int(x) for x in flat_k[i]): hat[i] for i in keep}
    coeffs = {}
    for k, c in raw.items():
        mk = tuple(-x for x in k)
        mirror = raw.get(mk)
        if mirror is None:
            sym = 0.5 * (c + c.conj()) if k == mk else c
        else:
            sym = 0.5 * (c + mirror.conj())
        coeffs[k] = sym
        if mk not in raw and k != mk:
            coeffs[mk] = sym.conj()
    return coeffs


def _residual_field(v, omega, phi, diffeo, pts):
    theta_x = pts + diffeo.displacement(pts)
    jac = diffeo.jacobian(pts)
    det = np.linalg.det(jac)
    if np.min(det) <= 0.0:
        raise DiffeoBreakdownError(f"Jacobian determinant reached {np.min(det):.3e}")
    w = np.linalg.solve(jac, (phi + v.value(theta_x))[..., None])[..., 0] - omega
    return w, jac


def kam_conjugate(v, omega, cert=None, n_max=10, tol=1e-12, grid_size=None, divisor_floor=1e-13):
    """Conjugate the field omega + v back to the straight flow of omega.

    Returns (FrequencyMap, TorusDiffeo, residual, records).  The residual is
    ``sup_x |(d theta(x))^{-1} (phi + v(theta(x))) - omega|`` on the working
    grid; records hold the per-sweep history for reporting.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    d = len(omega)
    if v.d != d:
        raise ValueError("field dimension does not match the frequency vector")
    if cert is not None and not cert.certified:
        raise ValueError("frequency certificate does not meet its own varsigma")
    g = grid_size or max(32, 8 * max(1, v.angle_band_inf()))
    pts = grid_points(d, g)
    freqs = _fft_int_freqs(d, g)
    omega_dot_k = freqs @ omega
    k_l1 = np.sum(np.abs(freqs), axis=-1)
    omega_l1 = float(np.sum(np.abs(omega)))

    diffeo = TorusDiffeo.identity(d)
    phi = omega.copy()
    corrections = []
    records = []
    prev_residual = None
    residual = math.inf
    for sweep in range(1, n_max + 1):
        w, jac = _residual_field(v, omega, phi, diffeo, pts)
        residual = float(np.max(np.linalg.norm(w, axis=-1)))
        records.append(
            {
                "sweep": sweep,
                "residual": residual,
                "sup_u": diffeo.sup_displacement(g),
                "freq_shift": float(np.linalg.norm(phi - omega)),
            }
        )
        if residual < tol:
            break
        if prev_residual is not None and residual > prev_residual:
            raise DivergenceError(
                f"residual grew from {prev_residual:.3e} to {residual:.3e} at sweep {sweep}"
            )
        prev_residual = residual

        # fold the mean through the accumulated Jacobian: solve <J^-1> delta = -<w>
        jinv_mean = np.mean(np.linalg.inv(jac).reshape(-1, d, d), axis=0)
        mean_w = np.mean(w.reshape(-1, d), axis=0)
        delta = -np.linalg.solve(jinv_mean, mean_w)
        phi = phi + delta
        corrections.append(delta)
        w_tilde = w + np.linalg.solve(jac, np.broadcast_to(delta, w.shape)[..., None])[..., 0]

        # directional-derivative solve by Fourier division (unnormalized FFT:
        # the inverse transform below restores the grid scaling)
        hat = np.stack([np.fft.fftn(w_tilde[..., i]) for i in range(d)], axis=-1)
        mags = np.abs(hat).max(axis=-1)
        floor = 1e-16 * float(mags.max()) if mags.max() > 0 else 0.0
        hat[mags <= floor] = 0.0
        tiny = np.abs(omega_dot_k) < divisor_floor * omega_l1 * np.maximum(k_l1, 1)
        bad = tiny & (mags > floor)
        bad[(0,) * d] = False  # the mean was removed exactly
        if np.any(bad):
            idx = np.argwhere(bad)[0]
            raise DivergenceError(f"near-resonant grid frequency k = {tuple(freqs[tuple(idx)])}")
        divisor = 1j * omega_dot_k
        divisor[(0,) * d] = math.inf
        divisor[tiny] = math.inf
        q_hat = hat / divisor[..., None]
        q = np.stack([np.fft.ifftn(q_hat[..., i]).real for i in range(d)], axis=-1)

        # compose: theta <- theta o (id + q)
        shifted = pts + q
        u_new = q + diffeo.displacement(shifted)
        threshold = max(1e-18, 1e-16 * float(np.max(np.abs(u_new))) if u_new.size else 0.0)
        diffeo = TorusDiffeo(d=d, displacement_field=TorusVectorField(d, _coeffs_from_grid(u_new, threshold)))
    else:
        w, _ = _residual_field(v, omega, phi, diffeo, pts)
        residual = float(np.max(np.linalg.norm(w, axis=-1)))
        records.append(
            {
                "sweep": n_max + 1,
                "residual": residual,
                "sup_u": diffeo.sup_displacement(g),
                "freq_shift": float(np.linalg.norm(phi - omega)),
            }
        )

    freq_map = FrequencyMap(omega=omega, phi=phi, corrections=corrections)
    return freq_map, diffeo, residual, records


def symplectic_lift(diffeo: TorusDiffeo) -> SymplecticLift:
    return SymplecticLift(diffeo)


# ----------------------------------------------------------------------
# proof-side constants, surfaced for reports
# ----------------------------------------------------------------------


def proof_constants(s, gamma):
    """Smallest admissible auxiliary constant lam with 8*gamma*(1+log lam)/lam
    below s/2, together with the induced analyticity cost r."""

    def f(lam):
        return 8.0 * gamma * (1.0 + math.log(lam)) / lam - s / 2.0

    if f(1.0) < 0:
        lam = 1.0
    else:
        # nudge past the root so the budget inequality is strict
        lam = float(scipy.optimize.brentq(f, 1.0, 1e16)) * (1.0 + 1e-9)
    r = 8.0 * gamma * (1.0 + math.log(lam)) / lam
    return lam, r


def classical_smallness(eps, s, rho, gamma, varsigma):
    """The admissibility chain eps < rho/16 <= varsigma/(32*lam^gamma)."""
    lam, r = proof_constants(s, gamma)
    cap = varsigma / (32.0 * lam**gamma)
    return {
        "lam": lam,
        "r": r,
        "eps": eps,
        "rho_over_16": rho / 16.0,
        "cap": cap,
        "eps_ok": eps < rho / 16.0,
        "chain_ok": rho / 16.0 <= cap,
        "ok": eps < rho / 16.0 and rho / 16.0 <= cap,
    }


# ----------------------------------------------------------------------
# induced unitary and exact Egorov check
# ----------------------------------------------------------------------


def transport_unitary(diffeo, n_trunc, hbar=1.0, grid_size=None, defect_tol=1e-8, margin=None):
    """Matrix of psi -> sqrt|det d theta| psi o theta on the truncated basis.

    Columns are computed by FFT quadrature on a grid of at least 4*n_trunc+1
    points per axis; an interior unitarity defect above ``defect_tol`` raises
    `GridTooSmallError`.
    """
    d = diffeo.d
    g = grid_size or (4 * n_trunc + 4)
    if g < 4 * n_trunc + 1:
        raise ValueError("quadrature grid must have at least 4*n_trunc+1 points per axis")
    pts = grid_points(d, g)
    u = diffeo.displacement(pts)
    det = np.linalg.det(diffeo.jacobian(pts))
    if np.min(det) <= 0.0:
        raise DiffeoBreakdownError("composition weight undefined: det d theta <= 0")
    base = np.sqrt(det)

    # cached per-axis phase powers exp(i k_i u_i), k_i = -N..N
    krange = np.arange(-n_trunc, n_trunc + 1)
    axis_phases = [
        np.exp(1j * krange.reshape((-1,) + (1,) * d) * u[..., i][None, ...]) for i in range(d)
    ]
    box = basis_k(n_trunc, d)
    size = box.shape[0]
    mat = np.empty((size, size), dtype=complex)
    for col in range(size):
        k = box[col]
        integrand = base.astype(complex)
        for i in range(d):
            integrand = integrand * axis_phases[i][k[i] + n_trunc]
        hat = np.fft.fftn(integrand) / g**d
        m = (box - k) % g
        mat[:, col] = hat[tuple(m[:, i] for i in range(d))]
    out = TorusOperator(n_trunc=n_trunc, d=d, hbar=hbar, mat=mat)

    check_margin = n_trunc // 2 if margin is None else margin
    idx = out.interior_indices(check_margin)
    gram_cols = mat[:, idx].conj().T @ mat[:, idx]
    gram_rows = mat[idx, :] @ mat[idx, :].conj().T
    eye = np.eye(len(idx))
    defect = max(
        float(np.max(np.abs(gram_cols - eye))), float(np.max(np.abs(gram_rows - eye)))
    )
    if defect > defect_tol:
        raise GridTooSmallError(
            f"interior unitarity defect {defect:.3e} exceeds {defect_tol:.1e}"
        )
    return out


def linear_transport_matrix(freq, vfield, hbar, n_trunc):
    """Quantization of (freq + v(x)).xi: the self-adjoint transport operator.

    The symmetric quantization of a linear-in-xi symbol f(x).xi sends e_k to
    hbar * f_hat(k0).(k + k0/2) e_{k+k0}; the divergence correction that makes
    the transport operator self-adjoint is exactly this half-shift.
    """
    freq = np.atleast_1d(np.asarray(freq, dtype=float))
    d = len(freq)
    box = basis_k(n_trunc, d)
    size = box.shape[0]
    mat = np.zeros((size, size), dtype=complex)
    diag = hbar * (box @ freq)
    mat[np.arange(size), np.arange(size)] = diag
    src = np.arange(size)
    for k0, c in vfield.coeffs.items():
        k0a = np.asarray(k0, dtype=np.int64)
        target = box + k0a
        valid = np.max(np.abs(target), axis=1) <= n_trunc
        weight = hbar * ((box + 0.5 * k0a) @ c)
        rows = _flat_index(target[valid], n_trunc, d)
        mat[rows, src[valid]] += weight[valid]
    return TorusOperator(n_trunc=n_trunc, d=d, hbar=hbar, mat=mat)


def verify_egorov(diffeo, omega, phi, vfield, hbar, n_trunc, margin=None, grid_size=None):
    """Interior-block norm of U P U* - L for the conjugated transport operator."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    p_op = linear_transport_matrix(phi, vfield, hbar, n_trunc)
    if not p_op.is_hermitian(1e-10):
        raise ArithmeticError(
            f"perturbed transport matrix lost self-adjointness (defect {p_op.hermiticity_defect():.3e})"
        )
    l_op = transport_matrix(omega, hbar, n_trunc)
    u_op = transport_unitary(diffeo, n_trunc, hbar, grid_size=grid_size, margin=margin)
    m = n_trunc // 2 if margin is None else margin
    idx = u_op.interior_indices(m)
    rows = u_op.mat[idx, :]
    conj = (rows @ p_op.mat) @ rows.conj().T
    diff = conj - l_op.mat[np.ix_(idx, idx)]
    return operator_norm(diff)
