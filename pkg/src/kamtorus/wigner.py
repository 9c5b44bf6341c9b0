"""Wigner pairings, position densities, and semiclassical-measure diagnostics.

The Wigner distribution of a normalized state pairs it against quantized
observables, ``a -> <psi, Op(a) psi>``.  For basis harmonics this pairing
equals the torus average of the symbol frozen at the quantized action, which
is the exact prediction every diagnostic below compares against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quantize import basis_k


class BandOverflowError(ValueError):
    """A symbol mode shifts outside the state's coefficient box."""


@dataclass
class StateVector:
    """Coefficients of a normalized state over the truncated Fourier basis."""

    n_trunc: int
    d: int
    hbar: float
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        expected = (2 * self.n_trunc + 1) ** self.d
        if self.coeffs.shape != (expected,):
            raise ValueError(f"coefficient vector must have length {expected}")
        n = float(np.linalg.norm(self.coeffs))
        if abs(n - 1.0) > 1e-12:
            raise ValueError(f"state must be normalized (|psi| = {n})")

    @classmethod
    def basis_state(cls, k, n_trunc, hbar):
        k = tuple(int(c) for c in np.atleast_1d(k))
        d = len(k)
        box = basis_k(n_trunc, d)
        coeffs = np.zeros(box.shape[0], dtype=complex)
        match = np.nonzero(np.all(box == np.asarray(k), axis=1))[0]
        if match.size == 0:
            raise ValueError(f"basis index {k} outside the truncation")
        coeffs[match[0]] = 1.0
        return cls(n_trunc=n_trunc, d=d, hbar=hbar, coeffs=coeffs)

    @classmethod
    def from_vector(cls, vec, n_trunc, d, hbar):
        vec = np.asarray(vec, dtype=complex)
        vec = vec / np.linalg.norm(vec)
        return cls(n_trunc=n_trunc, d=d, hbar=hbar, coeffs=vec)

    def dominant_index(self):
        box = basis_k(self.n_trunc, self.d)
        return tuple(int(c) for c in box[int(np.argmax(np.abs(self.coeffs)))])


def wigner_eval(psi: StateVector, symbol, strict_band=False):
    """<psi, Op(a) psi> evaluated directly from the mode expansion.

    Mode (k0, eta0, A) contributes ``A * sum_k conj(c_{k+k0}) c_k
    exp(i eta0 . hbar (k + k0/2))``.  Contributions shifted outside the box
    are dropped (set ``strict_band`` to make that an error).
    """
    box = basis_k(psi.n_trunc, psi.d)
    dims = (2 * psi.n_trunc + 1,) * psi.d
    total = 0j
    for (k0, m0), amp in symbol.modes.items():
        k0a = np.asarray(k0, dtype=np.int64)
        if strict_band and np.max(np.abs(k0a)) > 0:
            support = box[np.abs(psi.coeffs) > 1e-15]
            if support.size and np.max(np.abs(support + k0a)) > psi.n_trunc:
                raise BandOverflowError(f"mode shift {k0} leaves the coefficient box")
        eta0 = symbol.dxi * np.asarray(m0, dtype=float)
        target = box + k0a
        valid = np.max(np.abs(target), axis=1) <= psi.n_trunc
        rows = np.ravel_multi_index(tuple((target[valid] + psi.n_trunc).T), dims)
        phases = np.exp(1j * psi.hbar * (box[valid] @ eta0 + 0.5 * float(eta0 @ k0a)))
        total += amp * np.sum(psi.coeffs[rows].conj() * psi.coeffs[valid] * phases)
    return total


def action_multiplier_pairing(psi: StateVector, fn):
    """<psi, f(hbar D) psi> = sum_k f(hbar k) |c_k|^2 for a multiplier f.

    This covers decaying observables (e.g. compactly supported functions of
    the action) that have no finite mode expansion.
    """
    box = basis_k(psi.n_trunc, psi.d)
    values = np.array([fn(psi.hbar * kk) for kk in box.astype(float)])
    return float(np.sum(values * np.abs(psi.coeffs) ** 2))


def haar_prediction(symbol, xi_star):
    """Torus average of the symbol at frozen action: sum_eta A(0, eta) e^(i eta.xi*)."""
    xi_star = np.atleast_1d(np.asarray(xi_star, dtype=float))
    zero = (0,) * symbol.d
    total = 0j
    for (k, m), amp in symbol.modes.items():
        if k != zero:
            continue
        eta = symbol.dxi * np.asarray(m, dtype=float)
        total += amp * np.exp(1j * float(eta @ xi_star))
    return total


def position_values(psi: StateVector, grid_size):
    """State values on a uniform grid, shape (g,)*d, with the (2 pi)^(-d/2)
    basis normalization."""
    g = int(grid_size)
    if g < 4 * psi.n_trunc + 1:
        raise ValueError("grid must resolve the density band: need g >= 4*n_trunc+1")
    dims = (g,) * psi.d
    spect = np.zeros(dims, dtype=complex)
    box = basis_k(psi.n_trunc, psi.d)
    idx = tuple((box[:, i] % g) for i in range(psi.d))
    spect[idx] = psi.coeffs
    values = np.fft.ifftn(spect) * g**psi.d
    return values * (2.0 * math.pi) ** (-psi.d / 2.0)


def density(psi: StateVector, grid_size=None):
    """|psi(x)|^2 samples on a uniform grid; integrates to 1."""
    g = grid_size or 4 * psi.n_trunc + 4
    vals = position_values(psi, g)
    return np.abs(vals) ** 2


def density_integral(dens, d):
    g = dens.shape[0]
    return float(np.sum(dens)) * (2.0 * math.pi / g) ** d


def density_flatness(psi: StateVector, grid_size=None):
    """Sup deviation of the position density from the flat value (2 pi)^-d."""
    dens = density(psi, grid_size)
    flat = (2.0 * math.pi) ** (-psi.d)
    return float(np.max(np.abs(dens - flat)))


def fit_loglog_slope(x, y):
    """Least-squares slope of log(y) against log(x); pairs with y = 0 dropped."""
    pts = [(xi, yi) for xi, yi in zip(x, y) if yi > 0 and xi > 0]
    if len(pts) < 2:
        return float("nan")
    lx = np.log([p[0] for p in pts])
    ly = np.log([p[1] for p in pts])
    return float(np.polyfit(lx, ly, 1)[0])


def measure_diagnostics(eig_sequence, test_symbols):
    """Tabulate Wigner pairings against the flat-torus prediction.

    ``eig_sequence``: iterable of (hbar, StateVector, eigenvalue) triples from
    a spectral window; ``test_symbols``: list of (symbol_id, ModeSymbol).
    Rows carry the pairing, the prediction at the dominant quantized action,
    and their deviation; per-symbol log-log slopes of deviation against hbar
    summarize the decay.
    """
    rows = []
    per_symbol = {sid: {} for sid, _ in test_symbols}
    for hbar, psi, lam in eig_sequence:
        k_label = psi.dominant_index()
        xi_star = hbar * np.asarray(k_label, dtype=float)
        for sid, symbol in test_symbols:
            value = wigner_eval(psi, symbol)
            pred = haar_prediction(symbol, xi_star)
            dev = abs(value - pred)
            rows.append(
                {
                    "hbar": hbar,
                    "k_label": k_label,
                    "symbol_id": sid,
                    "value_re": value.real,
                    "value_im": value.imag,
                    "prediction_re": pred.real,
                    "prediction_im": pred.imag,
                    "deviation": dev,
                    "eigenvalue": lam,
                }
            )
            bucket = per_symbol[sid].setdefault(hbar, [])
            bucket.append(dev)
    slopes = {}
    for sid, buckets in per_symbol.items():
        hs = sorted(buckets)
        max_devs = [max(buckets[h]) for h in hs]
        slopes[sid] = fit_loglog_slope(hs, max_devs)
    return {"rows": rows, "slopes": slopes}
