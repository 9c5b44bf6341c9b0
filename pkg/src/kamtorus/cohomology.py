"""Small-divisor solve of the transport cohomological equation.

Given a symbol V and a certified frequency omega, find F with zero average
such that the bracket of the transport symbol omega.xi with F equals the
oscillating part of V.  On modes this is a division by i*(omega.k); since the
transport symbol is degree one, the same F also solves the quantum commutator
equation exactly, at every hbar.
"""

from __future__ import annotations

import math

import numpy as np

from .symbols import ModeSymbol

NEAR_RESONANCE_FLOOR = 1e-13


class CertificateTooSmallError(ValueError):
    """V contains an angle frequency outside the certified range."""

    def __init__(self, k, k_max):
        self.k = k
        super().__init__(f"mode k = {k} has |k|_1 > certified range {k_max}")


class NearResonantError(ArithmeticError):
    """A divisor |omega.k| fell below the machine-degeneracy floor.

    Dividing through would inject a spurious huge mode and silently corrupt
    every norm downstream, so this is a hard error.
    """

    def __init__(self, k, value):
        self.k = k
        self.value = value
        super().__init__(f"divisor omega.k = {value:.3e} at k = {k} is below the degeneracy floor")


def solve(V: ModeSymbol, cert, floor=NEAR_RESONANCE_FLOOR) -> ModeSymbol:
    """Zero-average solution F of the cohomological equation for V.

    F(k, eta) = V(k, eta) / (i omega.k) for k != 0; the k = 0 modes of V have
    no preimage and are ignored (they belong to the averaged part).
    """
    omega = np.asarray(cert.omega, dtype=float)
    omega_l1 = float(np.sum(np.abs(omega)))
    out = ModeSymbol(V.d, V.dxi, tail=V.tail / max(cert.varsigma, floor))
    zero = (0,) * V.d
    for (k, m), amp in V.modes.items():
        if k == zero:
            continue
        kl1 = sum(abs(c) for c in k)
        if kl1 > cert.k_max:
            raise CertificateTooSmallError(k, cert.k_max)
        divisor = float(omega @ np.asarray(k, dtype=float))
        if abs(divisor) < floor * omega_l1 * kl1:
            raise NearResonantError(k, divisor)
        out.modes[(k, m)] = amp / (1j * divisor)
    return out


def small_divisor_factor(cert, sigma: float) -> float:
    """The analyticity-loss constant varsigma^-1 * ((gamma-1)/(e*sigma))^(gamma-1)."""
    g = cert.gamma - 1.0
    return (g / (math.e * sigma)) ** g / cert.varsigma


def bound_check(V, F, cert, s, rho, sigma):
    """Compare |F| at the narrowed width against the small-divisor estimate.

    Returns both sides; ``ok`` failing indicates the certificate's varsigma
    is larger than the frequency actually supports on these modes.
    """
    if not (0.0 < sigma < rho):
        raise ValueError("need 0 < sigma < rho")
    lhs = F.norm(s, rho - sigma)
    rhs = small_divisor_factor(cert, sigma) * V.norm(s, rho)
    return {"lhs": lhs, "rhs": rhs, "ok": lhs <= rhs * (1.0 + 1e-12)}
