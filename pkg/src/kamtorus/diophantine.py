"""Certification of strongly nonresonant frequency vectors.

A frequency omega is certified at (gamma, varsigma) over a finite range if
``|k.omega| * |k|_1^(gamma-1) >= varsigma`` for every integer vector k with
``0 < |k|_1 <= k_max``.  All downstream operators are mode-truncated, so a
finite certification range covering the largest produced angle frequency is
sufficient; drivers record that bound alongside the certificate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ResonantFrequencyError(ValueError):
    """An exact resonance k.omega == 0 was found within the scan range."""

    def __init__(self, k):
        self.k = tuple(int(c) for c in k)
        super().__init__(f"exact resonance at k = {self.k}")


@dataclass(frozen=True)
class DiophantineCert:
    omega: tuple
    gamma: float
    varsigma: float
    k_max: int
    min_witness: float
    witness_k: tuple = field(default=())

    @property
    def certified(self) -> bool:
        return self.min_witness >= self.varsigma

    @property
    def d(self) -> int:
        return len(self.omega)

    def covers(self, angle_band: int) -> bool:
        return angle_band <= self.k_max

    def to_dict(self):
        return {
            "omega": list(self.omega),
            "gamma": self.gamma,
            "varsigma": self.varsigma,
            "k_max": self.k_max,
            "min_witness": self.min_witness,
            "witness_k": list(self.witness_k),
            "certified": self.certified,
        }


def _half_lattice(d, k_max):
    """Integer vectors with 0 < |k|_1 <= k_max, one per {k, -k} pair.

    The witness value is even in k, so scanning representatives with positive
    leading nonzero component halves the work.
    """
    if d == 1:
        k = np.arange(1, k_max + 1, dtype=np.int64)[:, None]
        return k
    blocks = []
    # leading component positive
    for k1 in range(1, k_max + 1):
        rest = _ball(d - 1, k_max - k1)
        lead = np.full((rest.shape[0], 1), k1, dtype=np.int64)
        blocks.append(np.hstack([lead, rest]))
    # leading component zero: recurse on the remaining coordinates
    tail = _half_lattice(d - 1, k_max)
    blocks.append(np.hstack([np.zeros((tail.shape[0], 1), dtype=np.int64), tail]))
    return np.vstack(blocks)


def _ball(d, radius):
    """All integer vectors with |k|_1 <= radius (radius >= 0)."""
    if d == 1:
        return np.arange(-radius, radius + 1, dtype=np.int64)[:, None]
    blocks = []
    for k1 in range(-radius, radius + 1):
        rest = _ball(d - 1, radius - abs(k1))
        lead = np.full((rest.shape[0], 1), k1, dtype=np.int64)
        blocks.append(np.hstack([lead, rest]))
    return np.vstack(blocks)


def _scan(omega, gamma, k_max):
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    lattice = _half_lattice(len(omega), k_max)
    dots = lattice @ omega
    resonant = np.nonzero(dots == 0.0)[0]
    if resonant.size:
        raise ResonantFrequencyError(lattice[resonant[0]])
    values = np.abs(dots) * (np.sum(np.abs(lattice), axis=1) ** (gamma - 1.0))
    i = int(np.argmin(values))
    return float(values[i]), tuple(int(c) for c in lattice[i])


def check(omega, gamma, varsigma, k_max) -> DiophantineCert:
    """Exhaustively scan 0 < |k|_1 <= k_max and certify (or not) at varsigma."""
    omega = tuple(float(w) for w in np.atleast_1d(omega))
    if all(w == 0 for w in omega):
        raise ValueError("omega must be nonzero")
    if gamma <= 1.0:
        raise ValueError("gamma must exceed 1")
    if varsigma <= 0:
        raise ValueError("varsigma must be positive")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    witness, k = _scan(omega, gamma, k_max)
    return DiophantineCert(
        omega=omega, gamma=float(gamma), varsigma=float(varsigma), k_max=int(k_max),
        min_witness=witness, witness_k=k,
    )


def best_constant(omega, gamma, k_max) -> float:
    """Minimum of |k.omega|*|k|_1^(gamma-1) over the scan range.

    Monotone non-increasing in k_max; raises on exact resonances.
    """
    witness, _ = _scan(omega, gamma, k_max)
    return witness


def certify_best(omega, gamma, k_max) -> DiophantineCert:
    """Certificate with varsigma set to the scanned minimum itself."""
    witness, k = _scan(omega, gamma, k_max)
    return DiophantineCert(
        omega=tuple(float(w) for w in np.atleast_1d(omega)),
        gamma=float(gamma), varsigma=witness, k_max=int(k_max),
        min_witness=witness, witness_k=k,
    )
