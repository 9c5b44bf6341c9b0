"""Exact algebra of analytic phase-space symbols on the torus.

A symbol is a finite sum of plane waves ``A * exp(i(k.x + eta.xi))`` with
integer angle frequencies ``k`` and action frequencies ``eta`` on a uniform
lattice ``dxi * Z^d``.  On this class of symbols the Moyal product, the
Poisson bracket and the transport bracket are all computed in closed form,
mode by mode, so every identity used by the renormalization driver holds
exactly (up to an explicitly tracked tail of discarded small modes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_TAIL_TOL = 1e-14


class LatticeMismatchError(ValueError):
    """Two symbols do not share dimension or action lattice spacing."""


class DivergentLieSeriesError(ArithmeticError):
    """Lie series terms stopped decreasing; the flow precondition is violated."""


@dataclass(frozen=True)
class NormParams:
    """Analyticity widths (s in the action variable, rho in the angle variable)."""

    s: float
    rho: float

    def __post_init__(self):
        if self.s <= 0 or self.rho <= 0:
            raise ValueError("analyticity widths must be positive")


@dataclass(frozen=True)
class SemiclassicalScale:
    """Semiclassical parameter hbar together with the perturbation size eps.

    The driver supports two regimes: ``equal`` (eps == hbar) and
    ``subcritical`` (eps << hbar, e.g. eps = hbar**2).  The constraint
    eps <= hbar is enforced at construction.
    """

    hbar: float
    eps: float
    regime: str = "equal"

    def __post_init__(self):
        if not (0.0 < self.hbar <= 1.0):
            raise ValueError("hbar must lie in (0, 1]")
        if not (0.0 < self.eps <= self.hbar + 1e-15):
            raise ValueError("eps must lie in (0, hbar]")
        if self.regime not in ("equal", "subcritical"):
            raise ValueError("regime must be 'equal' or 'subcritical'")

    @classmethod
    def equal(cls, hbar: float) -> "SemiclassicalScale":
        return cls(hbar=hbar, eps=hbar, regime="equal")

    @classmethod
    def subcritical(cls, hbar: float, exponent: float = 2.0) -> "SemiclassicalScale":
        return cls(hbar=hbar, eps=hbar**exponent, regime="subcritical")

    @property
    def ratio(self) -> float:
        """eps / hbar, the coupling entering every conjugation series."""
        return self.eps / self.hbar


class ModeSymbol:
    """Sparse phase-space trigonometric polynomial.

    Parameters
    ----------
    d : int
        Torus dimension.
    dxi : float
        Spacing of the action-frequency lattice; every mode's eta equals
        ``dxi`` times an integer vector.
    modes : dict, optional
        Map ``(k, m) -> complex`` where ``k`` and ``m`` are integer tuples of
        length ``d`` and the mode is ``exp(i(k.x + dxi*m.xi))``.  Zero
        amplitudes are dropped on construction.
    tail : float
        Accumulated unweighted l1 mass of modes discarded by previous
        operations; a pointwise evaluation of the symbol is accurate to
        within this budget.
    """

    __slots__ = ("d", "dxi", "modes", "tail")

    def __init__(self, d, dxi=1.0, modes=None, tail=0.0):
        if d < 1:
            raise ValueError("dimension must be >= 1")
        if dxi <= 0:
            raise ValueError("action lattice spacing must be positive")
        self.d = int(d)
        self.dxi = float(dxi)
        self.modes = {}
        if modes:
            for (k, m), amp in modes.items():
                if amp != 0:
                    self.modes[(tuple(int(c) for c in k), tuple(int(c) for c in m))] = complex(amp)
        self.tail = float(tail)

    # ------------------------------------------------------------------
    # constructors
    # ------------------------------------------------------------------

    @classmethod
    def zero(cls, d, dxi=1.0):
        return cls(d, dxi)

    @classmethod
    def constant(cls, value, d, dxi=1.0):
        zero = (0,) * d
        return cls(d, dxi, {(zero, zero): complex(value)})

    @classmethod
    def plane_wave(cls, k, m, amplitude=1.0, dxi=1.0):
        k = tuple(int(c) for c in k)
        m = tuple(int(c) for c in m)
        return cls(len(k), dxi, {(k, m): complex(amplitude)})

    @classmethod
    def cosine(cls, k, m, amplitude=1.0, dxi=1.0):
        """amplitude * cos(k.x + dxi*m.xi), stored as a conjugate mode pair."""
        k = tuple(int(c) for c in k)
        m = tuple(int(c) for c in m)
        mk = tuple(-c for c in k)
        mm = tuple(-c for c in m)
        half = 0.5 * complex(amplitude)
        if k == mk and m == mm:
            return cls(len(k), dxi, {(k, m): complex(amplitude)})
        return cls(len(k), dxi, {(k, m): half, (mk, mm): half})

    @classmethod
    def sine(cls, k, m, amplitude=1.0, dxi=1.0):
        """amplitude * sin(k.x + dxi*m.xi)."""
        k = tuple(int(c) for c in k)
        m = tuple(int(c) for c in m)
        mk = tuple(-c for c in k)
        mm = tuple(-c for c in m)
        half = complex(amplitude) / 2j
        if k == mk and m == mm:
            return cls(len(k), dxi)
        return cls(len(k), dxi, {(k, m): half, (mk, mm): -half})

    # ------------------------------------------------------------------
    # bookkeeping
    # ------------------------------------------------------------------

    def copy(self):
        out = ModeSymbol(self.d, self.dxi, tail=self.tail)
        out.modes = dict(self.modes)
        return out

    def __len__(self):
        return len(self.modes)

    def __repr__(self):
        return f"ModeSymbol(d={self.d}, dxi={self.dxi}, n_modes={len(self.modes)}, tail={self.tail:.3e})"

    def eta(self, m):
        return self.dxi * np.asarray(m, dtype=float)

    def angle_band(self):
        """Largest l1 angle frequency present."""
        if not self.modes:
            return 0
        return max(sum(abs(c) for c in k) for k, _ in self.modes)

    def angle_band_inf(self):
        if not self.modes:
            return 0
        return max(max(abs(c) for c in k) if k else 0 for k, _ in self.modes)

    def action_band(self):
        """Largest l1 action-lattice index present."""
        if not self.modes:
            return 0
        return max(sum(abs(c) for c in m) for _, m in self.modes)

    # ------------------------------------------------------------------
    # algebra
    # ------------------------------------------------------------------

    def _check_compatible(self, other):
        if self.d != other.d or self.dxi != other.dxi:
            raise LatticeMismatchError(
                f"incompatible symbols: (d={self.d}, dxi={self.dxi}) vs (d={other.d}, dxi={other.dxi})"
            )

    def __add__(self, other):
        self._check_compatible(other)
        out = self.copy()
        for key, amp in other.modes.items():
            new = out.modes.get(key, 0j) + amp
            if new == 0:
                out.modes.pop(key, None)
            else:
                out.modes[key] = new
        out.tail = self.tail + other.tail
        return out

    def __neg__(self):
        out = ModeSymbol(self.d, self.dxi, tail=self.tail)
        out.modes = {key: -amp for key, amp in self.modes.items()}
        return out

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        scalar = complex(scalar)
        out = ModeSymbol(self.d, self.dxi, tail=abs(scalar) * self.tail)
        if scalar != 0:
            out.modes = {key: scalar * amp for key, amp in self.modes.items()}
        return out

    __rmul__ = __mul__

    def prune(self, tol=None):
        """Drop modes below ``tol`` in amplitude; their mass goes to the tail ledger."""
        tol = DEFAULT_TAIL_TOL if tol is None else tol
        dropped = 0.0
        keep = {}
        for key, amp in self.modes.items():
            if abs(amp) < tol:
                dropped += abs(amp)
            else:
                keep[key] = amp
        out = ModeSymbol(self.d, self.dxi, tail=self.tail + dropped)
        out.modes = keep
        return out

    # ------------------------------------------------------------------
    # norms and averaging
    # ------------------------------------------------------------------

    def norm(self, s, rho):
        """Weighted l1 norm: sum of |A| * exp(s*|eta|_1) * exp(rho*|k|_1)."""
        total = 0.0
        dxi = self.dxi
        for (k, m), amp in self.modes.items():
            kl1 = sum(abs(c) for c in k)
            el1 = dxi * sum(abs(c) for c in m)
            total += abs(amp) * math.exp(s * el1 + rho * kl1)
        return total

    def norm_u(self, u):
        """Compact norm with a single width on |k|_1 + |eta|_1."""
        return self.norm(u, u)

    def norm00(self):
        return sum(abs(amp) for amp in self.modes.values())

    def average(self):
        """Sub-symbol of all modes with k = 0 (a function of xi alone)."""
        out = ModeSymbol(self.d, self.dxi)
        zero = (0,) * self.d
        out.modes = {key: amp for key, amp in self.modes.items() if key[0] == zero}
        return out

    def oscillating_part(self):
        out = ModeSymbol(self.d, self.dxi, tail=self.tail)
        zero = (0,) * self.d
        out.modes = {key: amp for key, amp in self.modes.items() if key[0] != zero}
        return out

    def is_action_only(self, tol=0.0):
        zero = (0,) * self.d
        return all(key[0] == zero or abs(amp) <= tol for key, amp in self.modes.items())

    # ------------------------------------------------------------------
    # reality
    # ------------------------------------------------------------------

    def reality_defect(self):
        """max |A(k,m) - conj(A(-k,-m))| over stored modes; 0 for real symbols."""
        worst = 0.0
        for (k, m), amp in self.modes.items():
            mirror = self.modes.get((tuple(-c for c in k), tuple(-c for c in m)), 0j)
            worst = max(worst, abs(amp - mirror.conjugate()))
        return worst

    def is_real(self, tol=1e-12):
        scale = max(1.0, self.norm00())
        return self.reality_defect() <= tol * scale

    # ------------------------------------------------------------------
    # evaluation & serialization
    # ------------------------------------------------------------------

    def value(self, x, xi):
        """Evaluate the symbol at points.  x, xi: arrays shaped (..., d)."""
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(np.broadcast(x[..., 0], xi[..., 0]).shape, dtype=complex)
        for (k, m), amp in self.modes.items():
            phase = x @ np.asarray(k, dtype=float) + xi @ self.eta(m)
            out = out + amp * np.exp(1j * phase)
        return out

    def to_dict(self):
        entries = []
        for (k, m), amp in sorted(self.modes.items()):
            eta = [self.dxi * c for c in m]
            entries.append({"k": list(k), "eta": eta, "re": amp.real, "im": amp.imag})
        return {"d": self.d, "dxi": self.dxi, "modes": entries, "tail": self.tail}

    @classmethod
    def from_dict(cls, data):
        d = int(data["d"])
        dxi = float(data["dxi"])
        modes = {}
        for entry in data["modes"]:
            k = tuple(int(c) for c in entry["k"])
            m = []
            for c in entry["eta"]:
                idx = round(c / dxi)
                if idx * dxi != c:
                    raise ValueError(f"eta component {c} is not on the lattice {dxi}*Z")
                m.append(idx)
            modes[(k, tuple(m))] = complex(entry["re"], entry["im"])
        return cls(d, dxi, modes, tail=float(data.get("tail", 0.0)))

    def _arrays(self):
        n = len(self.modes)
        k = np.zeros((n, self.d), dtype=np.int64)
        m = np.zeros((n, self.d), dtype=np.int64)
        amp = np.zeros(n, dtype=complex)
        for i, ((kk, mm), a) in enumerate(self.modes.items()):
            k[i] = kk
            m[i] = mm
            amp[i] = a
        return k, m, amp


# ----------------------------------------------------------------------
# bilinear operations
# ----------------------------------------------------------------------


def _combine(a, b, phase_fn, tol):
    """Shared kernel for mode-wise bilinear products.

    ``phase_fn(sym)`` maps the symplectic pairing value k_a.eta_b - k_b.eta_a
    of a mode pair to the multiplicative factor on A*B.
    """
    a._check_compatible(b)
    out = ModeSymbol(a.d, a.dxi)
    if not a.modes or not b.modes:
        out.tail = _product_tail(a, b)
        return out
    kb, mb, ampb = b._arrays()
    etab = a.dxi * mb.astype(float)
    acc = {}
    for (ka, ma), ampa in a.modes.items():
        ka_arr = np.asarray(ka, dtype=float)
        eta_a = a.dxi * np.asarray(ma, dtype=float)
        sym = ka_arr @ etab.T - kb @ eta_a
        vals = ampa * ampb * phase_fn(sym)
        new_k = kb + np.asarray(ka, dtype=np.int64)
        new_m = mb + np.asarray(ma, dtype=np.int64)
        for i in range(len(vals)):
            v = vals[i]
            if v == 0:
                continue
            key = (tuple(new_k[i].tolist()), tuple(new_m[i].tolist()))
            acc[key] = acc.get(key, 0j) + v
    tol = DEFAULT_TAIL_TOL if tol is None else tol
    dropped = 0.0
    for key, amp in acc.items():
        if abs(amp) < tol:
            dropped += abs(amp)
        else:
            out.modes[key] = amp
    out.tail = _product_tail(a, b) + dropped
    return out


def _product_tail(a, b):
    # mass possibly lost through previously discarded modes of either factor
    return a.tail * b.norm00() + b.tail * a.norm00() + a.tail * b.tail


def multiply(a, b, tol=None):
    """Plain pointwise product (the hbar -> 0 limit of the Moyal product)."""
    return _combine(a, b, lambda sym: 1.0, tol)


def moyal(a, b, hbar, tol=None):
    """Moyal product a#b.

    On plane-wave modes the product is exact: the pair (w_a, w_b) contributes
    amplitude ``A*B*exp(-i*hbar/2 * (k_a.eta_b - k_b.eta_a))`` at mode
    ``w_a + w_b``.  The sign is pinned by the requirement that quantization
    intertwines # with the matrix product (see quantize.weyl_matrix).
    """
    return _combine(a, b, lambda sym: np.exp(-0.5j * hbar * sym), tol)


def moyal_commutator(a, b, hbar, tol=None):
    """Moyal commutator a#b - b#a, evaluated through its sine kernel."""
    out = _combine(a, b, lambda sym: -2j * np.sin(0.5 * hbar * sym), tol)
    out.tail += _product_tail(a, b)  # two products enter the commutator
    return out


def poisson(a, b, tol=None):
    """Classical Poisson bracket d_xi(a).d_x(b) - d_x(a).d_xi(b) on modes."""
    return _combine(a, b, lambda sym: sym, tol)


def flow_derivative(a, omega):
    """Derivative of the symbol along the constant angle flow of omega.

    This is the bracket of the transport symbol omega.xi with ``a``; each
    mode is multiplied by i*(omega.k).  Exact (no expansion is involved).
    """
    omega = np.asarray(omega, dtype=float)
    out = ModeSymbol(a.d, a.dxi, tail=a.tail * float(np.sum(np.abs(omega))) * max(1, a.angle_band()))
    for (k, m), amp in a.modes.items():
        factor = 1j * float(omega @ np.asarray(k, dtype=float))
        if factor != 0:
            out.modes[(k, m)] = factor * amp
    return out


def transport_commutator(omega, a, hbar):
    """Moyal commutator of the transport symbol omega.xi with ``a``.

    For a degree-one symbol the product expansion terminates at first
    order, so the commutator is exactly -i*hbar times `flow_derivative`,
    with no remainder at any hbar.
    """
    return (-1j * hbar) * flow_derivative(a, omega)


# ----------------------------------------------------------------------
# Lie series
# ----------------------------------------------------------------------


def ad_series(generator, seed, z, hbar, weights, tol=1e-14, max_terms=200, tail_tol=None):
    """Sum ``sum_j z^j * weights(j) * Ad_generator^j(seed)`` with Ad = [generator, .]_hbar.

    Stops at the first term whose unweighted norm falls below
    ``tol * max(1, |seed|)``; raises `DivergentLieSeriesError` after three
    consecutive non-decreasing terms.  The geometric bound on the dropped
    remainder is added to the result's tail ledger.
    """
    scale = max(1.0, seed.norm00())
    current = seed
    total = ModeSymbol(seed.d, seed.dxi)
    zj = 1.0 + 0j
    prev_norm = None
    grow_count = 0
    last_term_norm = 0.0
    last_ratio = 0.0
    for j in range(max_terms):
        coeff = zj * weights(j)
        term = coeff * current
        total = total + term
        term_norm = abs(coeff) * current.norm00()
        if prev_norm is not None and prev_norm > 0:
            last_ratio = term_norm / prev_norm
            if term_norm >= prev_norm:
                grow_count += 1
                if grow_count >= 3:
                    raise DivergentLieSeriesError(
                        f"Lie series terms non-decreasing for 3 orders (j={j}, term={term_norm:.3e})"
                    )
            else:
                grow_count = 0
        if term_norm < tol * scale and j > 0:
            last_term_norm = term_norm
            break
        prev_norm = term_norm
        current = moyal_commutator(generator, current, hbar, tol=tail_tol)
        zj *= z
    else:
        raise DivergentLieSeriesError(f"Lie series did not settle within {max_terms} terms")
    r = min(last_ratio, 0.9)
    total.tail += last_term_norm * r / (1.0 - r)
    return total


def lie_conjugate(a, generator, z, hbar, tol=1e-14, tail_tol=None):
    """Exponential conjugation series sum_j z^j/j! Ad^j(a)."""
    return ad_series(
        generator, a, z, hbar, lambda j: 1.0 / math.factorial(j), tol=tol, tail_tol=tail_tol
    )


def conjugate(a, generator, t, scale, tol=1e-14, tail_tol=None):
    """Symbol of ``exp(i t eps/hbar Op(F)) Op(a) exp(-i t eps/hbar Op(F))``.

    Requires |t| <= 1 and convergence of the flow series, enforced a
    posteriori through the divergence detector in `ad_series`.
    """
    if abs(t) > 1:
        raise ValueError("conjugation time must satisfy |t| <= 1")
    if t == 0:
        return a.copy()
    z = 1j * t * scale.ratio
    return lie_conjugate(a, generator, z, scale.hbar, tol=tol, tail_tol=tail_tol)


def conjugate_transport(omega, generator, t, scale, tol=1e-14):
    """Correction symbol c with ``Psi(omega.xi) = omega.xi + c`` under the
    flow of the generator.

    The first bracket [F, omega.xi] is an exact mode symbol, so the series
    reduces to `ad_series` with shifted factorial weights; the linear part
    itself is invariant.
    """
    if t == 0:
        return ModeSymbol(generator.d, generator.dxi)
    seed = (-1.0) * transport_commutator(omega, generator, scale.hbar)
    z = 1j * t * scale.ratio
    series = ad_series(
        generator, seed, z, scale.hbar,
        lambda j: 1.0 / math.factorial(j + 1), tol=tol,
    )
    return z * series
