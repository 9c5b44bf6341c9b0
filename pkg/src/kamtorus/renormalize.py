"""Iterative averaging driver that renormalizes a perturbed transport operator.

Starting from a perturbation V of the transport operator, each step removes
an action-only counterterm, solves a cohomological equation for a generator,
and conjugates away the oscillating part, contracting the remaining
perturbation by a fixed universal factor.  The output is the total
counterterm, the generator list (from which the conjugating unitary is
assembled), and a ledger of norms checked against the certified schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import cohomology
from .quantize import TorusOperator, transport_matrix, weyl_matrix, operator_norm
from .symbols import ModeSymbol, NormParams, SemiclassicalScale, ad_series, conjugate


class ContractionFailureError(ArithmeticError):
    """A step failed to contract at the certified rate."""

    def __init__(self, n, prev_norm, new_norm, alpha):
        self.n = n
        self.prev_norm = prev_norm
        self.new_norm = new_norm
        super().__init__(
            f"step {n}: |V_{n+1}| = {new_norm:.6e} exceeds alpha * |V_{n}| = {alpha * prev_norm:.6e}"
        )


class FixedPointFailureError(ArithmeticError):
    """The counterterm fixed point did not contract within the iteration cap."""


class TruncationTooSmallError(ValueError):
    """Assembled unitary is non-unitary on the interior block beyond tolerance."""


@dataclass(frozen=True)
class KamConstants:
    """Universal contraction constants of the scheme."""

    alpha: float = 0.25
    beta: float = 0.0625

    @property
    def lam(self) -> float:
        return math.exp(self.beta / (1.0 - math.sqrt(self.alpha))) - 1.0

    def validate(self):
        lam = self.lam
        if not lam < 1.0:
            raise ValueError(f"lam = {lam} must be < 1")
        lhs = self.beta * (1.0 + self.beta) * (1.0 + (1.0 + lam) / (1.0 - lam))
        if lhs > self.alpha:
            raise ValueError(f"constants violate beta(1+beta)(1+(1+lam)/(1-lam)) = {lhs} <= alpha")
        return self


@dataclass(frozen=True)
class KamSchedule:
    """Geometric analyticity-loss schedule in the angle width."""

    rho: float
    gamma: float
    alpha: float = 0.25

    @property
    def shrink(self) -> float:
        return self.alpha ** (1.0 / (2.0 * (self.gamma - 1.0)))

    @property
    def sigma1(self) -> float:
        return self.rho / (2.0 * math.e * (self.gamma - 1.0)) * self.shrink

    def sigma(self, n: int) -> float:
        return self.sigma1 * self.shrink ** (n - 1)

    def rho_n(self, n: int) -> float:
        # rho_1 = rho, rho_{n+1} = rho_n - sigma_n (closed geometric sum)
        if n == 1:
            return self.rho
        return self.rho - self.sigma1 * (1.0 - self.shrink ** (n - 1)) / (1.0 - self.shrink)

    def u_n(self, n: int, s: float) -> float:
        return min(s, self.rho_n(n))

    def sigma_total(self) -> float:
        return self.sigma1 / (1.0 - self.shrink)

    def validate(self):
        if self.sigma_total() > self.rho / 2.0 + 1e-12:
            raise ValueError("schedule would consume more than half the angle width")
        return self


@dataclass
class StepRecord:
    n: int
    v_norm: float
    f_norm: float
    r_norm: float
    e_norm: float
    ratio: float
    rho_n: float
    sigma_n: float
    fixed_point_iters: int
    f_bound: float
    f_bound_ok: bool
    r_bound: float
    r_bound_ok: bool

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class KamState:
    """Value-type snapshot of the renormalization iteration after n steps."""

    n: int
    v: ModeSymbol
    f_list: list
    r_list: list
    records: list
    params: NormParams
    scale: SemiclassicalScale
    cert: object
    constants: KamConstants = field(default_factory=lambda: KamConstants().validate())
    schedule: KamSchedule = None
    v1_norm: float = 0.0

    @classmethod
    def initial(cls, V, cert, params, scale, constants=None):
        constants = (constants or KamConstants()).validate()
        schedule = KamSchedule(rho=params.rho, gamma=cert.gamma, alpha=constants.alpha).validate()
        return cls(
            n=1, v=V, f_list=[], r_list=[], records=[], params=params, scale=scale,
            cert=cert, constants=constants, schedule=schedule,
            v1_norm=V.norm(params.s, params.rho),
        )

    def r_total(self) -> ModeSymbol:
        total = ModeSymbol(self.v.d, self.v.dxi)
        for r in self.r_list:
            total = total + r
        return total


def smallness_threshold(cert, rho: float) -> float:
    """Perturbation-size threshold under which the scheme is certified."""
    g = cert.gamma - 1.0
    return cert.varsigma / 64.0 * (math.sqrt(rho) / (2.0 * g)) ** (2.0 * g)


def smallness_check(V, params: NormParams, cert, scale: SemiclassicalScale) -> bool:
    """In the equal regime |V| itself is tested; in the subcritical regime the
    effective coupling (eps/hbar)*|V| is tested against the same threshold."""
    value = V.norm(params.s, params.rho)
    if scale.regime == "subcritical":
        value *= scale.ratio
    return value <= smallness_threshold(cert, params.rho)


def _compose_flows(symbol, f_list, scale, tol):
    out = symbol
    for f in f_list:
        out = conjugate(out, f, 1.0, scale, tol=tol)
    return out


def counterterm(v_n, f_list, scale, tol=1e-12, max_iter=60):
    """Action-only R with the average of its flowed image equal to <V_n>.

    Solved by undamped Picard iteration R <- <V_n> + (R - T(R)), where
    T(R) averages the composition of the accumulated conjugations applied
    to R; T is a contraction of the identity whenever the generator norms
    obey the scheduled decay.  Returns (R, E) with E the flowed image.
    """
    r, e, _ = _counterterm_iter(v_n, f_list, scale, tol, max_iter)
    return r, e


def _counterterm_iter(v_n, f_list, scale, tol, max_iter):
    target = v_n.average()
    if not f_list or not target.modes:
        return target, target.copy(), 0
    series_tol = min(tol * 1e-2, 1e-14)
    r = target.copy()
    scale_norm = max(1.0, target.norm00())
    for it in range(1, max_iter + 1):
        e = _compose_flows(r, f_list, scale, series_tol)
        defect = e.average() - target
        if defect.norm00() <= tol * scale_norm:
            return r, e, it
        r = r - defect
    raise FixedPointFailureError(
        f"counterterm iteration stalled: defect {defect.norm00():.3e} after {max_iter} sweeps"
    )


def step(state: KamState, tol=1e-12) -> KamState:
    """One renormalization step: counterterm, generator, contracted remainder."""
    n = state.n
    s = state.params.s
    sched = state.schedule
    rho_n, sigma_n = sched.rho_n(n), sched.sigma(n)
    v_norm = state.v.norm(s, rho_n)

    r_n, e_nn, fp_iters = _counterterm_iter(state.v, state.f_list, state.scale, tol, 60)
    rhs = state.v - e_nn
    f_n = cohomology.solve(rhs, state.cert)

    z = 1j * state.scale.ratio
    if rhs.modes or f_n.modes:
        bracket = _bracket(f_n, rhs, state.scale.hbar)
        series = ad_series(
            f_n, bracket, z, state.scale.hbar,
            lambda j: 1.0 / (math.factorial(j) * (j + 2)),
            tol=min(tol, 1e-14),
        )
        v_next = (z * series).prune()
    else:
        v_next = ModeSymbol(state.v.d, state.v.dxi)

    new_norm = v_next.norm(s, sched.rho_n(n + 1))
    ratio = new_norm / v_norm if v_norm > 0 else 0.0
    alpha = state.constants.alpha
    if v_norm > 0 and new_norm > alpha * v_norm:
        raise ContractionFailureError(n, v_norm, new_norm, alpha)

    f_norm = f_n.norm(s, rho_n - sigma_n)
    f_bound = state.constants.beta * alpha ** ((n - 1) / 2.0) / 2.0
    r_norm = r_n.norm(s, 0.0)
    r_bound = alpha ** (n - 1) / (1.0 - state.constants.lam) * state.v1_norm
    record = StepRecord(
        n=n, v_norm=v_norm, f_norm=f_norm, r_norm=r_norm,
        e_norm=e_nn.norm(s, rho_n), ratio=ratio, rho_n=rho_n, sigma_n=sigma_n,
        fixed_point_iters=fp_iters,
        f_bound=f_bound, f_bound_ok=f_norm <= f_bound * (1 + 1e-12),
        r_bound=r_bound, r_bound_ok=r_norm <= r_bound * (1 + 1e-12),
    )
    return KamState(
        n=n + 1, v=v_next, f_list=state.f_list + [f_n], r_list=state.r_list + [r_n],
        records=state.records + [record], params=state.params, scale=state.scale,
        cert=state.cert, constants=state.constants, schedule=state.schedule,
        v1_norm=state.v1_norm,
    )


def _bracket(f, b, hbar):
    from .symbols import moyal_commutator

    return moyal_commutator(f, b, hbar)


def run(V, cert, params, scale, n_max=12, tol=None, require_small=False):
    """Renormalize V: returns (R_total, final state).

    Iterates `step` until the remainder norm drops below ``tol`` (default
    1e-12 times the initial size) or ``n_max`` steps were taken.  Asserts the
    total-counterterm bound |R_total| <= 2|V|.
    """
    if require_small and not smallness_check(V, params, cert, scale):
        raise ValueError("perturbation exceeds the certified smallness threshold")
    state = KamState.initial(V, cert, params, scale)
    stop = (1e-12 if tol is None else tol) * max(V.norm00(), 1e-300)
    for _ in range(n_max):
        if state.v.norm00() < stop:
            break
        state = step(state)
    r_total = state.r_total()
    r_norm = r_total.norm(params.s, 0.0)
    v_norm = V.norm(params.s, params.rho)
    if r_norm > 2.0 * v_norm * (1 + 1e-12):
        raise ArithmeticError(
            f"total counterterm bound violated: {r_norm:.6e} > 2*{v_norm:.6e}"
        )
    return r_total, state


# ----------------------------------------------------------------------
# matrix-level assembly and verification
# ----------------------------------------------------------------------


def assemble_unitary(f_list, scale, n_trunc, d=None, unitarity_tol=1e-8, margin=None):
    """Matrix product of the flow exponentials, latest generator leftmost."""
    if d is None:
        if not f_list:
            raise ValueError("need the dimension when the generator list is empty")
        d = f_list[0].d
    size = (2 * n_trunc + 1) ** d
    total = np.eye(size, dtype=complex)
    coupling = 1j * scale.ratio
    for f in f_list:
        op = weyl_matrix(f, scale.hbar, n_trunc)
        u = scipy.linalg.expm(coupling * op.mat)
        total = u @ total
    out = TorusOperator(n_trunc=n_trunc, d=d, hbar=scale.hbar, mat=total)
    check_margin = n_trunc // 2 if margin is None else margin
    idx = out.interior_indices(check_margin)
    gram = total[idx, :] @ total[idx, :].conj().T
    defect = float(np.max(np.abs(gram - np.eye(len(idx)))))
    if defect > unitarity_tol:
        raise TruncationTooSmallError(
            f"unitarity defect {defect:.3e} on the interior block; enlarge the truncation"
        )
    return out


def renormalized_operator(V, r_total, cert, scale, n_trunc):
    """Matrix of the renormalized operator: transport + eps * Op(V - R)."""
    l_op = transport_matrix(cert.omega, scale.hbar, n_trunc)
    pert = weyl_matrix(V - r_total, scale.hbar, n_trunc)
    mat = l_op.mat + scale.eps * pert.mat
    return TorusOperator(n_trunc=n_trunc, d=l_op.d, hbar=scale.hbar, mat=mat)


def conjugation_residuals(V, r_total, f_list, cert, scale, n_trunc, margin):
    """Interior-block distance of the conjugated operator from the transport
    operator after applying 1, 2, ..., len(f_list) unitaries."""
    q_op = renormalized_operator(V, r_total, cert, scale, n_trunc)
    l_op = transport_matrix(cert.omega, scale.hbar, n_trunc)
    idx = q_op.interior_indices(margin)
    coupling = 1j * scale.ratio
    current = q_op.mat
    out = []
    for f in f_list:
        u = scipy.linalg.expm(coupling * weyl_matrix(f, scale.hbar, n_trunc).mat)
        current = u @ current @ u.conj().T
        diff = current[np.ix_(idx, idx)] - l_op.mat[np.ix_(idx, idx)]
        out.append(operator_norm(diff))
    return out
