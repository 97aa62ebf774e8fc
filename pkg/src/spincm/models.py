"""Spin Calogero-Moser family, reduced models, and spin Toda lattices.

State containers, Hamiltonians, equations of motion, (quasi-)Lax operators,
the torus chart used for reduction, and the scaling map connecting the
hyperbolic family to the Toda lattices.  Everything here is a pure function
of the state; time stepping lives in ``numint`` and the exact solvers in
``factor``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import poisson
from .dynr import RFamily, dr_apply, r_apply, r_pm_apply
from .errors import OutOfChartError, PreconditionError
from .liealg import (GElement, LieAlgebraData, ad_torus, bracket, gelement,
                     project_h, weyl_vector_w)


@dataclass
class SpinCMState:
    q: np.ndarray
    p: np.ndarray
    xi: GElement

    def copy(self):
        return SpinCMState(self.q.copy(), self.p.copy(), self.xi.copy())


@dataclass
class ReducedState:
    q: np.ndarray
    p: np.ndarray
    s: GElement

    def copy(self):
        return ReducedState(self.q.copy(), self.p.copy(), self.s.copy())


@dataclass
class TodaState:
    x: np.ndarray
    p: np.ndarray
    eta: GElement

    def copy(self):
        return TodaState(self.x.copy(), self.p.copy(), self.eta.copy())


@dataclass
class ReducedTodaState:
    x: np.ndarray
    p: np.ndarray

    def copy(self):
        return ReducedTodaState(self.x.copy(), self.p.copy())


@dataclass
class Trajectory:
    """Time-stamped states plus monitored invariants.

    ``status`` is ``complete`` or ``truncated``; a truncated run carries the
    first failing time in ``horizon`` and the reason in ``failure``.
    """

    times: np.ndarray
    states: list
    monitors: dict = field(default_factory=dict)
    status: str = "complete"
    horizon: float | None = None
    failure: str | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise PreconditionError("times and states must have equal length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise PreconditionError("times must be strictly increasing")


# ----------------------------------------------------------------------
# hyperbolic spin Calogero-Moser family
# ----------------------------------------------------------------------

def _span_inv_sinh2(r: RFamily, q: np.ndarray) -> np.ndarray:
    """1/sinh^2((1/2) a(q)) on the span roots, zero elsewhere."""
    av = r.check_domain(q)
    out = np.zeros(r.algebra.num_roots)
    out[r.in_span] = 1.0 / np.sinh(0.5 * av[r.in_span]) ** 2
    return out


def spin_cm_hamiltonian(r: RFamily, st: SpinCMState, variant: str = "plus") -> float:
    sign = {"plus": 1.0, "minus": -1.0}[variant]
    inv = _span_inv_sinh2(r, st.q)
    alg = r.algebra
    pot = -0.125 * float(np.sum(st.xi.r * st.xi.r[alg.neg] * inv))
    return float(0.5 * st.p @ st.p + 0.125 * st.xi.h @ st.xi.h
                 + sign * 0.5 * st.p @ st.xi.h) + pot


def lax_L(r: RFamily, st: SpinCMState, variant: str = "plus") -> GElement:
    """Lax operator of the family; the mirror variant swaps the shift sign."""
    sign = {"plus": -1, "minus": +1}[variant]
    return gelement(r.algebra, st.p) - r_pm_apply(r, sign, st.q, st.xi)


def spin_cm_eom_rhs(r: RFamily, st: SpinCMState):
    """Right-hand side (qdot, pdot, xidot) of the spin Calogero-Moser flow."""
    alg = r.algebra
    inv = _span_inv_sinh2(r, st.q)
    av = alg.alpha_values(st.q)
    qdot = st.p + 0.5 * st.xi.h
    weight = np.zeros(alg.num_roots)
    weight[r.in_span] = (1.0 / np.tanh(0.5 * av[r.in_span])) * inv[r.in_span]
    pdot = -0.125 * alg.coroot_h.T @ (weight * st.xi.r * st.xi.r[alg.neg])
    xidot = bracket(st.xi, r_pm_apply(r, +1, st.q, lax_L(r, st)))
    return qdot, pdot, xidot


def quasi_lax_residual(r: RFamily, st: SpinCMState) -> GElement:
    """Chain-rule d/dt of L along the flow, minus its quasi-Lax form."""
    qdot, pdot, xidot = spin_cm_eom_rhs(r, st)
    lax = lax_L(r, st)
    dldt = gelement(r.algebra, pdot) - dr_apply(r, st.q, qdot, st.xi) \
        - r_pm_apply(r, -1, st.q, xidot)
    target = bracket(lax, r_apply(r, st.q, lax)) - dr_apply(r, st.q, st.xi.h, lax)
    return dldt - target


def momentum_J(st: SpinCMState) -> np.ndarray:
    return -st.xi.h.copy()


def spin_cm_hamiltonian_function(r: RFamily) -> poisson.SmoothFunction3:
    """The family Hamiltonian as a SmoothFunction3 on (q, p, xi) points."""
    alg = r.algebra

    def ev(q, p, xi):
        return spin_cm_hamiltonian(r, SpinCMState(q, p, xi))

    def d1(q, p, xi):
        av = alg.alpha_values(q)
        inv = _span_inv_sinh2(r, q)
        weight = np.zeros(alg.num_roots)
        weight[r.in_span] = (1.0 / np.tanh(0.5 * av[r.in_span])) * inv[r.in_span]
        return 0.125 * alg.coroot_h.T @ (weight * xi.r * xi.r[alg.neg])

    def d2(q, p, xi):
        return p + 0.5 * xi.h

    def d(q, p, xi):
        inv = _span_inv_sinh2(r, q)
        out = gelement(alg, 0.25 * xi.h + 0.5 * p)
        out.r = -0.25 * inv * xi.r
        return out

    return poisson.SmoothFunction3(alg, ev, d1, d2, d)


# ----------------------------------------------------------------------
# reduction chart and reduced model
# ----------------------------------------------------------------------

def g_of_xi(algebra: LieAlgebraData, xi: GElement) -> np.ndarray:
    """Log-diagonal entries of the torus element normalising the simple coefficients.

    Requires every simple-root coefficient of xi to be strictly positive (the
    real chart of the logarithm); conjugating by the inverse of the returned
    element rescales each simple coefficient to one.
    """
    simple = algebra.simple_idx
    vals = xi.r[simple]
    if np.any(vals <= 0):
        k = int(np.where(vals <= 0)[0][0])
        raise OutOfChartError(
            f"spin coefficient on simple root {k + 1} is {vals[k]:.3e}; the real "
            "chart requires it to be positive")
    coroots = algebra.coroot_h[simple]
    norms = np.einsum("ij,ij->i", coroots, coroots)
    h_alpha = 2.0 * coroots / norms[:, None]
    log_h = (algebra.cartan_inverse.T @ np.log(vals)) @ h_alpha
    return algebra.h_to_diag(log_h)


def reduce_state(r: RFamily, st: SpinCMState, momentum_tol: float = 1e-10) -> ReducedState:
    """Project a zero-momentum state to the normalised slice."""
    if np.max(np.abs(st.xi.h), initial=0.0) > momentum_tol:
        raise PreconditionError("reduction requires a vanishing Cartan spin component")
    log_g = g_of_xi(r.algebra, st.xi)
    return ReducedState(st.q.copy(), st.p.copy(), ad_torus(r.algebra, -log_g, st.xi))


def reduced_hamiltonian(r: RFamily, st: ReducedState) -> float:
    alg = r.algebra
    inv = _span_inv_sinh2(r, st.q)
    pos = r.in_span & (alg.heights > 0)
    pot = -0.25 * float(np.sum(st.s.r[pos] * st.s.r[alg.neg[pos]] * inv[pos]))
    return float(0.5 * st.p @ st.p) + pot


def _reduced_correction_table(r: RFamily):
    """Per-simple-root index arrays for the Cartan correction sum (cached)."""
    table = getattr(r, "_reduced_corr_table", None)
    if table is not None:
        return table
    alg = r.algebra
    simple = alg.simple_idx
    pi_idx = {simple[i - 1] for i in r.pi_prime}
    table = []
    for j in range(alg.rank):
        aj = alg.roots[simple[j]]
        a_list, k_list, n_list = [], [], []
        for a in np.where(r.in_span)[0]:
            if a in pi_idx:
                continue
            diff = tuple(x - y for x, y in zip(aj, alg.roots[a]))
            k = alg.root_index.get(diff)
            if k is None:
                continue
            a_list.append(a)
            k_list.append(k)
            n_list.append(alg.nmat[a, k])
        table.append((np.array(a_list, dtype=int), np.array(k_list, dtype=int),
                      np.array(n_list)))
    r._reduced_corr_table = table
    return table


def _reduced_m_operator(r: RFamily, st: ReducedState) -> GElement:
    """Generator of the spin motion on the normalised slice.

    The Cartan correction keeps the simple-root coefficients frozen at one;
    its inner sum runs over span roots outside the subset whose difference
    from a simple root is again a root.
    """
    alg = r.algebra
    inv = _span_inv_sinh2(r, st.q)
    m = gelement(alg)
    m.r = -0.25 * inv * st.s.r
    simple = alg.simple_idx
    coroots = alg.coroot_h[simple]
    norms = np.einsum("ij,ij->i", coroots, coroots)
    h_alpha = 2.0 * coroots / norms[:, None]
    corr = np.array([
        float(np.sum(nv * st.s.r[ai] * st.s.r[ki] * inv[ai])) if len(ai) else 0.0
        for ai, ki, nv in _reduced_correction_table(r)
    ])
    m.h += 0.25 * (alg.cartan_inverse.T @ corr) @ h_alpha
    return m


def reduced_eom_rhs(r: RFamily, st: ReducedState):
    alg = r.algebra
    av = alg.alpha_values(st.q)
    inv = _span_inv_sinh2(r, st.q)
    weight = np.zeros(alg.num_roots)
    weight[r.in_span] = (1.0 / np.tanh(0.5 * av[r.in_span])) * inv[r.in_span]
    pdot = -0.125 * alg.coroot_h.T @ (weight * st.s.r * st.s.r[alg.neg])
    sdot = bracket(st.s, _reduced_m_operator(r, st))
    return st.p.copy(), pdot, sdot


# ----------------------------------------------------------------------
# spin Toda lattices
# ----------------------------------------------------------------------

def _pi_indices(algebra: LieAlgebraData, pi_prime) -> np.ndarray:
    pi = sorted(set(int(i) for i in pi_prime))
    if not set(pi) <= set(range(1, algebra.rank + 1)):
        raise PreconditionError(f"pi_prime {pi} not a subset of 1..{algebra.rank}")
    return np.array([algebra.simple_idx[i - 1] for i in pi], dtype=int)


def toda_hamiltonian(algebra: LieAlgebraData, st: TodaState, pi_prime) -> float:
    idx = _pi_indices(algebra, pi_prime)
    av = algebra.alpha_values(st.x)
    pot = -float(np.sum(st.eta.r[idx] * st.eta.r[algebra.neg[idx]] * np.exp(-av[idx])))
    return float(0.5 * st.p @ st.p + 0.125 * st.eta.h @ st.eta.h
                 + 0.5 * st.p @ st.eta.h) + pot


def toda_eom_rhs(algebra: LieAlgebraData, st: TodaState, pi_prime):
    idx = _pi_indices(algebra, pi_prime)
    av = algebra.alpha_values(st.x)
    xdot = st.p + 0.5 * st.eta.h
    w = np.exp(-av[idx]) * st.eta.r[idx] * st.eta.r[algebra.neg[idx]]
    pdot = -algebra.coroot_h[idx].T @ w
    etadot = bracket(st.eta, gelement(algebra, 0.25 * st.eta.h + 0.5 * st.p))
    return xdot, pdot, etadot


def toda_lax_pair(algebra: LieAlgebraData, st: TodaState, pi_prime):
    """Constant-r-matrix Lax pair of the spin Toda lattice."""
    idx = _pi_indices(algebra, pi_prime)
    av = algebra.alpha_values(st.x)
    lax = gelement(algebra, st.p + 0.5 * st.eta.h)
    simple = algebra.simple_idx
    lax.r[simple] = st.eta.r[simple]
    lax.r[algebra.neg[idx]] = -np.exp(-av[idx]) * st.eta.r[algebra.neg[idx]]
    m = gelement(algebra)
    m.r[simple] = -0.5 * st.eta.r[simple]
    m.r[algebra.neg[idx]] = -0.5 * np.exp(-av[idx]) * st.eta.r[algebra.neg[idx]]
    return lax, m


def toda_lax_residual(algebra: LieAlgebraData, st: TodaState, pi_prime) -> GElement:
    """Chain-rule d/dt of the Toda Lax operator minus [L, M]."""
    idx = _pi_indices(algebra, pi_prime)
    xdot, pdot, etadot = toda_eom_rhs(algebra, st, pi_prime)
    av = algebra.alpha_values(st.x)
    av_dot = algebra.coroot_h @ xdot
    dldt = gelement(algebra, pdot + 0.5 * etadot.h)
    simple = algebra.simple_idx
    dldt.r[simple] = etadot.r[simple]
    neg = algebra.neg[idx]
    dldt.r[neg] = -np.exp(-av[idx]) * (etadot.r[neg] - av_dot[idx] * st.eta.r[neg])
    lax, m = toda_lax_pair(algebra, st, pi_prime)
    return dldt - bracket(lax, m)


def toda_hamiltonian_function(algebra: LieAlgebraData, pi_prime) -> poisson.SmoothFunction3:
    """The spin Toda Hamiltonian as a SmoothFunction3 on (x, p, eta) points."""
    idx = _pi_indices(algebra, pi_prime)

    def ev(x, p, eta):
        return toda_hamiltonian(algebra, TodaState(x, p, eta), pi_prime)

    def d1(x, p, eta):
        av = algebra.alpha_values(x)
        w = np.exp(-av[idx]) * eta.r[idx] * eta.r[algebra.neg[idx]]
        return algebra.coroot_h[idx].T @ w

    def d2(x, p, eta):
        return p + 0.5 * eta.h

    def d(x, p, eta):
        av = algebra.alpha_values(x)
        out = gelement(algebra, 0.25 * eta.h + 0.5 * p)
        out.r[idx] = -np.exp(-av[idx]) * eta.r[idx]
        out.r[algebra.neg[idx]] = -np.exp(-av[idx]) * eta.r[algebra.neg[idx]]
        return out

    return poisson.SmoothFunction3(algebra, ev, d1, d2, d)


# ----------------------------------------------------------------------
# scaling map and reduced Toda lattices
# ----------------------------------------------------------------------

def scale_state(algebra: LieAlgebraData, st: TodaState, tau: float) -> SpinCMState:
    """Embed a Toda state into the hyperbolic family at scale parameter tau."""
    if tau < 0:
        raise PreconditionError("tau must be nonnegative")
    w = weyl_vector_w(algebra)
    xi = gelement(algebra, st.eta.h, np.exp(tau) * st.eta.r)
    return SpinCMState(st.x + 2.0 * tau * w, st.p.copy(), xi)


def gauged_lax(algebra: LieAlgebraData, r: RFamily, st: TodaState, tau: float) -> GElement:
    """Lax operator of the scaled state, conjugated back by the torus of tau*w."""
    scaled = scale_state(algebra, st, tau)
    lax = lax_L(r, scaled)
    w = weyl_vector_w(algebra)
    return ad_torus(algebra, algebra.h_to_diag(-tau * w), lax)


def _constants_array(algebra: LieAlgebraData, constants: dict, pi_prime) -> np.ndarray:
    c = np.zeros(algebra.rank)
    pi = sorted(set(int(i) for i in pi_prime))
    for i in pi:
        c[i - 1] = float(constants.get(i, constants.get(str(i), 0.0)))
    return c


def reduced_toda_hamiltonian(algebra: LieAlgebraData, st: ReducedTodaState,
                             constants: dict, pi_prime) -> float:
    idx = _pi_indices(algebra, pi_prime)
    c = _constants_array(algebra, constants, pi_prime)
    av = algebra.alpha_values(st.x)
    keys = np.array(sorted(set(int(i) for i in pi_prime)), dtype=int) - 1
    return float(0.5 * st.p @ st.p - np.sum(c[keys] * np.exp(-av[idx])))


def reduced_toda_rhs(algebra: LieAlgebraData, st: ReducedTodaState, constants: dict, pi_prime):
    idx = _pi_indices(algebra, pi_prime)
    c = _constants_array(algebra, constants, pi_prime)
    keys = np.array(sorted(set(int(i) for i in pi_prime)), dtype=int) - 1
    av = algebra.alpha_values(st.x)
    pdot = -algebra.coroot_h[idx].T @ (c[keys] * np.exp(-av[idx]))
    return st.p.copy(), pdot


def lift_reduced_toda(algebra: LieAlgebraData, constants: dict, pi_prime) -> GElement:
    """Spin supported on +-pi_prime whose products reproduce the coupling constants."""
    eta = gelement(algebra)
    for i in sorted(set(int(k) for k in pi_prime)):
        c = float(constants.get(i, constants.get(str(i), 0.0)))
        root = algebra.simple_idx[i - 1]
        s = np.sqrt(abs(c))
        eta.r[root] = s
        eta.r[algebra.neg[root]] = np.copysign(s, c) if c != 0 else 0.0
    return eta


# ----------------------------------------------------------------------
# packed flows for the integrator
# ----------------------------------------------------------------------

@dataclass
class FlowSystem:
    """Flat-vector view of a flow for the fixed-step integrator."""

    name: str
    dim: int
    pack: Callable
    unpack: Callable
    rhs: Callable  # flat vector -> flat vector


def spin_cm_flow(r: RFamily) -> FlowSystem:
    alg = r.algebra
    nr, nh = alg.num_roots, alg.rank

    def pack(st: SpinCMState):
        return np.concatenate([st.q, st.p, st.xi.h, st.xi.r])

    def unpack(y):
        return SpinCMState(y[:nh], y[nh:2 * nh],
                           gelement(alg, y[2 * nh:3 * nh], y[3 * nh:]))

    def rhs(y):
        qd, pd, xd = spin_cm_eom_rhs(r, unpack(y))
        return np.concatenate([qd, pd, xd.h, xd.r])

    return FlowSystem("spin-cm", 3 * nh + nr, pack, unpack, rhs)


def reduced_cm_flow(r: RFamily) -> FlowSystem:
    alg = r.algebra
    nr, nh = alg.num_roots, alg.rank

    def pack(st: ReducedState):
        return np.concatenate([st.q, st.p, st.s.r])

    def unpack(y):
        return ReducedState(y[:nh], y[nh:2 * nh], gelement(alg, None, y[2 * nh:]))

    def rhs(y):
        qd, pd, sd = reduced_eom_rhs(r, unpack(y))
        return np.concatenate([qd, pd, sd.r])

    return FlowSystem("reduced-cm", 2 * nh + nr, pack, unpack, rhs)


def toda_flow(algebra: LieAlgebraData, pi_prime) -> FlowSystem:
    nr, nh = algebra.num_roots, algebra.rank

    def pack(st: TodaState):
        return np.concatenate([st.x, st.p, st.eta.h, st.eta.r])

    def unpack(y):
        return TodaState(y[:nh], y[nh:2 * nh],
                         gelement(algebra, y[2 * nh:3 * nh], y[3 * nh:]))

    def rhs(y):
        xd, pd, ed = toda_eom_rhs(algebra, unpack(y), pi_prime)
        return np.concatenate([xd, pd, ed.h, ed.r])

    return FlowSystem("spin-toda", 3 * nh + nr, pack, unpack, rhs)


def reduced_toda_flow(algebra: LieAlgebraData, constants: dict, pi_prime) -> FlowSystem:
    nh = algebra.rank

    def pack(st: ReducedTodaState):
        return np.concatenate([st.x, st.p])

    def unpack(y):
        return ReducedTodaState(y[:nh], y[nh:])

    def rhs(y):
        xd, pd = reduced_toda_rhs(algebra, unpack(y), constants, pi_prime)
        return np.concatenate([xd, pd])

    return FlowSystem("reduced-toda", 2 * nh, pack, unpack, rhs)
