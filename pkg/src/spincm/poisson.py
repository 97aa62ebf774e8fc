"""Lie-Poisson brackets and Hamiltonian vector fields, evaluated at points.

Functions on a trivialised bundle carry three slots: a base Cartan point, a
second Cartan slot (either the momentum-map slot or the momenta) and an
algebra-valued slot.  They are represented by ``SmoothFunction3``, which
bundles an evaluator with analytic partial derivatives in each slot.  Four
bracket structures are provided:

* ``bracket_agamma``  -- the six-term dynamical bracket driven by R(q) and dR,
  with Hamiltonian vector field ``ham_vf_agamma``;
* ``bracket_product`` -- the product bracket on the dual of the trivial
  algebroid: canonical pair plus full spin term;
* ``bracket_sstar``   -- the semi-direct product bracket of the spin Toda
  phase space, with vector field ``ham_vf_sstar``;
* ``bracket_bold_a``  -- the constant-r-matrix bracket, target of the spin
  Toda realization map ``bold_rho`` / ``pullback_bold_rho``.

All identifications use ad* = -ad and iota* = Cartan projection; the second
slot of an ``agamma`` point is the momentum-map value lambda.
"""

from __future__ import annotations

import numpy as np

from . import dynr
from .dynr import RFamily, const_r_apply, dr_apply, r_apply
from .liealg import (GElement, LieAlgebraData, bracket, from_matrix, gelement,
                     pairing, project_h)

Point3 = tuple  # (ndarray, ndarray, GElement)


class SmoothFunction3:
    """Scalar function of (cartan, cartan, algebra) with analytic partials.

    ``d1``/``d2`` return Cartan coordinate vectors, ``d`` returns the gradient
    in the algebra-valued slot with respect to the invariant form.  Instances
    compose under ``+`` and ``*`` (scalars and other functions).
    """

    def __init__(self, algebra: LieAlgebraData, eval_fn, d1_fn, d2_fn, d_fn):
        self.algebra = algebra
        self._eval = eval_fn
        self._d1 = d1_fn
        self._d2 = d2_fn
        self._d = d_fn

    def eval(self, pt: Point3) -> float:
        return float(self._eval(*pt))

    def d1(self, pt: Point3) -> np.ndarray:
        return self._d1(*pt)

    def d2(self, pt: Point3) -> np.ndarray:
        return self._d2(*pt)

    def d(self, pt: Point3) -> GElement:
        return self._d(*pt)

    def __add__(self, other):
        if np.isscalar(other):
            return SmoothFunction3(self.algebra,
                                   lambda a, b, x: self._eval(a, b, x) + other,
                                   self._d1, self._d2, self._d)
        return SmoothFunction3(
            self.algebra,
            lambda a, b, x: self._eval(a, b, x) + other._eval(a, b, x),
            lambda a, b, x: self._d1(a, b, x) + other._d1(a, b, x),
            lambda a, b, x: self._d2(a, b, x) + other._d2(a, b, x),
            lambda a, b, x: self._d(a, b, x) + other._d(a, b, x),
        )

    __radd__ = __add__

    def __mul__(self, other):
        if np.isscalar(other):
            c = float(other)
            return SmoothFunction3(self.algebra,
                                   lambda a, b, x: c * self._eval(a, b, x),
                                   lambda a, b, x: c * self._d1(a, b, x),
                                   lambda a, b, x: c * self._d2(a, b, x),
                                   lambda a, b, x: c * self._d(a, b, x))
        f, g = self, other
        return SmoothFunction3(
            self.algebra,
            lambda a, b, x: f._eval(a, b, x) * g._eval(a, b, x),
            lambda a, b, x: f._eval(a, b, x) * g._d1(a, b, x) + g._eval(a, b, x) * f._d1(a, b, x),
            lambda a, b, x: f._eval(a, b, x) * g._d2(a, b, x) + g._eval(a, b, x) * f._d2(a, b, x),
            lambda a, b, x: f._eval(a, b, x) * g._d(a, b, x) + g._eval(a, b, x) * f._d(a, b, x),
        )

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (-1.0) * other


# ----------------------------------------------------------------------
# building blocks for test/verify functions
# ----------------------------------------------------------------------

def fn_constant(alg: LieAlgebraData, c: float) -> SmoothFunction3:
    zero_h = lambda a, b, x: np.zeros(alg.rank)
    return SmoothFunction3(alg, lambda a, b, x: c, zero_h, zero_h,
                           lambda a, b, x: gelement(alg))


def fn_coord1(alg: LieAlgebraData, c) -> SmoothFunction3:
    c = np.asarray(c, dtype=float)
    return SmoothFunction3(alg, lambda a, b, x: c @ a,
                           lambda a, b, x: c.copy(),
                           lambda a, b, x: np.zeros(alg.rank),
                           lambda a, b, x: gelement(alg))


def fn_coord2(alg: LieAlgebraData, c) -> SmoothFunction3:
    c = np.asarray(c, dtype=float)
    return SmoothFunction3(alg, lambda a, b, x: c @ b,
                           lambda a, b, x: np.zeros(alg.rank),
                           lambda a, b, x: c.copy(),
                           lambda a, b, x: gelement(alg))


def fn_pair3(alg: LieAlgebraData, v: GElement) -> SmoothFunction3:
    """Linear function (v, X) of the algebra slot."""
    return SmoothFunction3(alg, lambda a, b, x: pairing(v, x),
                           lambda a, b, x: np.zeros(alg.rank),
                           lambda a, b, x: np.zeros(alg.rank),
                           lambda a, b, x: v.copy())


def fn_quad3(alg: LieAlgebraData) -> SmoothFunction3:
    """(1/2)(X, X); its gradient is X itself."""
    return SmoothFunction3(alg, lambda a, b, x: 0.5 * pairing(x, x),
                           lambda a, b, x: np.zeros(alg.rank),
                           lambda a, b, x: np.zeros(alg.rank),
                           lambda a, b, x: x.copy())


def fn_trace_power(alg: LieAlgebraData, k: int) -> SmoothFunction3:
    """Ad-invariant function (1/k) tr(X^k) of the algebra slot."""
    def ev(a, b, x):
        return np.trace(np.linalg.matrix_power(x.to_matrix(), k)) / k

    def grad(a, b, x):
        m = np.linalg.matrix_power(x.to_matrix(), k - 1)
        m = m - np.trace(m) / alg.n * np.eye(alg.n)
        return from_matrix(alg, m)

    zero_h = lambda a, b, x: np.zeros(alg.rank)
    return SmoothFunction3(alg, ev, zero_h, zero_h, grad)


def fn_random_poly(alg: LieAlgebraData, rng: np.random.Generator) -> SmoothFunction3:
    """Random low-degree polynomial in all three slots with analytic partials."""
    from .liealg import random_gelement
    f = fn_constant(alg, rng.standard_normal())
    f = f + fn_coord1(alg, rng.standard_normal(alg.rank))
    f = f + fn_coord2(alg, rng.standard_normal(alg.rank))
    f = f + fn_pair3(alg, random_gelement(alg, rng))
    f = f + fn_coord1(alg, rng.standard_normal(alg.rank)) * fn_coord2(alg, rng.standard_normal(alg.rank))
    f = f + fn_coord2(alg, rng.standard_normal(alg.rank)) * fn_pair3(alg, random_gelement(alg, rng))
    f = f + rng.standard_normal() * fn_quad3(alg)
    return f


def point_shift(pt: Point3, tangent, h: float) -> Point3:
    a, b, x = pt
    ta, tb, tx = tangent
    return (a + h * ta, b + h * tb, x + h * tx)


def fd_partials(f: SmoothFunction3, pt: Point3, h: float = 1e-6):
    """Central finite-difference partials of ``f`` in all three slots."""
    alg = f.algebra
    a, b, x = pt
    d1 = np.zeros(alg.rank)
    d2 = np.zeros(alg.rank)
    for k in range(alg.rank):
        e = np.eye(alg.rank)[k]
        d1[k] = (f.eval((a + h * e, b, x)) - f.eval((a - h * e, b, x))) / (2 * h)
        d2[k] = (f.eval((a, b + h * e, x)) - f.eval((a, b - h * e, x))) / (2 * h)
    g = gelement(alg)
    for k in range(alg.rank):
        dx = gelement(alg, np.eye(alg.rank)[k])
        g.h[k] = (f.eval((a, b, x + h * dx)) - f.eval((a, b, x - h * dx))) / (2 * h)
    for i in range(alg.num_roots):
        dx = gelement(alg)
        dx.r[i] = 1.0
        # perturbing the e_a coefficient probes the e_{-a} gradient coefficient
        g.r[alg.neg[i]] = (f.eval((a, b, x + h * dx)) - f.eval((a, b, x - h * dx))) / (2 * h)
    return d1, d2, g


def fn_from_eval(alg: LieAlgebraData, ev, h: float = 2e-6) -> SmoothFunction3:
    """Wrap a scalar point-function with finite-difference partials.

    Used where a bracket value itself becomes the argument of an outer
    bracket (nested Jacobi checks); accuracy is O(h^2) per slot, with the
    default step balancing truncation against roundoff for O(100)-sized
    bracket values.
    """
    def make(slot):
        def fn(a, b, x):
            return fd_partials(SmoothFunction3(alg, lambda *pt: ev(pt), None, None, None),
                               (a, b, x), h)[slot]
        return fn

    return SmoothFunction3(alg, lambda a, b, x: ev((a, b, x)),
                           make(0), make(1), make(2))


def check_partials(f: SmoothFunction3, pt: Point3, tol: float = 1e-7) -> float:
    """Self-check: worst absolute deviation of analytic partials from FD."""
    d1, d2, g = fd_partials(f, pt)
    worst = max(np.max(np.abs(d1 - f.d1(pt)), initial=0.0),
                np.max(np.abs(d2 - f.d2(pt)), initial=0.0),
                (g - f.d(pt)).norm())
    if worst > tol:
        raise AssertionError(f"analytic partials deviate from finite differences by {worst:.3e}")
    return worst


# ----------------------------------------------------------------------
# bracket structures
# ----------------------------------------------------------------------

def bracket_agamma(r: RFamily, f: SmoothFunction3, g: SmoothFunction3, pt: Point3) -> float:
    """Dynamical Lie-Poisson bracket at (q, lambda, X)."""
    q, lam, x = pt
    d1f, d2f, df = f.d1(pt), f.d2(pt), f.d(pt)
    d1g, d2g, dg = g.d1(pt), g.d2(pt), g.d(pt)
    rdf = r_apply(r, q, df)
    rdg = r_apply(r, q, dg)
    out = pairing(dr_apply(r, q, lam, df), dg)
    out += pairing(x, bracket(rdf - gelement(r.algebra, d2f), dg)
                   - bracket(rdg - gelement(r.algebra, d2g), df))
    out += float(d1g @ df.h) - float(d1f @ dg.h)
    return out


def ham_vf_agamma(r: RFamily, f: SmoothFunction3, pt: Point3):
    """Hamiltonian vector field of the dynamical bracket: (qdot, lamdot, Xdot)."""
    q, lam, x = pt
    d1f, d2f, df = f.d1(pt), f.d2(pt), f.d(pt)
    qdot = df.h.copy()
    lamdot = -project_h(bracket(x, df)).h
    xdot = bracket(x, r_apply(r, q, df) - gelement(r.algebra, d2f))
    xdot = xdot + dr_apply(r, q, lam, df) - gelement(r.algebra, d1f)
    xdot = xdot - r_apply(r, q, bracket(x, df))
    return qdot, lamdot, xdot


def invariant_bracket(r: RFamily, f1: SmoothFunction3, f2: SmoothFunction3, pt: Point3) -> float:
    """Bracket of two pulled-back invariant functions: (dR(q)(lambda) df1, df2)."""
    q, lam, _ = pt
    return pairing(dr_apply(r, q, lam, f1.d(pt)), f2.d(pt))


def directional_derivative(g: SmoothFunction3, pt: Point3, tangent) -> float:
    """Pairing of dg with a tangent triple (Cartan, Cartan, algebra)."""
    ta, tb, tx = tangent
    return float(g.d1(pt) @ ta + g.d2(pt) @ tb) + pairing(g.d(pt), tx)


def fd_directional(g: SmoothFunction3, pt: Point3, tangent, h: float = 1e-6) -> float:
    """Finite-difference derivative of g along a tangent triple (oracle)."""
    return (g.eval(point_shift(pt, tangent, h)) - g.eval(point_shift(pt, tangent, -h))) / (2 * h)


def bracket_product(f: SmoothFunction3, g: SmoothFunction3, pt: Point3) -> float:
    """Product bracket on the dual of the trivial algebroid at (q, p, xi)."""
    _, _, xi = pt
    return (float(f.d2(pt) @ g.d1(pt)) - float(f.d1(pt) @ g.d2(pt))
            + pairing(xi, bracket(f.d(pt), g.d(pt))))


def ham_vf_product(f: SmoothFunction3, pt: Point3):
    _, _, xi = pt
    return f.d2(pt), -f.d1(pt), bracket(xi, f.d(pt))


def bracket_sstar(f: SmoothFunction3, g: SmoothFunction3, pt: Point3) -> float:
    """Semi-direct product bracket at (x, p, eta)."""
    _, _, eta = pt
    df, dg = f.d(pt), g.d(pt)
    alg = f.algebra
    spin = bracket(project_h(df), gelement(alg, None, dg.r)) \
        + bracket(gelement(alg, None, df.r), project_h(dg))
    return (float(g.d1(pt) @ f.d2(pt)) - float(f.d1(pt) @ g.d2(pt))
            + pairing(eta, spin))


def ham_vf_sstar(f: SmoothFunction3, pt: Point3):
    """Vector field of the semi-direct bracket: xdot, pdot, etadot."""
    _, _, eta = pt
    df = f.d(pt)
    etadot = bracket(eta, project_h(df)) + project_h(bracket(eta, df))
    return f.d2(pt), -f.d1(pt), etadot


def bracket_bold_a(f: SmoothFunction3, g: SmoothFunction3, pt: Point3) -> float:
    """Constant-r-matrix Lie-Poisson bracket at (x, p, eta)."""
    _, _, eta = pt
    alg = f.algebra
    df, dg = f.d(pt), g.d(pt)
    term = bracket(const_r_apply(alg, df) - gelement(alg, f.d2(pt)), dg) \
        + bracket(df, const_r_apply(alg, dg) - gelement(alg, g.d2(pt)))
    return (pairing(eta, term)
            + float(g.d1(pt) @ df.h) - float(f.d1(pt) @ dg.h))


def bold_rho(alg: LieAlgebraData, pi_prime, pt: Point3) -> Point3:
    """Realization map of the spin Toda phase space: (x, p, eta) -> (x, -Pi_h eta, L)."""
    from .models import TodaState, toda_lax_pair
    x, p, eta = pt
    lax, _ = toda_lax_pair(alg, TodaState(x, p, eta), pi_prime)
    return (x.copy(), -eta.h.copy(), lax)


def pullback_bold_rho(alg: LieAlgebraData, pi_prime, f: SmoothFunction3) -> SmoothFunction3:
    """Pull a function on the constant-r-matrix dual back along the realization map.

    The chain-rule partials are assembled in closed form; they are validated
    against finite differences in the tests.
    """
    pi = sorted(set(int(i) for i in pi_prime))
    simple = alg.simple_idx
    pi_idx = np.array([simple[i - 1] for i in pi], dtype=int)

    def at(ptup):
        return bold_rho(alg, pi, ptup)

    def ev(x, p, eta):
        return f.eval(at((x, p, eta)))

    def d1(x, p, eta):
        rho_pt = at((x, p, eta))
        df = f.d(rho_pt)
        out = f.d1(rho_pt).copy()
        for i in pi_idx:
            av = float(alg.coroot_h[i] @ x)
            out = out + np.exp(-av) * eta.r[alg.neg[i]] * df.r[i] * alg.coroot_h[i]
        return out

    def d2(x, p, eta):
        return f.d(at((x, p, eta))).h.copy()

    def d(x, p, eta):
        rho_pt = at((x, p, eta))
        df = f.d(rho_pt)
        out = gelement(alg, 0.5 * df.h - f.d2(rho_pt))
        for i in simple:
            out.r[alg.neg[i]] += df.r[alg.neg[i]]
        for i in pi_idx:
            av = float(alg.coroot_h[i] @ x)
            out.r[i] -= np.exp(-av) * df.r[i]
        return out

    return SmoothFunction3(alg, ev, d1, d2, d)
