"""The hyperbolic dynamical r-matrix family and its residual verifiers.

A family instance is parametrised by a subset ``pi_prime`` of the simple
roots.  On the root span of that subset the coefficient function is
(1/2)coth((1/2)a(q)); on the positive/negative complement it is the constant
+-1/2.  The shifts R+- = R +- (1/2)id map into the opposite parabolic
subalgebras, which is what the exact solvers exploit.

The two residual evaluators (modified dynamical Yang-Baxter equation and the
bundle-map bracket identity for constant sections) exist purely to be driven
to zero by the verification suites; they are assembled term by term with the
identifications ad* = -ad and iota* = projection onto the Cartan subalgebra.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainViolationError
from .liealg import GElement, LieAlgebraData, bracket, gelement, project_h


class RFamily:
    """Dynamical r-matrix instance: algebra, simple-root subset, K = (1/2)id."""

    def __init__(self, algebra: LieAlgebraData, pi_prime, k_scale: float = 0.5,
                 pole_tol: float = 1e-8):
        pi = frozenset(int(i) for i in pi_prime)
        if not pi <= set(range(1, algebra.rank + 1)):
            raise DomainViolationError(
                f"pi_prime {sorted(pi)} not a subset of 1..{algebra.rank}")
        self.algebra = algebra
        self.pi_prime = pi
        self.k_scale = float(k_scale)
        self.pole_tol = float(pole_tol)
        # a root lies in <pi_prime> iff its support is contained in pi_prime
        support_ok = np.array([
            all((m == 0) or (k + 1 in pi) for k, m in enumerate(coords))
            for coords in algebra.roots
        ])
        self.in_span = support_ok
        self.comp_sign = np.where(self.in_span, 0, np.sign(algebra.heights)).astype(float)

    def __repr__(self):
        return f"RFamily({self.algebra.series}{self.algebra.rank}, pi_prime={sorted(self.pi_prime)})"

    def check_domain(self, q: np.ndarray) -> np.ndarray:
        """Root values a(q), raising on (near-)poles of coth inside the span."""
        av = self.algebra.alpha_values(q)
        bad = self.in_span & (np.abs(av) < self.pole_tol)
        if np.any(bad):
            i = int(np.where(bad)[0][0])
            raise DomainViolationError(
                f"a(q) = {av[i]:.3e} at root {self.algebra.root_key(i)} is inside the pole guard")
        return av


def phi_all(r: RFamily, q: np.ndarray) -> np.ndarray:
    """Coefficient function of the family on every root at once."""
    av = r.check_domain(q)
    phi = 0.5 * r.comp_sign
    span = r.in_span
    phi[span] = 0.5 / np.tanh(0.5 * av[span])
    return phi


def phi_alpha(r: RFamily, root_index: int, q: np.ndarray) -> float:
    return float(phi_all(r, q)[root_index])


def r_apply(r: RFamily, q: np.ndarray, x: GElement) -> GElement:
    """R(q) x: kills the Cartan part, scales root coefficients by -phi."""
    return gelement(r.algebra, None, -phi_all(r, q) * x.r)


def r_pm_apply(r: RFamily, sign: int, q: np.ndarray, x: GElement) -> GElement:
    """R(q) x +- K x with K = k_scale * identity."""
    return r_apply(r, q, x) + (sign * r.k_scale) * x


def dr_apply(r: RFamily, q: np.ndarray, lam: np.ndarray, x: GElement) -> GElement:
    """Directional derivative of R at q in the Cartan direction lam, applied to x.

    Closed form: only span roots contribute, with coefficient
    (1/4) a(lam) / sinh^2((1/2) a(q)) on e_a.
    """
    av = r.check_domain(q)
    al = r.algebra.alpha_values(lam)
    coeff = np.zeros(r.algebra.num_roots)
    span = r.in_span
    coeff[span] = 0.25 * al[span] / np.sinh(0.5 * av[span]) ** 2
    return gelement(r.algebra, None, coeff * x.r)


def grad_r_pairing(r: RFamily, q: np.ndarray, a: GElement, b: GElement) -> np.ndarray:
    """Cartan gradient of q -> (R(q) a, b), in closed form.

    The pairing of the result with lam equals (dR(q)(lam) a, b); cross-checked
    against finite differences in the tests.
    """
    av = r.check_domain(q)
    span = r.in_span
    weight = np.zeros(r.algebra.num_roots)
    weight[span] = 0.25 * a.r[span] * b.r[r.algebra.neg[span]] / np.sinh(0.5 * av[span]) ** 2
    return r.algebra.coroot_h.T @ weight


def mdybe_residual(r: RFamily, q: np.ndarray, a: GElement, b: GElement,
                   modified: bool = True) -> GElement:
    """LHS minus RHS of the modified dynamical Yang-Baxter equation at (q, a, b).

    With ``modified=False`` the compensating -[Ka, Kb] right side is dropped,
    which leaves a residual bounded away from zero for generic input.
    """
    ra = r_apply(r, q, a)
    rb = r_apply(r, q, b)
    out = bracket(ra, rb)
    out = out + r_apply(r, q, bracket(b, ra) - bracket(a, rb))
    out = out + dr_apply(r, q, a.h, b) - dr_apply(r, q, b.h, a)
    out = out + gelement(r.algebra, grad_r_pairing(r, q, a, b))
    if modified:
        out = out + 0.25 * bracket(a, b)
    return out


def algebroid_identity_residual(r: RFamily, q: np.ndarray, a: GElement, z: np.ndarray,
                                a2: GElement, z2: np.ndarray):
    """Residual pair of the bundle-map bracket identity for constant sections.

    Sections are pairs (a, z) with a in the algebra and z Cartan.  Returns the
    algebra-valued component (already compensated by +[Ka, Ka2]) and the
    Cartan-valued component; both vanish for a valid family.
    """
    alg = r.algebra
    za = gelement(alg, z)
    za2 = gelement(alg, z2)
    ra = r_apply(r, q, a)
    ra2 = r_apply(r, q, a2)
    x1 = ra - za
    x2 = ra2 - za2
    # bracket of the images in the trivial algebroid, for constant (a, z):
    lhs_g = dr_apply(r, q, a.h, a2) - dr_apply(r, q, a2.h, a) + bracket(x1, x2)
    # image of the dual-bundle bracket of the sections
    a_dd = bracket(x1, a2) - bracket(x2, a)
    z_dd = grad_r_pairing(r, q, a, a2)
    rhs_g = r_apply(r, q, a_dd) - gelement(alg, z_dd)
    res_g = lhs_g - rhs_g + (r.k_scale ** 2) * bracket(a, a2)
    res_h = -project_h(a_dd).h
    return res_g, res_h


def const_r_apply(algebra: LieAlgebraData, x: GElement) -> GElement:
    """Constant r-matrix: -1/2 on positive root coefficients, +1/2 on negative."""
    sign = np.where(algebra.heights > 0, -0.5, 0.5)
    return gelement(algebra, None, sign * x.r)
