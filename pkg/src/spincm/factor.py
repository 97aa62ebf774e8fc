"""Exact solvers via group factorization.

The flows generated by the quadratic invariant linearise on the group: the
matrix exponential of the initial Lax operator is factorized per time sample
(parabolic factorization, then a per-block eigenvalue path in the Levi factor
and a torus correction fixed by quadrature for the hyperbolic family; a full
lower/diagonal/upper factorization for the Toda lattices), and the state is
reconstructed by conjugation with the factors.

Solvers truncate at the last valid sample when a factorization leaves its
chart (big-cell boundary, eigenvalue collision, sign change of a torus
factor) and report the failing time on the returned trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .dynr import RFamily, r_pm_apply
from .errors import (AccuracyError, BigCellError, BranchError, OutOfChartError,
                     PathBreakdownError, PatternError, PreconditionError, SpincmError)
from .liealg import GElement, LieAlgebraData, ad_torus, from_matrix, gelement
from .models import (ReducedState, ReducedTodaState, SpinCMState, TodaState,
                     Trajectory, g_of_xi, lax_L, lift_reduced_toda, toda_lax_pair)

# Pade-13 scaling-and-squaring constants
_PADE13_B = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
    33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0,
)
_PADE13_THETA = 5.371920351148152


def mat_exp(m: np.ndarray) -> np.ndarray:
    """Matrix exponential by Pade-13 approximation with scaling and squaring."""
    a = np.asarray(m, dtype=float)
    norm = np.linalg.norm(a, 1)
    s = max(0, int(np.ceil(np.log2(norm / _PADE13_THETA)))) if norm > _PADE13_THETA else 0
    a = a / (2.0 ** s)
    b = _PADE13_B
    ident = np.eye(a.shape[0])
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2) \
        + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


def cartan_log(algebra: LieAlgebraData, diag: np.ndarray, det_tol: float = 1e-10) -> np.ndarray:
    """Cartan coordinates of log(d) for a positive unimodular diagonal."""
    d = np.asarray(diag, dtype=float)
    if np.any(d <= 0):
        raise BranchError(f"diagonal entry {np.min(d):.3e} is not positive; flow left the real chart")
    log_d = np.log(d)
    if abs(np.sum(log_d)) > det_tol:
        raise BranchError(f"diagonal is not unimodular: |log det| = {abs(np.sum(log_d)):.3e}")
    return algebra.diag_to_h(log_d)


# ----------------------------------------------------------------------
# parabolic chart and factorizations
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ParabolicChart:
    """Block structure of the defining representation induced by a simple-root subset.

    Consecutive indices share a block exactly when the simple root between
    them belongs to the subset, so the block-diagonal matrices realise the
    Levi factor and block-triangular ones the parabolic subalgebras.
    """

    algebra: LieAlgebraData
    pi_prime: frozenset
    blocks: tuple
    block_id: np.ndarray

    @property
    def levi_mask(self) -> np.ndarray:
        return self.block_id[:, None] == self.block_id[None, :]

    @property
    def upper_mask(self) -> np.ndarray:
        return self.block_id[:, None] <= self.block_id[None, :]

    @property
    def strict_upper_mask(self) -> np.ndarray:
        return self.block_id[:, None] < self.block_id[None, :]

    def levi_part(self, m: np.ndarray) -> np.ndarray:
        return np.where(self.levi_mask, m, 0.0)


def build_parabolic_chart(algebra: LieAlgebraData, pi_prime) -> ParabolicChart:
    pi = frozenset(int(i) for i in pi_prime)
    if not pi <= set(range(1, algebra.rank + 1)):
        raise PreconditionError(f"pi_prime {sorted(pi)} not a subset of 1..{algebra.rank}")
    blocks = [[0]]
    for i in range(1, algebra.n):
        if i in pi:  # simple root alpha_i ties index i-1 to index i
            blocks[-1].append(i)
        else:
            blocks.append([i])
    block_id = np.empty(algebra.n, dtype=int)
    for b, idxs in enumerate(blocks):
        block_id[idxs] = b
    return ParabolicChart(algebra, pi, tuple(tuple(b) for b in blocks), block_id)


def gauss_full(m: np.ndarray, pivot_tol: float = 1e-12):
    """Factor a unimodular matrix as n_minus * diag(h) * n_plus^{-1}.

    Elimination without pivoting; a vanishing leading principal minor means
    the element left the big cell and raises accordingly.
    """
    a = np.asarray(m, dtype=float).copy()
    n = a.shape[0]
    scale = max(1.0, np.max(np.abs(a)))
    lower = np.eye(n)
    for k in range(n):
        if abs(a[k, k]) < pivot_tol * scale:
            raise BigCellError(f"leading principal minor {k + 1} vanishes")
        lower[k + 1:, k] = a[k + 1:, k] / a[k, k]
        a[k + 1:, k:] -= np.outer(lower[k + 1:, k], a[k, k:])
    h = np.diag(a).copy()
    u_unit = a / h[:, None]
    n_plus = np.linalg.solve(u_unit, np.eye(n))
    return lower, h, n_plus


def gauss_parabolic(m: np.ndarray, chart: ParabolicChart, pattern_tol: float = 1e-9,
                    pivot_tol: float = 1e-12):
    """Factor a block-upper-triangular matrix as g_levi * n_plus^{-1}."""
    m = np.asarray(m, dtype=float)
    scale = max(1.0, np.max(np.abs(m)))
    off = np.max(np.abs(m[~chart.upper_mask]), initial=0.0)
    if off > pattern_tol * scale:
        raise PatternError(f"matrix has {off:.3e} below the block pattern")
    g = chart.levi_part(m)
    for idxs in chart.blocks:
        sub = g[np.ix_(idxs, idxs)]
        if abs(np.linalg.det(sub)) < pivot_tol * scale ** len(idxs):
            raise BigCellError("singular diagonal block in the parabolic factorization")
    n_plus = np.linalg.solve(m, g)
    return g, n_plus


# ----------------------------------------------------------------------
# eigenvalue path in the Levi factor
# ----------------------------------------------------------------------

def _eig_block_step(mblk: np.ndarray, prev: np.ndarray, imag_tol: float,
                    overlap_min: float):
    """One continuation step of the per-block eigendecomposition."""
    vals, vecs = np.linalg.eig(mblk)
    scale = max(1.0, np.max(np.abs(vals.real)))
    if np.max(np.abs(vals.imag)) > imag_tol * scale:
        raise PathBreakdownError("eigenvalues left the real axis")
    vals = vals.real
    vecs = vecs.real
    if np.any(vals <= 0):
        raise PathBreakdownError("eigenvalue crossed zero")
    m = len(vals)
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    overlap = prev.T @ vecs
    best, best_score = None, -np.inf
    for perm in permutations(range(m)):
        score = sum(abs(overlap[i, perm[i]]) for i in range(m))
        if score > best_score:
            best, best_score = perm, score
    order = list(best)
    if min(abs(overlap[i, order[i]]) for i in range(m)) < overlap_min:
        raise PathBreakdownError("eigenvector continuation lost (near-collision)")
    vecs = vecs[:, order]
    vals = vals[order]
    signs = np.sign(np.einsum("ij,ij->j", prev, vecs))
    return vals, vecs * signs


def levi_eig_path(g_path, q0: np.ndarray, chart: ParabolicChart,
                  imag_tol: float = 1e-9, overlap_min: float = 0.6):
    """Continued per-block eigendecomposition of g(t) exp(q0) along a sampled path.

    Returns (x_path, d_path) with x(0) the identity and d(0) = exp(q0).  On a
    breakdown the raised error carries the failing sample index and the valid
    prefix in ``index`` / ``partial`` attributes.
    """
    alg = chart.algebra
    n = alg.n
    e_q0 = np.exp(alg.h_to_diag(q0))
    if np.max(np.abs(np.asarray(g_path[0]) - np.eye(n))) > 1e-9:
        raise PreconditionError("eigenvalue path must start at the identity")
    x_path = [np.eye(n)]
    d_path = [e_q0.copy()]
    prev_blocks = [np.eye(len(idxs)) for idxs in chart.blocks]
    for k in range(1, len(g_path)):
        m = np.asarray(g_path[k]) * e_q0[None, :]
        x_k = np.zeros((n, n))
        d_k = np.zeros(n)
        try:
            new_blocks = []
            for idxs, prev in zip(chart.blocks, prev_blocks):
                sub = m[np.ix_(idxs, idxs)]
                if len(idxs) == 1:
                    val = sub[0, 0]
                    if val <= 0:
                        raise PathBreakdownError("eigenvalue crossed zero")
                    vals, vecs = np.array([val]), np.array([[1.0]])
                else:
                    vals, vecs = _eig_block_step(sub, prev, imag_tol, overlap_min)
                x_k[np.ix_(idxs, idxs)] = vecs
                d_k[list(idxs)] = vals
                new_blocks.append(vecs)
        except PathBreakdownError as err:
            err.index = k
            err.partial = (x_path, d_path)
            raise
        prev_blocks = new_blocks
        x_path.append(x_k)
        d_path.append(d_k)
    return x_path, d_path


# ----------------------------------------------------------------------
# quadrature correction
# ----------------------------------------------------------------------

def _fd4_derivative(samples: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order finite-difference time derivative along axis 0."""
    f = np.asarray(samples, dtype=float)
    if len(f) < 5:
        raise AccuracyError("need at least five samples for the derivative stencil")
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    d[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    d[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return d


def cumulative_simpson(f: np.ndarray, h: float) -> np.ndarray:
    """Cumulative integral on a uniform grid, fourth order, vector valued."""
    f = np.asarray(f, dtype=float)
    out = np.zeros_like(f)
    if len(f) < 3:
        if len(f) == 2:
            out[1] = 0.5 * h * (f[0] + f[1])
        return out
    out[1] = h * (5 * f[0] + 8 * f[1] - f[2]) / 12.0
    for k in range(2, len(f)):
        out[k] = out[k - 2] + h * (f[k - 2] + 4 * f[k - 1] + f[k]) / 3.0
    return out


def b_correction(x_path, q_path, q0: np.ndarray, times: np.ndarray,
                 algebra: LieAlgebraData, quad_tol: float | None = None):
    """Torus correction b(t) with b(0) = 1; returns diagonal samples and an
    error estimate for the quadrature (coarse-grid Richardson comparison)."""
    times = np.asarray(times, dtype=float)
    h = float(times[1] - times[0])
    if np.max(np.abs(np.diff(times) - h)) > 1e-12 * max(1.0, h):
        raise PreconditionError("correction quadrature requires a uniform grid")
    xs = np.asarray(x_path)
    xdot = _fd4_derivative(xs, h)
    integrand = np.empty((len(xs), algebra.rank))
    for k in range(len(xs)):
        body = np.linalg.solve(xs[k], xdot[k])
        integrand[k] = algebra.diag_to_h(np.diag(body))
    integral = cumulative_simpson(integrand, h)
    estimate = None
    if len(xs) >= 9:
        coarse = cumulative_simpson(integrand[::2], 2 * h)
        estimate = float(np.max(np.abs(coarse[-1] - integral[::2][-1]))) / 15.0
        if quad_tol is not None and estimate > quad_tol:
            raise AccuracyError(f"quadrature error estimate {estimate:.3e} above {quad_tol:.1e}")
    b_path = np.empty((len(xs), algebra.n))
    for k in range(len(xs)):
        coeffs = 0.5 * (np.asarray(q_path[k]) - q0) - integral[k]
        b_path[k] = np.exp(algebra.h_to_diag(coeffs))
    return b_path, estimate


# ----------------------------------------------------------------------
# solver pipelines
# ----------------------------------------------------------------------

@dataclass
class FactorPath:
    """Factor samples of one exact-solver run plus per-sample diagnostics."""

    times: np.ndarray
    k_plus: list
    k_minus: list
    q_path: list
    diagnostics: dict = field(default_factory=dict)
    status: str = "complete"
    horizon: float | None = None
    failure: str | None = None


def uniform_grid(t_max: float, n_samples: int = 257) -> np.ndarray:
    if t_max < 0 or n_samples < 2:
        raise PreconditionError("need t_max >= 0 and at least two samples")
    return np.linspace(0.0, t_max, n_samples)


def _truncate(times, kept, err):
    failing = float(times[kept])
    return times[:kept], "truncated", failing, f"{type(err).__name__}: {err}"


def spin_cm_factor_path(r: RFamily, st0: SpinCMState, times: np.ndarray,
                        momentum_tol: float = 1e-10) -> FactorPath:
    """Shared factorization pipeline of the hyperbolic-family solvers."""
    alg = r.algebra
    if np.max(np.abs(st0.xi.h), initial=0.0) > momentum_tol:
        raise PreconditionError("exact solution requires a vanishing Cartan spin component")
    r.check_domain(st0.q)
    times = np.asarray(times, dtype=float)
    if len(times) < 5 or abs(times[0]) > 1e-15:
        raise PreconditionError("grid must start at 0 with at least five samples")
    l0 = lax_L(r, st0).to_matrix()
    chart = build_parabolic_chart(alg, r.pi_prime)
    status, horizon, failure = "complete", None, None

    exps, gs, nps = [], [], []
    for k, t in enumerate(times):
        try:
            e = mat_exp(t * l0)
            g, n_plus = gauss_parabolic(e, chart)
        except SpincmError as err:
            if k < 5:
                raise
            times, status, horizon, failure = _truncate(times, k, err)
            break
        exps.append(e)
        gs.append(g)
        nps.append(n_plus)

    try:
        x_path, d_path = levi_eig_path(gs, st0.q, chart)
    except PathBreakdownError as err:
        if err.index < 5:
            raise
        times, status, horizon, failure = _truncate(times, err.index, err)
        x_path, d_path = err.partial
        exps, gs, nps = exps[:err.index], gs[:err.index], nps[:err.index]

    q_path = []
    for k, d in enumerate(d_path):
        try:
            q_path.append(cartan_log(alg, d))
        except BranchError as err:
            if k < 5:
                raise
            times, status, horizon, failure = _truncate(times, k, err)
            x_path, d_path = x_path[:k], d_path[:k]
            exps, gs, nps = exps[:k], gs[:k], nps[:k]
            break

    b_path, quad_est = b_correction(x_path, q_path, st0.q, times, alg)
    e_q0 = np.exp(alg.h_to_diag(st0.q))
    k_plus, k_minus = [], []
    fact_res = np.empty(len(times))
    theta_res = np.empty(len(times))
    conj_res = np.empty(len(times))
    for k in range(len(times)):
        kp = x_path[k] * b_path[k][None, :]
        e_qk = np.exp(alg.h_to_diag(q_path[k]))
        km = nps[k] @ (e_q0[:, None] * kp * (1.0 / e_qk)[None, :])
        k_plus.append(kp)
        k_minus.append(km)
        fact_res[k] = np.max(np.abs(exps[k] - kp @ np.linalg.inv(km)))
        k_rec = np.linalg.solve(exps[k], kp)           # exp(-t L0) k_plus
        theta_res[k] = np.max(np.abs(chart.levi_part(k_rec)
                                     - e_q0[:, None] * kp * (1.0 / e_qk)[None, :]))
        conj_res[k] = np.max(np.abs(np.linalg.solve(kp, l0 @ kp)
                                    - np.linalg.solve(km, l0 @ km)))
    diagnostics = {
        "factorization_residual": fact_res,
        "theta_residual": theta_res,
        "conjugation_residual": conj_res,
    }
    if quad_est is not None:
        diagnostics["quadrature_error"] = quad_est
    return FactorPath(times=times, k_plus=k_plus, k_minus=k_minus, q_path=q_path,
                      diagnostics=diagnostics, status=status, horizon=horizon,
                      failure=failure)


def _root_reconstruction(r: RFamily, q: np.ndarray, xi: GElement) -> GElement:
    """Root part of the Lax operator as a function of position and spin."""
    return -1.0 * r_pm_apply(r, -1, q, gelement(r.algebra, None, xi.r))


def solve_spin_cm(r: RFamily, st0: SpinCMState, times: np.ndarray) -> Trajectory:
    """Exact flow of the hyperbolic family on the zero-momentum level set."""
    path = spin_cm_factor_path(r, st0, times)
    alg = r.algebra
    l0 = lax_L(r, st0).to_matrix()
    xi0 = st0.xi.to_matrix()
    states = []
    p_root = np.empty(len(path.times))
    xi_h = np.empty(len(path.times))
    for k in range(len(path.times)):
        kp = path.k_plus[k]
        xi_k = from_matrix(alg, np.linalg.solve(kp, xi0 @ kp))
        ad_l = from_matrix(alg, np.linalg.solve(kp, l0 @ kp))
        diff = ad_l - _root_reconstruction(r, path.q_path[k], xi_k)
        p_root[k] = float(np.max(np.abs(diff.r)))
        xi_h[k] = float(np.max(np.abs(xi_k.h), initial=0.0))
        states.append(SpinCMState(path.q_path[k], diff.h, gelement(alg, None, xi_k.r)))
    traj = Trajectory(times=path.times, states=states, status=path.status,
                      horizon=path.horizon, failure=path.failure,
                      diagnostics=dict(path.diagnostics))
    traj.diagnostics["p_root_residual"] = p_root
    traj.diagnostics["momentum_residual"] = xi_h
    return traj


def solve_reduced_cm(r: RFamily, st0: ReducedState, times: np.ndarray,
                     slice_tol: float = 1e-9) -> Trajectory:
    """Exact reduced flow; the initial spin is its own zero-momentum lift."""
    alg = r.algebra
    simple = st0.s.r[alg.simple_idx]
    if np.max(np.abs(simple - 1.0)) > slice_tol or np.max(np.abs(st0.s.h), initial=0.0) > slice_tol:
        raise PreconditionError("initial spin must lie on the normalised slice")
    lift = SpinCMState(st0.q, st0.p, gelement(alg, None, st0.s.r))
    path = spin_cm_factor_path(r, lift, times)
    ltil0 = (gelement(alg, st0.p) - r_pm_apply(r, -1, st0.q, st0.s)).to_matrix()
    s0m = st0.s.to_matrix()
    times_out, states = [], []
    p_root = []
    status, horizon, failure = path.status, path.horizon, path.failure
    for k in range(len(path.times)):
        kp = path.k_plus[k]
        xi_k = from_matrix(alg, np.linalg.solve(kp, s0m @ kp))
        try:
            log_g = g_of_xi(alg, xi_k)
        except OutOfChartError as err:
            if k < 1:
                raise
            status = "truncated"
            horizon = float(path.times[k])
            failure = f"{type(err).__name__}: {err}"
            break
        s_k = ad_torus(alg, -log_g, xi_k)
        ad_l = from_matrix(alg, np.linalg.solve(kp, ltil0 @ kp))
        vec = ad_torus(alg, -log_g, ad_l) + r_pm_apply(r, -1, path.q_path[k], s_k)
        p_root.append(float(np.max(np.abs(vec.r))))
        times_out.append(path.times[k])
        states.append(ReducedState(path.q_path[k], vec.h, gelement(alg, None, s_k.r)))
    traj = Trajectory(times=np.asarray(times_out), states=states, status=status,
                      horizon=horizon, failure=failure,
                      diagnostics={k: v[:len(times_out)] if isinstance(v, np.ndarray) else v
                                   for k, v in path.diagnostics.items()})
    traj.diagnostics["p_root_residual"] = np.asarray(p_root)
    return traj


def solve_toda(algebra: LieAlgebraData, st0: TodaState, pi_prime,
               times: np.ndarray) -> Trajectory:
    """Exact spin Toda flow via the full lower/diagonal/upper factorization."""
    times = np.asarray(times, dtype=float)
    if len(times) < 2 or abs(times[0]) > 1e-15:
        raise PreconditionError("grid must start at 0 with at least two samples")
    l0e, _ = toda_lax_pair(algebra, st0, pi_prime)
    l0 = l0e.to_matrix()
    status, horizon, failure = "complete", None, None
    states = []
    fact_res, theta_res, conj_res, p_root = [], [], [], []
    e_x0 = np.exp(algebra.h_to_diag(st0.x))
    times_out = []
    for k, t in enumerate(times):
        try:
            e = mat_exp(t * l0)
            n_minus, hdiag, n_plus = gauss_full(e)
            log_h = np.log(hdiag) if np.all(hdiag > 0) else None
            if log_h is None:
                raise BranchError("torus factor left the positive chart")
        except SpincmError as err:
            if k < 1:
                raise
            status = "truncated"
            horizon = float(t)
            failure = f"{type(err).__name__}: {err}"
            break
        x_k = st0.x + algebra.diag_to_h(log_h)
        eta_k = ad_torus(algebra, -0.5 * log_h, st0.eta)
        kp = n_minus * np.exp(0.5 * log_h)[None, :]
        km = n_plus * np.exp(-0.5 * log_h)[None, :]
        recon, _ = toda_lax_pair(algebra, TodaState(x_k, np.zeros(algebra.rank), eta_k),
                                 pi_prime)
        ad_l = from_matrix(algebra, np.linalg.solve(kp, l0 @ kp))
        diff = ad_l - recon
        p_root.append(float(np.max(np.abs(diff.r))))
        fact_res.append(float(np.max(np.abs(e - kp @ np.linalg.inv(km)))))
        e_xk = np.exp(algebra.h_to_diag(x_k))
        theta_res.append(float(np.max(np.abs(np.diag(km) - e_x0 * np.diag(kp) / e_xk))))
        conj_res.append(float(np.max(np.abs(np.linalg.solve(kp, l0 @ kp)
                                            - np.linalg.solve(km, l0 @ km)))))
        times_out.append(float(t))
        states.append(TodaState(x_k, diff.h, eta_k))
    traj = Trajectory(times=np.asarray(times_out), states=states, status=status,
                      horizon=horizon, failure=failure)
    traj.diagnostics = {
        "factorization_residual": np.asarray(fact_res),
        "theta_residual": np.asarray(theta_res),
        "conjugation_residual": np.asarray(conj_res),
        "p_root_residual": np.asarray(p_root),
    }
    return traj


def solve_toda_reduced(algebra: LieAlgebraData, x0: np.ndarray, p0: np.ndarray,
                       constants: dict, pi_prime, times: np.ndarray) -> Trajectory:
    """Exact flow of the reduced lattice through its spin lift."""
    eta0 = lift_reduced_toda(algebra, constants, pi_prime)
    st0 = TodaState(np.asarray(x0, dtype=float), np.asarray(p0, dtype=float), eta0)
    inner = solve_toda(algebra, st0, pi_prime, times)
    states = [ReducedTodaState(st.x, st.p) for st in inner.states]
    return Trajectory(times=inner.times, states=states, status=inner.status,
                      horizon=inner.horizon, failure=inner.failure,
                      diagnostics=inner.diagnostics)
