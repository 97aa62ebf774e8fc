import numpy as np
import pytest

from spincm import factor, liealg, models
from spincm.dynr import RFamily
from spincm.errors import (BigCellError, BranchError, OutOfChartError,
                           PatternError, PreconditionError)
from spincm.factor import (b_correction, build_parabolic_chart, cartan_log,
                           cumulative_simpson, gauss_full, gauss_parabolic,
                           levi_eig_path, mat_exp, solve_reduced_cm,
                           solve_spin_cm, solve_toda, solve_toda_reduced,
                           uniform_grid)
from spincm.liealg import build_algebra, gelement, random_gelement
from spincm.models import ReducedState, SpinCMState, TodaState
from spincm.numint import IntegratorConfig, integrate

from test_dynr import cartan_point


# ----------------------------------------------------------------------
# primitives
# ----------------------------------------------------------------------

def test_mat_exp_basics():
    assert np.allclose(mat_exp(np.zeros((3, 3))), np.eye(3))
    t = 0.7
    d = mat_exp(t * np.diag([1.0, -1.0]))
    np.testing.assert_allclose(d, np.diag([np.exp(t), np.exp(-t)]), rtol=1e-14)


def test_mat_exp_against_scipy():
    from scipy.linalg import expm
    rng = np.random.default_rng(0)
    for n in (2, 4, 6):
        for _ in range(20):
            a = rng.standard_normal((n, n))
            a = a / max(1.0, np.linalg.norm(a, 1))  # norm-1 inputs
            np.testing.assert_allclose(mat_exp(a), expm(a), atol=1e-12)
    # larger norms exercise the squaring phase
    a = 8.0 * rng.standard_normal((4, 4))
    np.testing.assert_allclose(mat_exp(a), expm(a), rtol=1e-10, atol=1e-10)


def test_cartan_log_round_trip():
    alg = build_algebra("A", 2)
    rng = np.random.default_rng(1)
    for _ in range(20):
        q = rng.standard_normal(2)
        d = np.exp(alg.h_to_diag(q))
        np.testing.assert_allclose(cartan_log(alg, d), q, atol=1e-12)
    with pytest.raises(BranchError):
        cartan_log(alg, np.array([1.0, -0.5, 2.0]))
    with pytest.raises(BranchError):
        cartan_log(alg, np.array([2.0, 1.0, 1.0]))  # not unimodular


def test_parabolic_chart_blocks():
    alg = build_algebra("A", 3)
    chart = build_parabolic_chart(alg, {2})
    assert chart.blocks == ((0,), (1, 2), (3,))
    full = build_parabolic_chart(alg, {1, 2, 3})
    assert full.blocks == ((0, 1, 2, 3),)
    empty = build_parabolic_chart(alg, set())
    assert len(empty.blocks) == 4


def test_algebra_zero_patterns_match_chart():
    """Span/complement root vectors land where the block masks say they do."""
    alg = build_algebra("A", 3)
    r = RFamily(alg, {2})
    chart = build_parabolic_chart(alg, {2})
    for i in range(alg.num_roots):
        m = alg.root_vectors[i] != 0
        if r.in_span[i]:
            assert not np.any(m & ~chart.levi_mask)
        elif alg.heights[i] > 0:
            assert not np.any(m & ~chart.strict_upper_mask)
        else:
            assert not np.any(m & chart.upper_mask)


def test_gauss_full_examples():
    n_m, h, n_p = gauss_full(np.eye(3))
    assert np.allclose(n_m, np.eye(3)) and np.allclose(h, 1.0) and np.allclose(n_p, np.eye(3))
    m = np.array([[2.0, 1.0], [1.0, 1.0]])
    n_m, h, n_p = gauss_full(m)
    np.testing.assert_allclose(n_m, [[1.0, 0.0], [0.5, 1.0]])
    np.testing.assert_allclose(h, [2.0, 0.5])
    np.testing.assert_allclose(n_p, [[1.0, -0.5], [0.0, 1.0]])
    np.testing.assert_allclose(n_m @ np.diag(h) @ np.linalg.inv(n_p), m, atol=1e-14)
    with pytest.raises(BigCellError):
        gauss_full(np.array([[0.0, 1.0], [-1.0, 0.0]]))


def test_gauss_full_random_reassembly():
    rng = np.random.default_rng(2)
    for _ in range(20):
        a = rng.standard_normal((4, 4))
        m = mat_exp(a - np.trace(a) / 4 * np.eye(4))
        n_m, h, n_p = gauss_full(m)
        np.testing.assert_allclose(n_m @ np.diag(h) @ np.linalg.inv(n_p), m, atol=1e-10)
        assert np.prod(h) == pytest.approx(1.0, abs=1e-8)


def test_gauss_parabolic():
    alg = build_algebra("A", 3)
    chart = build_parabolic_chart(alg, {2})
    # block-diagonal input factors trivially
    g0 = np.eye(4)
    g0[1:3, 1:3] = [[1.2, 0.3], [-0.1, 0.9]]
    g, n_p = gauss_parabolic(g0, chart)
    np.testing.assert_allclose(g, g0, atol=1e-14)
    np.testing.assert_allclose(n_p, np.eye(4), atol=1e-12)
    # random elements of the block-upper group reassemble
    rng = np.random.default_rng(3)
    r = RFamily(alg, {2})
    allowed = r.in_span | (alg.heights > 0)
    for _ in range(20):
        x = random_gelement(alg, rng)
        x.r[~allowed] = 0.0
        m = mat_exp(x.to_matrix())
        g, n_p = gauss_parabolic(m, chart)
        np.testing.assert_allclose(g @ np.linalg.inv(n_p), m, atol=1e-12)
        assert np.max(np.abs(n_p[~chart.upper_mask])) < 1e-12
    with pytest.raises(PatternError):
        gauss_parabolic(np.ones((4, 4)), chart)


def test_gauss_parabolic_empty_subset_sl2():
    alg = build_algebra("A", 1)
    chart = build_parabolic_chart(alg, set())
    m = np.array([[2.0, 0.6], [0.0, 0.5]])
    g, n_p = gauss_parabolic(m, chart)
    np.testing.assert_allclose(g, np.diag([2.0, 0.5]))
    np.testing.assert_allclose(g @ np.linalg.inv(n_p), m, atol=1e-14)


def test_levi_eig_path():
    alg = build_algebra("A", 1)
    chart = build_parabolic_chart(alg, {1})
    rng = np.random.default_rng(4)
    q0 = np.array([0.9])
    # constant identity path
    xs, ds = levi_eig_path([np.eye(2)] * 4, q0, chart)
    np.testing.assert_allclose(xs[0], np.eye(2))
    np.testing.assert_allclose(ds[0], np.exp(alg.h_to_diag(q0)))
    np.testing.assert_allclose(xs[-1], np.eye(2), atol=1e-14)
    # smooth unimodular path: eigenvalues match the quadratic formula
    z = random_gelement(alg, rng, scale=0.4)
    ts = np.linspace(0.0, 0.5, 21)
    gpath = [mat_exp(t * z.to_matrix()) for t in ts]
    xs, ds = levi_eig_path(gpath, q0, chart)
    for g, d in zip(gpath, ds):
        m = g @ np.diag(np.exp(alg.h_to_diag(q0)))
        tr, det = np.trace(m), np.linalg.det(m)
        disc = np.sqrt(tr * tr - 4 * det)
        roots = sorted([(tr + disc) / 2, (tr - disc) / 2])
        np.testing.assert_allclose(sorted(d), roots, atol=1e-10)
    # reconstruction x d x^{-1} = g e^{q0}
    for g, x, d in zip(gpath, xs, ds):
        m = g @ np.diag(np.exp(alg.h_to_diag(q0)))
        np.testing.assert_allclose(x @ np.diag(d) @ np.linalg.inv(x), m, atol=1e-10)


def test_cumulative_simpson_order():
    f = lambda t: np.cos(3.0 * t)
    exact = lambda t: np.sin(3.0 * t) / 3.0
    errs = []
    for k in (65, 129):
        ts = np.linspace(0.0, 1.0, k)
        vals = cumulative_simpson(f(ts)[:, None], ts[1] - ts[0])
        errs.append(np.max(np.abs(vals[:, 0] - exact(ts))))
    assert errs[0] / errs[1] > 12.0  # fourth-order convergence


def test_b_correction_trivial_and_gauge():
    alg = build_algebra("A", 2)
    ts = np.linspace(0.0, 1.0, 41)
    q0 = np.array([0.4, -0.2])
    q_path = [q0 + t * np.array([0.3, 0.1]) for t in ts]
    x_path = [np.eye(3)] * len(ts)
    b, _ = b_correction(x_path, q_path, q0, ts, alg)
    np.testing.assert_allclose(b[0], np.ones(3), atol=1e-14)
    for k, t in enumerate(ts):
        np.testing.assert_allclose(
            b[k], np.exp(alg.h_to_diag(0.5 * (q_path[k] - q0))), atol=1e-10)
    # torus gauge change of the eigenvector path leaves k_plus = x b unchanged
    rng = np.random.default_rng(5)
    z = rng.standard_normal(2)
    for k, t in enumerate(ts):
        x_path[k] = x_path[k] @ np.diag(np.exp(alg.h_to_diag(np.sin(t) * 0.3 * z)))
    b2, _ = b_correction(x_path, q_path, q0, ts, alg)
    for k in range(len(ts)):
        kp1 = np.eye(3) * b[k][None, :]
        kp2 = x_path[k] * b2[k][None, :]
        np.testing.assert_allclose(kp1, kp2, atol=1e-8)


def test_b_correction_guards():
    alg = build_algebra("A", 1)
    with pytest.raises(Exception):
        b_correction([np.eye(2)] * 3, [np.zeros(1)] * 3, np.zeros(1),
                     np.linspace(0, 1, 3), alg)


# ----------------------------------------------------------------------
# exact solvers vs oracles
# ----------------------------------------------------------------------

def repulsive_spin(alg, rng, lo=0.3, hi=0.9):
    """Spin with negative products on opposite roots: the hyperbolic potential
    is then a barrier and the flow stays inside the Weyl chamber."""
    xi = gelement(alg)
    pos = np.where(alg.heights > 0)[0]
    xi.r[pos] = rng.uniform(lo, hi, size=len(pos))
    xi.r[alg.neg[pos]] = -rng.uniform(lo, hi, size=len(pos))
    return xi


def spin_cm_initial(alg, rng, scale=0.5):
    q = cartan_point(alg, rng, lo=1.2, hi=1.8)
    p = scale * rng.standard_normal(alg.rank)
    return SpinCMState(q, p, repulsive_spin(alg, rng))


def states_sup_deviation(traj_a, traj_b, attrs):
    worst = 0.0
    for sa, sb in zip(traj_a.states, traj_b.states):
        for name in attrs:
            va, vb = getattr(sa, name), getattr(sb, name)
            if hasattr(va, "r"):
                worst = max(worst, float(np.max(np.abs(va.h - vb.h), initial=0.0)),
                            float(np.max(np.abs(va.r - vb.r))))
            else:
                worst = max(worst, float(np.max(np.abs(va - vb))))
    return worst


def test_solve_spin_cm_trivial_cases():
    alg = build_algebra("A", 2)
    r = RFamily(alg, {1, 2})
    rng = np.random.default_rng(6)
    st0 = spin_cm_initial(alg, rng)
    ts = uniform_grid(0.4, 41)
    traj = solve_spin_cm(r, st0, ts)
    assert traj.status == "complete"
    first = traj.states[0]
    assert np.max(np.abs(first.q - st0.q)) < 1e-12
    assert np.max(np.abs(first.p - st0.p)) < 1e-10
    assert (first.xi - st0.xi).norm() < 1e-10
    # free motion
    st_free = SpinCMState(st0.q, st0.p, gelement(alg))
    traj_free = solve_spin_cm(r, st_free, ts)
    for t, st in zip(traj_free.times, traj_free.states):
        np.testing.assert_allclose(st.q, st0.q + t * st0.p, atol=1e-9)
        np.testing.assert_allclose(st.p, st0.p, atol=1e-9)


def test_solve_spin_cm_matches_rk4():
    alg = build_algebra("A", 2)
    r = RFamily(alg, {1, 2})
    rng = np.random.default_rng(7)
    st0 = spin_cm_initial(alg, rng)
    n_grid, sub = 251, 20
    ts = uniform_grid(0.5, n_grid)
    traj = solve_spin_cm(r, st0, ts)
    assert traj.status == "complete"
    ref = integrate(models.spin_cm_flow(r), st0,
                    IntegratorConfig(dt=0.5 / ((n_grid - 1) * sub), t_max=0.5))
    ref_sub = models.Trajectory(times=ref.times[::sub], states=ref.states[::sub])
    assert states_sup_deviation(traj, ref_sub, ("q", "p", "xi")) < 1e-6
    # solver-internal certificates
    assert np.max(traj.diagnostics["factorization_residual"]) < 1e-9
    assert np.max(traj.diagnostics["theta_residual"]) < 1e-8
    assert np.max(traj.diagnostics["conjugation_residual"]) < 1e-9
    assert np.max(traj.diagnostics["momentum_residual"]) < 1e-9
    assert np.max(traj.diagnostics["p_root_residual"]) < 1e-9
    # isospectrality anchor: the Lax spectrum is frozen
    l0 = np.sort(np.linalg.eigvals(models.lax_L(r, st0).to_matrix()).real)
    for st in traj.states[::50]:
        lt = np.sort(np.linalg.eigvals(models.lax_L(r, st).to_matrix()).real)
        np.testing.assert_allclose(lt, l0, atol=1e-8)


def test_solve_spin_cm_proper_subset():
    alg = build_algebra("A", 2)
    r = RFamily(alg, {1})
    rng = np.random.default_rng(8)
    st0 = spin_cm_initial(alg, rng)
    ts = uniform_grid(0.5, 251)
    traj = solve_spin_cm(r, st0, ts)
    assert traj.status == "complete"
    ref = integrate(models.spin_cm_flow(r), st0, IntegratorConfig(dt=1e-4, t_max=0.5))
    ref_sub = models.Trajectory(times=ref.times[::20], states=ref.states[::20])
    assert states_sup_deviation(traj, ref_sub, ("q", "p", "xi")) < 1e-6


def test_solve_spin_cm_attractive_horizon():
    """Attractive spin products drive the position to the chamber wall in
    finite time; the solver detects the eigenvalue collision and truncates."""
    alg = build_algebra("A", 2)
    r = RFamily(alg, {1, 2})
    rng = np.random.default_rng(7)
    q = cartan_point(alg, rng, lo=1.2, hi=1.8)
    p = 0.5 * rng.standard_normal(2)
    xi = random_gelement(alg, rng, scale=0.5, cartan=False)
    traj = solve_spin_cm(r, SpinCMState(q, p, xi), uniform_grid(0.5, 251))
    assert traj.status == "truncated"
    assert traj.horizon == pytest.approx(0.49, abs=0.01)
    assert "PathBreakdown" in traj.failure


def test_solve_spin_cm_momentum_precondition():
    alg = build_algebra("A", 2)
    r = RFamily(alg, {1, 2})
    rng = np.random.default_rng(9)
    st0 = spin_cm_initial(alg, rng)
    st0.xi.h[0] = 0.5
    with pytest.raises(PreconditionError):
        solve_spin_cm(r, st0, uniform_grid(0.3, 31))


def reduced_initial(alg, rng, scale=0.4):
    s = repulsive_spin(alg, rng)
    s.r[alg.simple_idx] = 1.0
    q = cartan_point(alg, rng, lo=1.2, hi=1.8)
    return ReducedState(q, scale * rng.standard_normal(alg.rank), s)


def test_solve_reduced_cm():
    alg = build_algebra("A", 2)
    r = RFamily(alg, {1, 2})
    rng = np.random.default_rng(10)
    st0 = reduced_initial(alg, rng)
    ts = uniform_grid(0.5, 251)
    traj = solve_reduced_cm(r, st0, ts)
    assert traj.status == "complete"
    # slice is preserved exactly along the exact flow
    for st in traj.states:
        np.testing.assert_allclose(st.s.r[alg.simple_idx], 1.0, atol=1e-9)
    # agrees with reducing the unreduced solution
    lift = SpinCMState(st0.q, st0.p, gelement(alg, None, st0.s.r))
    full = solve_spin_cm(r, lift, ts)
    for st_red, st_full in zip(traj.states, full.states):
        red = models.reduce_state(r, st_full)
        assert np.max(np.abs(red.q - st_red.q)) < 1e-8
        assert np.max(np.abs(red.p - st_red.p)) < 1e-8
        assert (red.s - st_red.s).norm() < 1e-8
    # and with direct integration of the reduced equations
    ref = integrate(models.reduced_cm_flow(r), st0, IntegratorConfig(dt=1e-4, t_max=0.5))
    ref_sub = models.Trajectory(times=ref.times[::20], states=ref.states[::20])
    assert states_sup_deviation(traj, ref_sub, ("q", "p", "s")) < 1e-6


def test_solve_reduced_cm_slice_validation():
    alg = build_algebra("A", 2)
    r = RFamily(alg, {1, 2})
    rng = np.random.default_rng(11)
    st0 = reduced_initial(alg, rng)
    st0.s.r[alg.simple_idx[0]] = 2.0
    with pytest.raises(PreconditionError):
        solve_reduced_cm(r, st0, uniform_grid(0.3, 31))


def toda_initial(alg, rng, scale=0.5):
    return TodaState(rng.standard_normal(alg.rank), scale * rng.standard_normal(alg.rank),
                     random_gelement(alg, rng, scale=scale))


def test_solve_toda_trivial_and_free():
    alg = build_algebra("A", 2)
    rng = np.random.default_rng(12)
    st0 = toda_initial(alg, rng)
    ts = uniform_grid(1.0, 101)
    traj = solve_toda(alg, st0, [1, 2], ts)
    first = traj.states[0]
    assert np.max(np.abs(first.x - st0.x)) < 1e-12
    assert (first.eta - st0.eta).norm() < 1e-12
    st_free = TodaState(st0.x, st0.p, gelement(alg))
    traj_free = solve_toda(alg, st_free, [1, 2], ts)
    for t, st in zip(traj_free.times, traj_free.states):
        np.testing.assert_allclose(st.x, st0.x + t * st0.p, atol=1e-10)


def test_solve_toda_matches_rk4():
    for rank, pi in ((1, [1]), (2, [1, 2]), (2, [2])):
        alg = build_algebra("A", rank)
        rng = np.random.default_rng(13 + rank)
        st0 = toda_initial(alg, rng)
        ts = uniform_grid(1.0, 201)
        traj = solve_toda(alg, st0, pi, ts)
        assert traj.status == "complete"
        ref = integrate(models.toda_flow(alg, pi), st0,
                        IntegratorConfig(dt=1.0 / (200 * 25), t_max=1.0))
        ref_sub = models.Trajectory(times=ref.times[::25], states=ref.states[::25])
        assert states_sup_deviation(traj, ref_sub, ("x", "p", "eta")) < 1e-6
        assert np.max(traj.diagnostics["factorization_residual"]) < 1e-9
        assert np.max(traj.diagnostics["theta_residual"]) < 1e-9


def test_solve_toda_reduced_against_quadrature_oracle():
    """One-degree lattice solved independently by energy quadrature."""
    from scipy.integrate import quad
    from scipy.optimize import brentq
    alg = build_algebra("A", 1)
    c = {1: 1.0}
    x0, p0 = np.array([1.0]), np.array([-0.3])
    ts = uniform_grid(1.0, 101)
    traj = solve_toda_reduced(alg, x0, p0, c, [1], ts)
    assert traj.status == "complete"
    root = np.sqrt(2.0)
    energy = 0.5 * p0[0] ** 2 - np.exp(-root * x0[0])
    speed = lambda s: np.sqrt(2.0 * (energy + np.exp(-root * s)))
    t_of_x = lambda x: quad(lambda s: 1.0 / speed(s), x, x0[0], epsabs=1e-13, epsrel=1e-13)[0]
    for t, st in zip(traj.times[1:], traj.states[1:]):
        x_t = brentq(lambda x: t_of_x(x) - t, x0[0] - 10.0, x0[0], xtol=1e-12)
        assert abs(st.x[0] - x_t) < 1e-6
        assert abs(st.p[0] + speed(x_t)) < 1e-6
    # energy stays constant along the exact trajectory
    h_vals = [models.reduced_toda_hamiltonian(alg, st, c, [1]) for st in traj.states]
    assert np.max(np.abs(np.asarray(h_vals) - h_vals[0])) < 1e-9


def test_solve_toda_reduced_free():
    alg = build_algebra("A", 2)
    traj = solve_toda_reduced(alg, np.array([0.2, -0.1]), np.array([0.4, 0.1]),
                              {1: 0.0, 2: 0.0}, [1, 2], uniform_grid(1.0, 21))
    for t, st in zip(traj.times, traj.states):
        np.testing.assert_allclose(st.x, [0.2 + 0.4 * t, -0.1 + 0.1 * t], atol=1e-10)


def test_toda_horizon_truncation():
    """Attractive one-degree lattice escapes in finite time; the solver reports it."""
    alg = build_algebra("A", 1)
    traj = solve_toda_reduced(alg, np.array([1.0]), np.array([-0.3]), {1: 1.0}, [1],
                              uniform_grid(6.0, 301))
    assert traj.status == "truncated"
    assert traj.horizon is not None and 0.0 < traj.horizon < 6.0
    assert traj.failure is not None
