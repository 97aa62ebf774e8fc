import numpy as np
import pytest

from spincm import dynr, liealg
from spincm.dynr import RFamily, const_r_apply, dr_apply, mdybe_residual, phi_alpha, r_apply, r_pm_apply
from spincm.errors import DomainViolationError
from spincm.liealg import build_algebra, gelement, pairing, random_gelement, root_element

HALF_COTH_1 = 0.5 / np.tanh(1.0)  # 0.6565176426401929


def cartan_point(alg, rng, lo=1.0, hi=2.0):
    """Random Cartan vector kept away from the coth poles."""
    for _ in range(100):
        q = rng.uniform(-hi, hi, size=alg.rank)
        if np.min(np.abs(alg.alpha_values(q))) > lo / 2:
            return q
    raise AssertionError("could not sample a pole-free point")


def q_with_alpha(alg, root_index, value):
    """Cartan vector with a prescribed value on one root (least-norm solution)."""
    a = alg.coroot_h[root_index]
    return a * value / (a @ a)


def test_phi_values():
    alg = build_algebra("A", 2)
    r = RFamily(alg, {1})
    i1 = alg.simple_idx[0]
    i2 = alg.simple_idx[1]
    q = q_with_alpha(alg, i1, 2.0)
    assert phi_alpha(r, i1, q) == pytest.approx(HALF_COTH_1, abs=1e-12)
    # alpha_2 is in the positive complement: constant 1/2 regardless of q
    assert phi_alpha(r, i2, q) == pytest.approx(0.5)
    assert phi_alpha(r, alg.neg[i2], q) == pytest.approx(-0.5)


def test_phi_pole_raises():
    alg = build_algebra("A", 1)
    r = RFamily(alg, {1})
    with pytest.raises(DomainViolationError):
        phi_alpha(r, alg.simple_idx[0], np.zeros(1))


def test_phi_skew():
    alg = build_algebra("A", 3)
    r = RFamily(alg, {1, 3})
    rng = np.random.default_rng(0)
    q = cartan_point(alg, rng)
    phi = dynr.phi_all(r, q)
    np.testing.assert_allclose(phi, -phi[alg.neg], atol=0)


def test_r_apply_examples():
    alg = build_algebra("A", 1)
    r = RFamily(alg, {1})
    i = alg.simple_idx[0]
    q = q_with_alpha(alg, i, 2.0)
    # Cartan input is annihilated
    x = gelement(alg, [0.7])
    assert r_apply(r, q, x).norm() == 0.0
    y = r_apply(r, q, root_element(alg, i))
    assert y.r[i] == pytest.approx(-HALF_COTH_1, abs=1e-12)
    # R- adds the -1/2 shift
    ym = r_pm_apply(r, -1, q, root_element(alg, i))
    assert ym.r[i] == pytest.approx(-(HALF_COTH_1 + 0.5), abs=1e-12)


def test_r_skew_symmetry():
    alg = build_algebra("A", 2)
    r = RFamily(alg, {1, 2})
    rng = np.random.default_rng(1)
    q = cartan_point(alg, rng)
    for _ in range(20):
        a = random_gelement(alg, rng)
        b = random_gelement(alg, rng)
        assert abs(pairing(r_apply(r, q, a), b) + pairing(a, r_apply(r, q, b))) < 1e-12


def test_r_pm_shift_and_images():
    alg = build_algebra("A", 3)
    rng = np.random.default_rng(2)
    r = RFamily(alg, {2})
    q = cartan_point(alg, rng)
    comp_pos = ~r.in_span & (alg.heights > 0)
    comp_neg = ~r.in_span & (alg.heights < 0)
    for _ in range(50):
        x = random_gelement(alg, rng)
        plus = r_pm_apply(r, +1, q, x)
        minus = r_pm_apply(r, -1, q, x)
        assert (plus - minus - x).norm() < 1e-14
        # R+ lands in the parabolic containing the negative Borel, R- the mirror
        assert np.max(np.abs(plus.r[comp_pos])) < 1e-14
        assert np.max(np.abs(minus.r[comp_neg])) < 1e-14


def test_equivariance_under_cartan_torus():
    alg = build_algebra("A", 2)
    r = RFamily(alg, {1})
    rng = np.random.default_rng(3)
    q = cartan_point(alg, rng)
    z = alg.h_to_diag(rng.standard_normal(2))
    for _ in range(20):
        x = random_gelement(alg, rng)
        lhs = r_apply(r, q, liealg.ad_torus(alg, z, x))
        rhs = liealg.ad_torus(alg, z, r_apply(r, q, x))
        assert (lhs - rhs).norm() < 1e-10


def test_dr_trivial_cases():
    alg = build_algebra("A", 2)
    rng = np.random.default_rng(4)
    q = cartan_point(alg, rng)
    x = random_gelement(alg, rng)
    # empty subset: the family is constant
    r0 = RFamily(alg, set())
    assert dr_apply(r0, q, rng.standard_normal(2), x).norm() == 0.0
    # direction annihilated by every span root
    r1 = RFamily(alg, {1})
    a = alg.coroot_h[alg.simple_idx[0]]
    lam = np.array([-a[1], a[0]])
    assert dr_apply(r1, q, lam, x).norm() < 1e-14


def test_dr_matches_finite_differences():
    alg = build_algebra("A", 2)
    r = RFamily(alg, {1, 2})
    rng = np.random.default_rng(5)
    h = 1e-6
    for _ in range(20):
        q = cartan_point(alg, rng)
        lam = rng.standard_normal(2)
        x = random_gelement(alg, rng)
        fd = (1.0 / (2 * h)) * (r_apply(r, q + h * lam, x) - r_apply(r, q - h * lam, x))
        assert (dr_apply(r, q, lam, x) - fd).norm() < 1e-8


def test_grad_r_pairing_matches_finite_differences():
    alg = build_algebra("A", 2)
    r = RFamily(alg, {1, 2})
    rng = np.random.default_rng(6)
    h = 1e-6
    for _ in range(10):
        q = cartan_point(alg, rng)
        a = random_gelement(alg, rng)
        b = random_gelement(alg, rng)
        grad = dynr.grad_r_pairing(r, q, a, b)
        for k in range(alg.rank):
            e = np.eye(alg.rank)[k]
            fd = (pairing(r_apply(r, q + h * e, a), b)
                  - pairing(r_apply(r, q - h * e, a), b)) / (2 * h)
            assert grad[k] == pytest.approx(fd, abs=1e-8)


@pytest.mark.parametrize("rank,subset", [
    (1, {1}), (2, {1}), (2, {1, 2}), (3, {2}), (3, {1, 2, 3}),
])
def test_mdybe_residual_vanishes(rank, subset):
    alg = build_algebra("A", rank)
    r = RFamily(alg, subset)
    rng = np.random.default_rng(7 + rank)
    for _ in range(100):
        q = cartan_point(alg, rng)
        a = random_gelement(alg, rng)
        b = random_gelement(alg, rng)
        assert mdybe_residual(r, q, a, b).norm() < 1e-10


def test_unmodified_equation_fails():
    alg = build_algebra("A", 2)
    r = RFamily(alg, {1, 2})
    rng = np.random.default_rng(8)
    worst = np.inf
    for _ in range(20):
        q = cartan_point(alg, rng)
        a = random_gelement(alg, rng)
        b = random_gelement(alg, rng)
        worst = min(worst, mdybe_residual(r, q, a, b, modified=False).norm())
    assert worst > 1e-3


def test_algebroid_identity_residual():
    alg = build_algebra("A", 2)
    rng = np.random.default_rng(9)
    for subset in ({1}, {1, 2}):
        r = RFamily(alg, subset)
        for _ in range(100):
            q = cartan_point(alg, rng)
            a = random_gelement(alg, rng)
            a2 = random_gelement(alg, rng)
            z = rng.standard_normal(2)
            z2 = rng.standard_normal(2)
            res_g, res_h = dynr.algebroid_identity_residual(r, q, a, z, a2, z2)
            assert res_g.norm() < 1e-10
            assert np.max(np.abs(res_h)) < 1e-10


def test_algebroid_identity_antisymmetry():
    alg = build_algebra("A", 2)
    r = RFamily(alg, {1})
    rng = np.random.default_rng(10)
    q = cartan_point(alg, rng)
    a = random_gelement(alg, rng)
    z = rng.standard_normal(2)
    res_g, res_h = dynr.algebroid_identity_residual(r, q, a, z, a, z)
    assert res_g.norm() < 1e-15
    assert np.max(np.abs(res_h)) < 1e-15


def test_const_r_values():
    alg = build_algebra("A", 2)
    x = gelement(alg, [0.3, -0.2])
    assert const_r_apply(alg, x).norm() == 0.0
    i = alg.simple_idx[0]
    y = const_r_apply(alg, root_element(alg, i))
    assert y.r[i] == -0.5
    yneg = const_r_apply(alg, root_element(alg, alg.neg[i]))
    assert yneg.r[alg.neg[i]] == 0.5


def test_const_r_is_scaling_limit():
    alg = build_algebra("A", 2)
    r = RFamily(alg, {1, 2})
    rng = np.random.default_rng(11)
    w = liealg.weyl_vector_w(alg)
    x = rng.standard_normal(2)
    errs = []
    for tau in (4.0, 6.0, 8.0):
        worst = 0.0
        rng_x = np.random.default_rng(12)
        for _ in range(10):
            xi = random_gelement(alg, rng_x)
            diff = r_apply(r, x + 2 * tau * w, xi) - const_r_apply(alg, xi)
            worst = max(worst, diff.norm())
        errs.append(worst)
    assert errs[0] > errs[1] > errs[2]
