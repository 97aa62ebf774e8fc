"""Randomized verification suites behind the ``verify`` endpoint/subcommand.

Each suite draws seeded random configurations, evaluates the relevant
residuals, and reports per-case maxima against its tolerance.  The same
functions back the acceptance tests, which pin the tolerances.
"""

from __future__ import annotations

import numpy as np

from . import dynr, factor, models, numint, poisson
from .config import VerifyConfig
from .dynr import RFamily, const_r_apply, mdybe_residual, r_apply
from .errors import ValidationError
from .liealg import (LieAlgebraData, build_algebra, gelement, pairing,
                     random_gelement, weyl_vector_w)
from .models import ReducedState, SpinCMState, TodaState


def pole_free_cartan(algebra: LieAlgebraData, rng: np.random.Generator,
                     lo: float = 0.6, hi: float = 2.0) -> np.ndarray:
    """Random Cartan vector with every root value bounded away from zero."""
    for _ in range(200):
        q = rng.uniform(-hi, hi, size=algebra.rank)
        if np.min(np.abs(algebra.alpha_values(q))) > lo:
            return q
    raise ValidationError("could not sample a pole-free Cartan point")


def repulsive_spin(algebra: LieAlgebraData, rng: np.random.Generator,
                   lo: float = 0.3, hi: float = 0.9):
    """Spin with negative opposite-root products, so the hyperbolic potential
    is a barrier and trajectories stay inside the chamber."""
    xi = gelement(algebra)
    pos = np.where(algebra.heights > 0)[0]
    xi.r[pos] = rng.uniform(lo, hi, size=len(pos))
    xi.r[algebra.neg[pos]] = -rng.uniform(lo, hi, size=len(pos))
    return xi


def _subsets(rank: int, pi_prime):
    if pi_prime is not None:
        return [sorted(set(pi_prime))]
    subsets = [[], [1]]
    full = list(range(1, rank + 1))
    if full not in subsets:
        subsets.append(full)
    return subsets


def mdybe_suite(rank: int, pi_prime=None, cases: int = 100, seed: int = 0,
                tol: float = 1e-10) -> dict:
    algebra = build_algebra("A", rank)
    rng = np.random.default_rng(seed)
    configs = []
    for subset in _subsets(rank, pi_prime):
        r = RFamily(algebra, subset)
        worst = 0.0
        for _ in range(cases):
            q = pole_free_cartan(algebra, rng)
            a = random_gelement(algebra, rng)
            b = random_gelement(algebra, rng)
            worst = max(worst, mdybe_residual(r, q, a, b).norm())
        configs.append({"pi_prime": list(subset), "cases": cases,
                        "max_residual": worst, "pass": bool(worst <= tol)})
    worst = max(c["max_residual"] for c in configs)
    return {"suite": "mdybe", "algebra": f"A{rank}", "tolerance": tol, "seed": seed,
            "configs": configs, "max_residual": worst, "pass": bool(worst <= tol)}


def algebroid_suite(rank: int = 2, pi_prime=None, cases: int = 100, seed: int = 0,
                    tol: float = 1e-10) -> dict:
    algebra = build_algebra("A", rank)
    rng = np.random.default_rng(seed)
    configs = []
    for subset in _subsets(rank, pi_prime):
        r = RFamily(algebra, subset)
        worst_g = worst_h = 0.0
        for _ in range(cases):
            q = pole_free_cartan(algebra, rng)
            a = random_gelement(algebra, rng)
            a2 = random_gelement(algebra, rng)
            z = rng.standard_normal(rank)
            z2 = rng.standard_normal(rank)
            res_g, res_h = dynr.algebroid_identity_residual(r, q, a, z, a2, z2)
            worst_g = max(worst_g, res_g.norm())
            worst_h = max(worst_h, float(np.max(np.abs(res_h), initial=0.0)))
        configs.append({"pi_prime": list(subset), "cases": cases,
                        "max_algebra_residual": worst_g, "max_cartan_residual": worst_h,
                        "pass": bool(max(worst_g, worst_h) <= tol)})
    worst = max(max(c["max_algebra_residual"], c["max_cartan_residual"]) for c in configs)
    return {"suite": "algebroid", "algebra": f"A{rank}", "tolerance": tol, "seed": seed,
            "configs": configs, "max_residual": worst, "pass": bool(worst <= tol)}


def poisson_axiom_suite(rank: int = 2, pi_prime=None, cases: int = 100, seed: int = 0,
                        tol_bilinear: float = 1e-9, tol_jacobi: float = 1e-7,
                        tol_vf: float = 1e-8, tol_map: float = 1e-8) -> dict:
    algebra = build_algebra("A", rank)
    rng = np.random.default_rng(seed)
    subset = sorted(set(pi_prime)) if pi_prime is not None else list(range(1, rank + 1))
    r = RFamily(algebra, subset)
    pi_full = list(range(1, rank + 1))

    def point():
        return (pole_free_cartan(algebra, rng), rng.standard_normal(rank),
                random_gelement(algebra, rng))

    brackets = {
        "dynamical": lambda f, g, pt: poisson.bracket_agamma(r, f, g, pt),
        "semidirect": poisson.bracket_sstar,
        "constant": poisson.bracket_bold_a,
    }
    checks = {}
    anti = leib = 0.0
    for _ in range(max(1, cases // 5)):
        pt = point()
        f, g, k = (poisson.fn_random_poly(algebra, rng) for _ in range(3))
        for br in brackets.values():
            anti = max(anti, abs(br(f, g, pt) + br(g, f, pt)))
            leib = max(leib, abs(br(f, g * k, pt) - br(f, g, pt) * k.eval(pt)
                                 - g.eval(pt) * br(f, k, pt)))
    checks["antisymmetry"] = {"max_residual": anti, "pass": bool(anti <= tol_bilinear)}
    checks["leibniz"] = {"max_residual": leib, "pass": bool(leib <= tol_bilinear)}

    jac = 0.0
    for _ in range(max(1, cases // 20)):
        pt = point()
        # moderate scale keeps the outer finite-difference noise floor low
        f, g, k = (0.5 * poisson.fn_random_poly(algebra, rng) for _ in range(3))
        for name, br in brackets.items():
            total = 0.0
            for a, b, c in ((f, g, k), (g, k, f), (k, f, g)):
                inner = poisson.fn_from_eval(
                    algebra, lambda q, b1=b, c1=c, br1=br: br1(b1, c1, q))
                total += br(a, inner, pt)
            jac = max(jac, abs(total))
    checks["jacobi"] = {"max_residual": jac, "pass": bool(jac <= tol_jacobi)}

    vf = 0.0
    pairs = ((lambda f, pt: poisson.ham_vf_agamma(r, f, pt), brackets["dynamical"]),
             (poisson.ham_vf_sstar, brackets["semidirect"]),
             (poisson.ham_vf_product, poisson.bracket_product))
    for _ in range(max(1, cases // 5)):
        pt = point()
        f, g = (poisson.fn_random_poly(algebra, rng) for _ in range(2))
        for vf_fn, br in pairs:
            vf = max(vf, abs(poisson.directional_derivative(g, pt, vf_fn(f, pt))
                             - br(f, g, pt)))
    checks["vector_field"] = {"max_residual": vf, "pass": bool(vf <= tol_vf)}

    pmap = 0.0
    for _ in range(cases):
        pt = point()
        f, g = (poisson.fn_random_poly(algebra, rng) for _ in range(2))
        fr = poisson.pullback_bold_rho(algebra, pi_full, f)
        gr = poisson.pullback_bold_rho(algebra, pi_full, g)
        pmap = max(pmap, abs(poisson.bracket_sstar(fr, gr, pt)
                             - poisson.bracket_bold_a(f, g, poisson.bold_rho(algebra, pi_full, pt))))
    checks["realization_poisson_map"] = {"max_residual": pmap, "pass": bool(pmap <= tol_map)}

    mom = 0.0
    for _ in range(max(1, cases // 10)):
        pt = point()
        z = rng.standard_normal(rank)
        jz = poisson.fn_pair3(algebra, gelement(algebra, -z))
        xd, pd, _ = poisson.ham_vf_sstar(jz, pt)
        mom = max(mom, float(np.max(np.abs(xd))), float(np.max(np.abs(pd))))
    checks["momentum_map_flow"] = {"max_residual": mom, "pass": bool(mom <= 1e-12)}

    ok = all(c["pass"] for c in checks.values())
    worst = max(c["max_residual"] for c in checks.values())
    return {"suite": "poisson-axioms", "algebra": f"A{rank}", "seed": seed,
            "checks": checks, "max_residual": worst, "pass": bool(ok)}


def commuting_invariants_suite(rank: int = 2, pi_prime=None, cases: int = 100,
                               seed: int = 0, tol_zero: float = 1e-10,
                               tol_fd: float = 1e-6) -> dict:
    algebra = build_algebra("A", rank)
    rng = np.random.default_rng(seed)
    subset = sorted(set(pi_prime)) if pi_prime is not None else list(range(1, rank + 1))
    r = RFamily(algebra, subset)
    f2 = poisson.fn_trace_power(algebra, 2)
    f3 = poisson.fn_trace_power(algebra, 3 if algebra.n > 2 else 2)
    worst_zero = worst_fd = 0.0
    largest = 0.0
    for _ in range(cases):
        q = pole_free_cartan(algebra, rng)
        x = random_gelement(algebra, rng)
        pt0 = (q, np.zeros(rank), x)
        worst_zero = max(worst_zero, abs(poisson.bracket_agamma(r, f2, f3, pt0)))
        lam = rng.standard_normal(rank)
        pt = (q, lam, x)
        val = poisson.bracket_agamma(r, f2, f3, pt)
        vf = poisson.ham_vf_agamma(r, f2, pt)
        worst_fd = max(worst_fd, abs(val - poisson.fd_directional(f3, pt, vf)))
        largest = max(largest, abs(val))
    nondegenerate = bool(largest > 1e-6) if algebra.n > 2 else True
    ok = worst_zero <= tol_zero and worst_fd <= tol_fd and nondegenerate
    return {"suite": "commuting-invariants", "algebra": f"A{rank}", "seed": seed,
            "max_zero_momentum_bracket": worst_zero, "max_fd_deviation": worst_fd,
            "largest_generic_bracket": largest, "pass": bool(ok),
            "tolerances": {"zero": tol_zero, "fd": tol_fd}}


def lax_suite(rank: int = 2, pi_prime=None, cases: int = 100, seed: int = 0,
              tol: float = 1e-8) -> dict:
    algebra = build_algebra("A", rank)
    rng = np.random.default_rng(seed)
    subset = sorted(set(pi_prime)) if pi_prime is not None else list(range(1, rank + 1))
    r = RFamily(algebra, subset)
    worst_quasi = worst_level = worst_toda = worst_mr = 0.0
    for _ in range(cases):
        st = SpinCMState(pole_free_cartan(algebra, rng),
                         0.6 * rng.standard_normal(rank),
                         random_gelement(algebra, rng, scale=0.6))
        worst_quasi = max(worst_quasi, models.quasi_lax_residual(r, st).norm())
        st0 = SpinCMState(st.q, st.p, gelement(algebra, None, st.xi.r))
        lax = models.lax_L(r, st0)
        qd, pd, xd = models.spin_cm_eom_rhs(r, st0)
        dldt = gelement(algebra, pd) - dynr.dr_apply(r, st0.q, qd, st0.xi) \
            - dynr.r_pm_apply(r, -1, st0.q, xd)
        from .liealg import bracket as lie_bracket
        worst_level = max(worst_level,
                          (dldt - lie_bracket(lax, r_apply(r, st0.q, lax))).norm())
        tst = TodaState(rng.standard_normal(rank), 0.6 * rng.standard_normal(rank),
                        random_gelement(algebra, rng, scale=0.6))
        worst_toda = max(worst_toda, models.toda_lax_residual(algebra, tst, subset).norm())
        lt, mt = models.toda_lax_pair(algebra, tst, subset)
        worst_mr = max(worst_mr, (mt - const_r_apply(algebra, lt)).norm())
    ok = max(worst_quasi, worst_level, worst_toda) <= tol and worst_mr <= 1e-12
    return {"suite": "lax", "algebra": f"A{rank}", "seed": seed, "tolerance": tol,
            "quasi_lax_max": worst_quasi, "zero_momentum_lax_max": worst_level,
            "toda_lax_max": worst_toda, "constant_r_identity_max": worst_mr,
            "pass": bool(ok)}


def scaling_suite(rank: int = 2, pi_prime=None, cases: int = 20, seed: int = 0,
                  taus=(3.0, 5.0, 7.0), rate_window: float = 0.25,
                  tol_toda: float = 1e-8) -> dict:
    algebra = build_algebra("A", rank)
    rng = np.random.default_rng(seed)
    subset = sorted(set(pi_prime)) if pi_prime is not None else list(range(1, rank + 1))
    if not subset:
        raise ValidationError("scaling suite needs a nonempty pi_prime")
    r = RFamily(algebra, subset)
    w = weyl_vector_w(algebra)
    # dominant decay exponents per unit tau (from the height of the slowest term)
    rate_h = 2.0
    rate_r = 2.0
    rate_l = 1.0 if rank >= 2 else 2.0
    h_errs = np.zeros(len(taus))
    l_errs = np.zeros(len(taus))
    r_errs = np.zeros(len(taus))
    worst_toda = 0.0
    for _ in range(cases):
        st = TodaState(0.5 * rng.standard_normal(rank), 0.5 * rng.standard_normal(rank),
                       random_gelement(algebra, rng, scale=0.6))
        hs = models.toda_hamiltonian(algebra, st, subset)
        bold_l, _ = models.toda_lax_pair(algebra, st, subset)
        x = rng.standard_normal(rank)
        xi = random_gelement(algebra, rng)
        for j, tau in enumerate(taus):
            scaled = models.scale_state(algebra, st, tau)
            h_errs[j] = max(h_errs[j], abs(models.spin_cm_hamiltonian(r, scaled) - hs))
            l_errs[j] = max(l_errs[j], (models.gauged_lax(algebra, r, st, tau) - bold_l).norm())
            r_errs[j] = max(r_errs[j], (r_apply(r, x + 2 * tau * w, xi)
                                        - const_r_apply(algebra, xi)).norm())
        worst_toda = max(worst_toda, models.toda_lax_residual(algebra, st, subset).norm())
    report = {"suite": "scaling", "algebra": f"A{rank}", "seed": seed, "taus": list(taus),
              "hamiltonian_errors": h_errs.tolist(), "gauged_lax_errors": l_errs.tolist(),
              "r_matrix_errors": r_errs.tolist(), "toda_lax_residual_max": worst_toda}
    ok = worst_toda <= tol_toda
    rates = {}
    for name, errs, rate in (("hamiltonian", h_errs, rate_h),
                             ("gauged_lax", l_errs, rate_l),
                             ("r_matrix", r_errs, rate_r)):
        monotone = bool(errs[0] > errs[1] > errs[2])
        measured = float(np.log(errs[0] / errs[1]) / (taus[1] - taus[0]))
        in_window = bool(abs(measured - rate) <= rate_window * rate)
        rates[name] = {"monotone": monotone, "measured_rate": measured,
                       "predicted_rate": rate, "pass": monotone and in_window}
        ok = ok and monotone and in_window
    report["rates"] = rates
    report["pass"] = bool(ok)
    return report


def reduction_suite(rank: int = 2, pi_prime=None, cases: int = 20, seed: int = 0,
                    tol_slice: float = 1e-9, tol_fd: float = 1e-6,
                    tol_match: float = 1e-8) -> dict:
    algebra = build_algebra("A", rank)
    rng = np.random.default_rng(seed)
    subset = sorted(set(pi_prime)) if pi_prime is not None else list(range(1, rank + 1))
    r = RFamily(algebra, subset)
    flow = models.spin_cm_flow(r)
    worst_rhs = worst_fd = 0.0
    for _ in range(cases):
        s = repulsive_spin(algebra, rng)
        s.r[algebra.simple_idx] = 1.0
        st_red = ReducedState(pole_free_cartan(algebra, rng, lo=1.0),
                              0.4 * rng.standard_normal(rank), s)
        _, _, sdot = models.reduced_eom_rhs(r, st_red)
        worst_rhs = max(worst_rhs, float(np.max(np.abs(sdot.r[algebra.simple_idx]))))
        lift = SpinCMState(st_red.q, st_red.p, gelement(algebra, None, s.r))
        h = 1e-4
        y = flow.pack(lift)
        plus = models.reduce_state(r, flow.unpack(numint.rk4_step(flow.rhs, y, h)))
        minus = models.reduce_state(r, flow.unpack(numint.rk4_step(flow.rhs, y, -h)))
        qd, pd, sd = models.reduced_eom_rhs(r, st_red)
        worst_fd = max(
            worst_fd,
            float(np.max(np.abs((plus.q - minus.q) / (2 * h) - qd))),
            float(np.max(np.abs((plus.p - minus.p) / (2 * h) - pd))),
            ((1.0 / (2 * h)) * (plus.s - minus.s) - sd).norm(),
        )
    # exact reduced flow: slice frozen and consistent with reducing the lift
    rng2 = np.random.default_rng(seed + 1)
    s = repulsive_spin(algebra, rng2)
    s.r[algebra.simple_idx] = 1.0
    st0 = ReducedState(pole_free_cartan(algebra, rng2, lo=1.0),
                       0.4 * rng2.standard_normal(rank), s)
    times = factor.uniform_grid(0.4, 101)
    red = factor.solve_reduced_cm(r, st0, times)
    full = factor.solve_spin_cm(
        r, SpinCMState(st0.q, st0.p, gelement(algebra, None, s.r)), times)
    worst_slice = max(float(np.max(np.abs(st.s.r[algebra.simple_idx] - 1.0)))
                      for st in red.states)
    worst_match = 0.0
    for st_red, st_full in zip(red.states, full.states):
        proj = models.reduce_state(r, st_full)
        worst_match = max(worst_match,
                          float(np.max(np.abs(proj.q - st_red.q))),
                          float(np.max(np.abs(proj.p - st_red.p))),
                          (proj.s - st_red.s).norm())
    ok = (worst_rhs <= 1e-12 and worst_fd <= tol_fd and worst_slice <= tol_slice
          and worst_match <= tol_match and red.status == "complete")
    return {"suite": "reduction", "algebra": f"A{rank}", "seed": seed,
            "slice_rhs_max": worst_rhs, "flow_commutes_fd_max": worst_fd,
            "exact_slice_max": worst_slice, "exact_match_max": worst_match,
            "status": red.status, "pass": bool(ok)}


_SUITES = {
    "mdybe": lambda v: mdybe_suite(v.algebra.rank, v.pi_prime, v.cases, v.seed,
                                   v.tolerance or 1e-10),
    "algebroid": lambda v: algebroid_suite(v.algebra.rank, v.pi_prime, v.cases, v.seed,
                                           v.tolerance or 1e-10),
    "poisson-axioms": lambda v: poisson_axiom_suite(v.algebra.rank, v.pi_prime,
                                                    v.cases, v.seed),
    "lax": lambda v: lax_suite(v.algebra.rank, v.pi_prime, v.cases, v.seed,
                               v.tolerance or 1e-8),
    "scaling": lambda v: scaling_suite(v.algebra.rank, v.pi_prime,
                                       min(v.cases, 50), v.seed),
    "reduction": lambda v: reduction_suite(v.algebra.rank, v.pi_prime,
                                           min(v.cases, 50), v.seed),
}


def run_verify(vcfg: VerifyConfig) -> dict:
    if vcfg.suite not in _SUITES:
        raise ValidationError(f"unknown verify suite '{vcfg.suite}'")
    return _SUITES[vcfg.suite](vcfg)
