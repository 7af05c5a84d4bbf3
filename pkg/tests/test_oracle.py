import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from ucblab import (
    BanditInstance,
    GrowthCurve,
    classify_regime,
    error_budget,
    growth_curve,
    lai_robbins_regret,
    minimax_instance,
    oracle_solution,
    solve_n_star,
)
from ucblab.oracle import Regime

FIG1_T = 3000
FIG1_GAMMA = math.sqrt(2 * math.log(FIG1_T))

# n_*, n*_2, Reg*, D_* for the two-arm fig1 preset instance, computed once with a
# 40-digit mpmath root finder and frozen here.
FROZEN_FIG1 = {
    0.01: (2505.4740732651902, 494.5259267348098, 4.945259267348098, 0.90839280538994287),
    0.05: (2951.3415115168827, 48.658488483117307, 2.4329244241558654, 0.98586310896524349),
    0.10: (2986.0978796491267, 13.902120350873313, 1.3902120350873313, 0.99568215000023743),
    0.25: (2997.581443853718, 2.4185561462820398, 0.60463903657050994, 0.99921671419755073),
}


def brentq_oracle(gaps, sigma, T, gamma):
    """Independent solver: Brent's method on the unscaled equation."""
    gaps = np.asarray(gaps, float)

    def f(n):
        return np.sum(n / (1 + np.sqrt(n) * gaps / (sigma * gamma)) ** 2) - T

    return brentq(f, T / gaps.size * (1 - 1e-9), T * (1 + 1e-9), xtol=1e-14, rtol=1e-15)


def random_instance(rng, K_max=64):
    K = int(rng.integers(1, K_max + 1))
    sigma = float(rng.uniform(0.05, 2.0))
    gaps = np.exp(rng.uniform(np.log(1e-4), np.log(5.0), size=K))
    gaps[rng.random(K) < 0.2] = 0.0
    gaps[0] = 0.0
    return BanditInstance.from_gaps(gaps, sigma)


instances = st.builds(
    lambda seed: random_instance(np.random.default_rng(seed)),
    st.integers(0, 2**32 - 1),
)
horizons = st.floats(10.0, 1e6)
gammas = st.floats(0.5, 8.0)


@pytest.mark.parametrize("delta", sorted(FROZEN_FIG1))
def test_fig1_frozen_values(delta):
    inst = BanditInstance.from_gaps([0, delta], 0.1)
    sol = oracle_solution(inst, FIG1_T, FIG1_GAMMA)
    n, n2, reg, d = FROZEN_FIG1[delta]
    assert sol.n_star == pytest.approx(n, rel=1e-11)
    assert sol.n_star_a[1] == pytest.approx(n2, rel=1e-9)
    assert sol.reg_star == pytest.approx(reg, rel=1e-9)
    assert sol.d_star == pytest.approx(d, rel=1e-11)


def test_four_arm_frozen_value():
    inst = BanditInstance.from_gaps([0, 0.3, 0.3, 1.0], 1.0)
    sol = oracle_solution(inst, 1000, 2.5)
    assert sol.n_star == pytest.approx(909.41192851482851, rel=1e-11)
    assert sol.reg_star == pytest.approx(30.907209355166243, rel=1e-9)
    assert sol.n_star_a[1] == sol.n_star_a[2]


def test_dual_solver_fig1():
    inst = BanditInstance.from_gaps([0, 0.1], 0.1)
    ours = oracle_solution(inst, FIG1_T, FIG1_GAMMA)
    n = brentq_oracle(inst.gaps, 0.1, FIG1_T, FIG1_GAMMA)
    assert ours.n_star == pytest.approx(n, rel=1e-9)
    s = 0.1 / (0.1 * FIG1_GAMMA)
    assert ours.reg_star == pytest.approx(0.1 * n / (1 + math.sqrt(n) * s) ** 2, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(instances, horizons, gammas)
def test_dual_solver_random(inst, T, gamma):
    assert solve_n_star(inst, T, gamma) == pytest.approx(
        brentq_oracle(inst.gaps, inst.sigma, T, gamma), rel=1e-9
    )


@pytest.mark.parametrize("K", [1, 2, 4, 17, 64])
@pytest.mark.parametrize("T", [1.0, 1000.0, 12345.678])
def test_all_optimal_gives_T_over_K(K, T):
    sol = oracle_solution(BanditInstance([0.3] * K, 0.7), T, 1.9)
    assert abs(sol.n_star - T / K) <= 1e-10 * T / K
    assert sol.reg_star == 0.0
    assert sol.d_star == pytest.approx(1.0, abs=1e-14)


def test_K4_example():
    assert solve_n_star(BanditInstance([0.0] * 4, 1.0), 1000, 3.0) == 250.0


def test_single_arm():
    sol = oracle_solution(BanditInstance([2.0], 0.5), 77, 2.0)
    assert sol.n_star == 77
    assert sol.d_star == 1.0
    assert sol.reg_star == 0.0


def two_arm_identity_residual(theta, rho, T):
    inst = BanditInstance.from_gaps([0, math.sqrt(theta * math.log(T) / T)], 1.0)
    n = solve_n_star(inst, T, math.sqrt(rho * math.log(T)))
    x = n / T
    return 1 / math.sqrt(1 - x) - 1 / math.sqrt(x) - math.sqrt(theta / rho)


def test_two_arm_identity_random():
    rng = np.random.default_rng(7)
    for _ in range(100):
        theta, rho = rng.uniform(0.05, 20.0, size=2)
        assert abs(two_arm_identity_residual(theta, rho, 5000.0)) <= 1e-9


@settings(max_examples=200, deadline=None)
@given(instances, horizons, gammas)
def test_solution_invariants(inst, T, gamma):
    sol = oracle_solution(inst, T, gamma)
    K, k0 = inst.K, len(inst.optimal_arms)
    assert T / K * (1 - 1e-12) <= sol.n_star <= T / k0 * (1 + 1e-12)
    assert abs(np.sum(sol.n_star_a) - T) <= 1e-10 * T
    assert np.all(sol.n_star_a[list(inst.optimal_arms)] == sol.n_star)
    order = np.argsort(inst.gaps, kind="stable")
    g, n = inst.gaps[order], sol.n_star_a[order]
    distinct = np.diff(g) > 0
    assert np.all(np.diff(n)[distinct] < 0)
    assert (k0 / K) ** (1 / 3) - 1e-12 <= sol.d_star <= 1 + 1e-12
    assert sol.mu_plus == pytest.approx(inst.mu_star + inst.sigma * gamma / math.sqrt(sol.n_star))


def curve_property_violations(inst, gamma, T, ts):
    """Return the number of violated growth-curve properties on a grid."""
    curve = GrowthCurve(inst, gamma)
    base = curve.solution(T)
    sols = growth_curve(inst, gamma, ts)
    bad = 0
    prev = None
    for t, sol in zip(ts, sols):
        if prev is not None:
            bad += not (sol.n_star > prev.n_star and np.all(sol.n_star_a > prev.n_star_a))
        prev = sol
        k0 = len(inst.optimal_arms)
        bad += not (t / inst.K * (1 - 1e-12) <= sol.n_star <= t / k0 * (1 + 1e-12))
        bad += not ((k0 / inst.K) ** (1 / 3) - 1e-12 <= sol.d_star <= 1 + 1e-12)
        if t <= T:
            lhs = 1 - sol.n_star_a / base.n_star_a
            rhs = (1 - t / T) / base.d_star
        else:
            lhs = 1 - base.n_star_a / sol.n_star_a
            rhs = np.sqrt(base.n_star_a / base.n_star) / base.d_star * (t / T - 1)
        bad += int(np.any(lhs > rhs + 1e-10))
        if base.reg_star > 0:
            bad += abs(sol.reg_star / base.reg_star - 1) > abs(t / T - 1) + 1e-10
        shift = sol.n_star_a**-0.5 - sol.n_star_a[0] ** -0.5
        ref = base.n_star_a**-0.5 - base.n_star_a[0] ** -0.5
        bad += not np.allclose(shift, ref, rtol=1e-9, atol=1e-9 * base.n_star_a[0] ** -0.5)
    return bad


@settings(max_examples=40, deadline=None)
@given(instances, st.floats(100.0, 1e5), gammas)
def test_growth_curve_properties(inst, T, gamma):
    ts = np.linspace(0.05 * T, 3 * T, 50)
    assert curve_property_violations(inst, gamma, T, ts) == 0


def test_growth_curve_at_T_matches_oracle():
    inst = BanditInstance.from_gaps([0, 0.05, 0.2], 0.1)
    sol = oracle_solution(inst, 3000, FIG1_GAMMA)
    (g,) = growth_curve(inst, FIG1_GAMMA, [3000])
    assert g.n_star == sol.n_star
    assert np.array_equal(g.n_star_a, sol.n_star_a)


def test_growth_curve_grid_validation():
    inst = BanditInstance.from_gaps([0, 0.1], 0.1)
    with pytest.raises(ValueError):
        growth_curve(inst, 2.0, [10, 5])
    with pytest.raises(ValueError):
        growth_curve(inst, 2.0, [0, 5])


def test_domain_errors():
    inst = BanditInstance.from_gaps([0, 0.1], 0.1)
    with pytest.raises(ValueError):
        solve_n_star(BanditInstance([0, 1], 0.0), 10, 2)
    with pytest.raises(ValueError):
        solve_n_star(inst, 10, 0.0)
    with pytest.raises(ValueError):
        solve_n_star(inst, -1, 2.0)


def test_error_budget_values():
    inst = BanditInstance.from_gaps([0, 0.1], 0.1)
    b = error_budget(inst, 3000, 3.0)
    ll = math.log(math.log(3000))
    assert b.err_theta == pytest.approx(
        (math.sqrt(math.log(3.0)) + math.sqrt(ll)) / 3 + 2 / 3000 + 1 / 9
    )
    assert b.vartheta_star == pytest.approx(3000 * math.exp(-4.5) / 9)
    assert b.eps_TK == pytest.approx(math.sqrt(ll / math.log(3000)) + 2 / 3000)


def test_error_budget_domain():
    inst = BanditInstance.from_gaps([0, 0.1], 0.1)
    with pytest.raises(ValueError):
        error_budget(inst, 3000, 2.0)
    assert oracle_solution(inst, 3000, 2.0).budget is None
    assert oracle_solution(inst, 3000, 3.0).budget is not None


@settings(max_examples=50, deadline=None)
@given(instances, st.floats(20.0, 1e6))
def test_error_budget_nonincreasing_in_gamma(inst, T):
    grid = np.linspace(math.e, 30.0, 60)
    errs = [error_budget(inst, T, g).err_theta for g in grid]
    assert np.all(np.diff(errs) <= 1e-15)
    assert all(math.isfinite(e) and e >= 0 for e in errs)


def test_lai_robbins():
    assert lai_robbins_regret(BanditInstance([1, 1], 0.3), 100) == 0.0
    assert lai_robbins_regret(BanditInstance.from_gaps([0, 1], 1.0), math.e) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        lai_robbins_regret(BanditInstance([0, -1], 1.0), 1)


def test_lai_robbins_decreasing_over_fig1_grid():
    vals = [
        lai_robbins_regret(BanditInstance.from_gaps([0, d], 0.1), FIG1_T)
        for d in np.arange(0.01, 0.2501, 0.01)
    ]
    assert np.all(np.diff(vals) < 0)
    assert vals[0] == pytest.approx(2 * 0.01 * math.log(FIG1_T) / 0.01)


def test_minimax_instance():
    inst = minimax_instance(2, 3000, 0.1)
    assert inst.gaps[1] == pytest.approx(0.01033206501957232, rel=1e-12)
    assert minimax_instance(2, 3000, 0.2).gaps[1] == pytest.approx(2 * inst.gaps[1])
    for K in (2, 5, 10):
        m = minimax_instance(K, 3000, 0.1)
        sol = oracle_solution(m, 3000, math.sqrt(2 * math.log(3000)))
        floor = (1 - 1 / K) * 0.1 * math.sqrt(2 * 3000 * K * math.log(3000)) / 4
        assert sol.reg_star >= floor
    with pytest.raises(ValueError):
        minimax_instance(1, 100, 1.0)


def test_classify_regime():
    assert classify_regime(BanditInstance([0, 0], 1.0), 100, 1.0) is Regime.OUT_OF_CLASS
    fig1 = BanditInstance.from_gaps([0, 0.25], 0.1)
    assert classify_regime(fig1, FIG1_T, 3.0) is Regime.LR_ACCURATE
    T, sigma = 3000, 0.1
    loose = BanditInstance.from_gaps([0, 0.5 * sigma * math.sqrt(2 * math.log(T) / T)], sigma)
    for L in (1.0, 2.0, 10.0):
        assert classify_regime(loose, T, L) is Regime.LR_LOOSE


def test_growth_curve_scale_walk():
    inst = BanditInstance.from_gaps([0, 0.02, 0.07], 0.1)
    curve = GrowthCurve(inst, 3.0)
    for t in (10.0, 500.0, 40000.0):
        n = curve.n_star(t)
        assert curve.horizon_at_scale(n) == pytest.approx(t, rel=1e-11)
        assert np.allclose(curve.pulls_at_scale(n), curve.n_star_a(t))
