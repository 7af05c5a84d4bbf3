import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ucblab import (
    UCB1,
    BanditInstance,
    GrowthCurve,
    UcbConfig,
    compute_W,
    event_report,
    pseudo_regret,
    simulate_batch,
    simulate_ucb1,
    vanilla_regret,
)
from ucblab.bandit import events_from_stats, sandwich_bounds

from _helpers import make_traj


small_instances = st.builds(
    lambda mu, sigma: BanditInstance(mu, sigma),
    st.lists(st.floats(-1, 1), min_size=1, max_size=6),
    st.floats(0.0, 1.0),
)


class TestInstance:
    def test_derived_fields(self):
        inst = BanditInstance([0.2, 0.5, 0.5, -1.0], 0.3)
        assert inst.K == 4
        assert inst.mu_star == 0.5
        assert np.allclose(inst.gaps, [0.3, 0, 0, 1.5])
        assert inst.optimal_arms == (1, 2)

    @pytest.mark.parametrize(
        "mu,sigma", [([], 1.0), ([0.0, math.nan], 1.0), ([0.0, math.inf], 1.0), ([0.0], -0.1)]
    )
    def test_rejects_bad_input(self, mu, sigma):
        with pytest.raises(ValueError):
            BanditInstance(mu, sigma)

    def test_from_gaps(self):
        inst = BanditInstance.from_gaps([0, 0.25], 0.1)
        assert inst.mu_star == 0.0
        assert np.array_equal(inst.gaps, [0.0, 0.25])
        with pytest.raises(ValueError):
            BanditInstance.from_gaps([0.1, 0.2], 0.1)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            UcbConfig(T=0, gamma=1.0)
        with pytest.raises(ValueError):
            UcbConfig(T=10, gamma=0.0)
        with pytest.raises(ValueError):
            UcbConfig(T=10, gamma=1.0, seed=-1)
        with pytest.raises(ValueError):
            UcbConfig(T=10, gamma=1.0, seed=2**64)
        with pytest.raises(ValueError):
            UcbConfig(T=10, gamma=1.0, tie_break="first")
        assert UcbConfig(T=10, gamma=1.0, seed=2**64 - 1).seed == 2**64 - 1

    def test_T_below_K(self):
        with pytest.raises(ValueError):
            simulate_ucb1(BanditInstance([0, 0, 0], 1.0), UcbConfig(T=2, gamma=1.0))


class TestSimulate:
    def test_noiseless_greedy(self):
        traj = simulate_ucb1(BanditInstance([0, -1], 0.0), UcbConfig(T=10, gamma=2.0))
        assert traj.final_counts.tolist() == [9, 1]

    def test_single_arm(self):
        inst = BanditInstance([0.4], 0.5)
        traj = simulate_ucb1(inst, UcbConfig(T=50, gamma=2.0, seed=3))
        assert traj.final_counts.tolist() == [50]
        assert pseudo_regret(inst, traj) == 0.0

    @settings(max_examples=60, deadline=None)
    @given(
        small_instances,
        st.integers(0, 300),
        st.floats(0.1, 5.0),
        st.integers(0, 2**64 - 1),
        st.sampled_from(["lowest_index", "random"]),
    )
    def test_trajectory_invariants(self, inst, extra, gamma, seed, tie_break):
        T = inst.K + extra
        traj = simulate_ucb1(inst, UcbConfig(T, gamma, seed, tie_break))
        assert traj.final_counts.sum() == T
        assert np.all(traj.counts[:, 0] == 0)
        inc = np.diff(traj.counts, axis=1)
        assert np.all((inc == 0) | (inc == 1))
        assert np.all(inc.sum(axis=0) == 1)
        assert np.array_equal(traj.actions[: inst.K], np.arange(inst.K))
        for a in range(inst.K):
            assert traj.means[a] == pytest.approx(np.mean(traj.rewards[traj.actions == a]), abs=1e-12)
        # index maximality, re-checked from the record
        sums = np.zeros(inst.K)
        for t, a in enumerate(traj.actions):
            n = traj.counts[:, t]
            if t >= inst.K:
                index = sums / n + inst.sigma * gamma / np.sqrt(n)
                assert index[a] >= index.max() - 1e-12
            sums[a] += traj.rewards[t]
        assert np.allclose(traj.rewards, inst.means[traj.actions] + inst.sigma * traj.noise)

    def test_lowest_index_tie_break(self):
        traj = simulate_ucb1(BanditInstance([0, 0, 0], 0.0), UcbConfig(T=9, gamma=1.0))
        # sigma = 0 removes the bonus, so every later round is a three-way tie
        assert traj.actions.tolist() == [0, 1, 2] + [0] * 6

    def test_random_tie_break_is_seeded(self):
        inst = BanditInstance([0, 0, 0, 0], 0.0)
        a = simulate_ucb1(inst, UcbConfig(40, 1.0, 5, "random")).actions
        b = simulate_ucb1(inst, UcbConfig(40, 1.0, 5, "random")).actions
        c = simulate_ucb1(inst, UcbConfig(40, 1.0, 6, "random")).actions
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_determinism(self):
        inst = BanditInstance([0.0, -0.05, -0.1], 0.1)
        cfg = UcbConfig(T=500, gamma=3.0, seed=123)
        a, b = simulate_ucb1(inst, cfg), simulate_ucb1(inst, cfg)
        assert np.array_equal(a.actions, b.actions)
        assert np.array_equal(a.rewards, b.rewards)

    def test_batch_matches_single_runs(self):
        inst = BanditInstance([0.0, -0.05, -0.1], 0.1)
        seeds = [0, 1, 2**63 + 5]
        batch = simulate_batch(inst, 400, 2.5, seeds)
        for r, s in enumerate(seeds):
            single = simulate_ucb1(inst, UcbConfig(400, 2.5, s))
            assert np.array_equal(batch.trajectory(r).actions, single.actions)
            assert np.array_equal(batch.trajectory(r).rewards, single.rewards)
            assert np.array_equal(batch.trajectory(r).counts, single.counts)

    def test_noise_record_partitions_noise(self):
        traj = simulate_ucb1(BanditInstance([0, -0.1], 0.1), UcbConfig(100, 2.0, 9))
        rec = traj.noise_record
        assert [len(x) for x in rec] == traj.final_counts.tolist()
        assert np.array_equal(rec[1], traj.noise[traj.actions == 1])


class TestRegret:
    def test_pseudo_regret_examples(self):
        inst = BanditInstance([0.0, -0.5], 1.0)
        traj = make_traj([0, 1] + [0] * 5 + [1] * 2 + [0], np.zeros(10), inst.mu, 1.0)
        assert traj.final_counts.tolist() == [7, 3]
        assert pseudo_regret(inst, traj) == pytest.approx(1.5)
        same = BanditInstance([0.2, 0.2], 1.0)
        assert pseudo_regret(same, simulate_ucb1(same, UcbConfig(30, 1.0))) == 0.0

    def test_vanilla_equals_pseudo_without_noise(self):
        inst = BanditInstance([0.0, -0.3, -0.1], 0.0)
        traj = simulate_ucb1(inst, UcbConfig(50, 1.0))
        assert vanilla_regret(inst, traj) == pytest.approx(pseudo_regret(inst, traj), abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**64 - 1), st.floats(0.01, 2.0))
    def test_vanilla_identity(self, seed, sigma):
        inst = BanditInstance([0.0, -0.2, -0.05], sigma)
        traj = simulate_ucb1(inst, UcbConfig(200, 2.0, seed))
        expected = pseudo_regret(inst, traj) - sigma * math.fsum(traj.noise)
        got = vanilla_regret(inst, traj)
        assert got == pytest.approx(expected, rel=1e-12, abs=1e-12 * max(1.0, sigma * 200))

    def test_dimension_mismatch(self):
        traj = simulate_ucb1(BanditInstance([0, -1], 1.0), UcbConfig(10, 1.0))
        with pytest.raises(ValueError):
            pseudo_regret(BanditInstance([0, -1, -2], 1.0), traj)
        with pytest.raises(ValueError):
            vanilla_regret(BanditInstance([0], 1.0), traj)


class TestW:
    def test_zero_noise(self):
        traj = make_traj([0, 1, 0], [0, 0, 0], [0, -1], 1.0)
        assert np.array_equal(compute_W(traj), [0.0, 0.0])

    def test_single_noise(self):
        traj = make_traj([0], [-1.7], [0.0], 1.0)
        assert compute_W(traj)[0] == pytest.approx(1.7)

    def test_hand_computed(self):
        traj = make_traj([0, 0, 0], [1.0, 1.0, -3.0], [0.0], 1.0)
        # prefixes: 1, 2/sqrt2, -1/sqrt3
        assert compute_W(traj)[0] == pytest.approx(math.sqrt(2))

    def test_batch_W_matches(self):
        inst = BanditInstance([0, -0.05, -0.1], 0.1)
        batch = simulate_batch(inst, 300, 2.0, [4, 5, 6])
        W = batch.W()
        for r in range(3):
            assert np.allclose(W[r], compute_W(batch.trajectory(r)), rtol=1e-12)

    def test_W_concentration(self):
        rng = np.random.default_rng(11)
        n = 10_000
        vals = [
            np.max(np.abs(np.cumsum(x) / np.sqrt(np.arange(1, n + 1))))
            for x in rng.standard_normal((200, n))
        ]
        assert 1.2 <= np.mean(vals) <= 3.0


class TestEvents:
    def test_sigma_zero_rejected(self):
        inst = BanditInstance([0, -1], 0.0)
        traj = simulate_ucb1(inst, UcbConfig(10, 1.0))
        with pytest.raises(ValueError):
            event_report(inst, UcbConfig(10, 1.0), traj, None)

    def test_zero_noise_e0_holds(self):
        inst = BanditInstance([0, -0.1], 0.1)
        traj = make_traj([0, 1] + [0] * 8, np.zeros(10), inst.mu, 0.1)
        rep = event_report(inst, UcbConfig(10, 2.0), traj, GrowthCurve(inst, 2.0))
        assert rep.e0_holds
        assert np.array_equal(rep.W, [0, 0])

    @pytest.mark.parametrize("gaps", [[0, 0.1], [0, 0.02, 0.3], [0, 0, 0]])
    def test_W_zero_threshold_is_T(self, gaps):
        inst = BanditInstance.from_gaps(gaps, 0.1)
        curve = GrowthCurve(inst, 3.0)
        T = 1000
        rep = events_from_stats(inst, 3.0, T, np.ones(inst.K), np.zeros(inst.K), curve)
        assert rep.t_plus_threshold == pytest.approx(T, rel=1e-10)
        assert rep.t_plus_threshold >= T
        upper, _ = sandwich_bounds(rep, curve, 3.0)
        assert np.allclose(upper, curve.n_star_a(T) + 1, rtol=1e-9)

    def test_thresholds_are_monotone_boundaries(self):
        inst = BanditInstance.from_gaps([0, 0.05], 0.1)
        gamma = math.sqrt(2 * math.log(3000))
        curve = GrowthCurve(inst, gamma)
        W = np.array([0.8, 1.3])
        rep = events_from_stats(inst, gamma, 3000, np.array([2950, 50]), W, curve)
        shrink = np.maximum(1 - W / gamma, 0) ** 2
        inflate = (1 + W / gamma) ** 2
        tp, tm = rep.t_plus_threshold, rep.t_minus_threshold
        assert shrink @ curve.n_star_a(tp) > 3000 - 1e-6
        assert shrink @ curve.n_star_a(tp * (1 - 1e-6)) < 3000
        assert inflate @ curve.n_star_a(tm) + 2 < 3000 + 1e-6
        assert inflate @ curve.n_star_a(tm * (1 + 1e-6)) + 2 > 3000
        assert tm < 3000 < tp

    def test_no_threshold_when_W_exceeds_gamma(self):
        inst = BanditInstance.from_gaps([0, 0.05], 0.1)
        curve = GrowthCurve(inst, 2.0)
        rep = events_from_stats(inst, 2.0, 100, np.array([90, 10]), np.array([3.0, 3.0]), curve)
        assert rep.t_plus_threshold is None

    def test_sandwich_on_simulated_runs(self):
        inst = BanditInstance.from_gaps([0, 0.1], 0.1)
        cfg_gamma = math.sqrt(2 * math.log(3000))
        curve = GrowthCurve(inst, cfg_gamma)
        for seed in range(30):
            cfg = UcbConfig(3000, cfg_gamma, seed)
            traj = simulate_ucb1(inst, cfg)
            rep = event_report(inst, cfg, traj, curve)
            upper, lower = sandwich_bounds(rep, curve, cfg_gamma)
            if upper is not None:
                assert np.all(traj.final_counts <= upper)
            if lower is not None:
                assert np.all(traj.final_counts >= lower)


class TestEstimator:
    def test_fit(self):
        inst = BanditInstance([0.0, -0.2], 0.1)
        est = UCB1(random_state=4).fit(inst, 200)
        assert est.gamma_ == pytest.approx(math.sqrt(2 * math.log(200)))
        assert est.counts_.sum() == 200
        assert est.pseudo_regret_ == pytest.approx(0.2 * est.counts_[1])
        same = simulate_ucb1(inst, UcbConfig(200, est.gamma_, 4))
        assert np.array_equal(est.trajectory_.actions, same.actions)

    def test_params_roundtrip(self):
        est = UCB1(gamma=3.0, tie_break="random", random_state=1)
        assert est.get_params() == {"gamma": 3.0, "tie_break": "random", "random_state": 1}
        est.set_params(gamma=1.5)
        assert est.gamma == 1.5
