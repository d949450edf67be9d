import math

import numpy as np
import pytest

from ccg.data import LabelStats
from ccg.reward import (RewardConfig, anneal, cf_consistency,
                        generate_counterfactual, js_bernoulli, js_divergence,
                        kl_bernoulli, player_reward)

LN2 = math.log(2.0)


class TestBernoulliDivergences:
    def test_kl_zero_at_equal(self):
        p = np.array([0.1, 0.5, 0.9])
        np.testing.assert_allclose(kl_bernoulli(p, p), 0.0, atol=1e-12)

    def test_kl_nonnegative(self, rng):
        p = rng.uniform(0.01, 0.99, 100)
        q = rng.uniform(0.01, 0.99, 100)
        assert (kl_bernoulli(p, q) >= 0).all()

    def test_kl_hand_value(self):
        # KL(Bern(0.5) || Bern(0.25)) = 0.5 ln 2 + 0.5 ln(2/3)
        expected = 0.5 * math.log(0.5 / 0.25) + 0.5 * math.log(0.5 / 0.75)
        assert kl_bernoulli(0.5, 0.25) == pytest.approx(expected, rel=1e-12)

    def test_js_zero_at_equal_and_symmetric(self, rng):
        p = rng.uniform(0.01, 0.99, 50)
        q = rng.uniform(0.01, 0.99, 50)
        np.testing.assert_allclose(js_bernoulli(p, p), 0.0, atol=1e-12)
        np.testing.assert_allclose(js_bernoulli(p, q), js_bernoulli(q, p),
                                   atol=1e-12)

    def test_js_bounded_by_ln2(self, rng):
        p = rng.uniform(0, 1, 200)
        q = rng.uniform(0, 1, 200)
        js = js_bernoulli(p, q)
        assert (js >= 0).all() and (js <= LN2 + 1e-9).all()

    def test_js_approaches_ln2_at_opposite_certainty(self):
        assert js_bernoulli(1e-9, 1 - 1e-9) == pytest.approx(LN2, abs=1e-4)


class TestJsDivergence:
    def test_identical_distributions(self):
        p = np.array([0.2, 0.3, 0.5])
        assert js_divergence(p, p) == 0.0

    def test_disjoint_support_is_ln2(self):
        p = np.array([1.0, 0.0])
        q = np.array([0.0, 1.0])
        assert js_divergence(p, q) == pytest.approx(LN2, rel=1e-12)

    def test_symmetry(self, rng):
        p = rng.random(6)
        p /= p.sum()
        q = rng.random(6)
        q /= q.sum()
        assert js_divergence(p, q) == pytest.approx(js_divergence(q, p))

    def test_validation(self):
        with pytest.raises(ValueError):
            js_divergence(np.array([0.5, 0.5]), np.array([1 / 3] * 3))
        with pytest.raises(ValueError):
            js_divergence(np.array([0.7, 0.7]), np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            js_divergence(np.array([-0.5, 1.5]), np.array([0.5, 0.5]))


class TestCfConsistency:
    def test_range(self, rng):
        for _ in range(20):
            a = rng.uniform(0, 1, 5)
            b = rng.uniform(0, 1, 5)
            c = cf_consistency(a, b)
            assert -LN2 - 1e-9 <= c <= 0.0

    def test_identical_predictions_are_perfectly_consistent(self):
        p = np.array([0.2, 0.8])
        assert cf_consistency(p, p) == pytest.approx(0.0, abs=1e-12)


class TestGenerateCounterfactual:
    def test_perturbation_count(self):
        x = np.arange(1.0, 11.0)  # 10 nonzero features
        sal = np.arange(10.0)
        out = generate_counterfactual(x, sal, 0.3, seed=0)
        changed = np.flatnonzero(out != x)
        assert len(changed) <= math.ceil(0.3 * 10) == 3

    def test_lowest_salience_features_chosen_and_masked(self):
        x = np.ones(10)
        sal = np.arange(10.0)  # features 0,1,2 have lowest salience
        out = generate_counterfactual(x, sal, 0.3, seed=1)
        # ceil(3/2) = 2 masked (lowest salience first), 1 resampled
        assert out[0] == 0.0 and out[1] == 0.0
        assert (out[3:] == 1.0).all()

    def test_resampled_values_come_from_batch_column(self):
        x = np.ones(4)
        sal = np.array([0.0, 1.0, 2.0, 3.0])
        batch = np.full((5, 4), 7.0)
        out = generate_counterfactual(x, sal, 1.0, seed=2, batch=batch)
        n_mask = math.ceil(4 / 2)
        assert (out == 0.0).sum() == n_mask
        assert all(v in (0.0, 7.0) for v in out)

    def test_zero_features_untouched(self):
        x = np.array([0.0, 5.0, 0.0, 5.0])
        out = generate_counterfactual(x, np.ones(4), 1.0, seed=3)
        assert out[0] == 0.0 and out[2] == 0.0

    def test_all_zero_input_returned_unchanged(self):
        x = np.zeros(6)
        out = generate_counterfactual(x, np.zeros(6), 0.5, seed=0)
        np.testing.assert_array_equal(out, x)
        assert out is not x

    def test_deterministic_given_seed(self, rng):
        x = rng.normal(size=20)
        sal = rng.normal(size=20)
        a = generate_counterfactual(x, sal, 0.4, seed=9)
        b = generate_counterfactual(x, sal, 0.4, seed=9)
        np.testing.assert_array_equal(a, b)

    def test_frac_validation(self):
        with pytest.raises(ValueError):
            generate_counterfactual(np.ones(3), np.ones(3), 0.0, seed=0)
        with pytest.raises(ValueError):
            generate_counterfactual(np.ones(3), np.ones(3), 1.5, seed=0)


class TestPlayerReward:
    def setup_method(self):
        self.stats = LabelStats(freq=np.array([9, 1, 4, 3]),
                                rare_set=frozenset({1}), rare_pct=30.0)
        self.subsets = [[0, 1], [2, 3]]

    def test_hand_computed_breakdown(self):
        preds = [np.array([0.9, 0.2, 0.6, 0.4]),
                 np.array([0.3, 0.7, 0.8, 0.1])]
        y = np.array([1, 0, 1, 0])
        pi_cf = np.array([0.8, 0.3, 0.5, 0.5])
        r = player_reward(0, preds, y, self.subsets, pi_cf, self.stats,
                          coeffs=(0.5, 0.8))
        # player 0's labels: {0, 1}; preds (0.9, 0.2) -> (1, 0) both correct
        rare_acc = 0.5 * (1 / (1 + 9) + 1 / (1 + 1))
        assert r.rare_acc == pytest.approx(rare_acc)
        diversity = float(np.mean([
            kl_bernoulli(0.9, 0.3), kl_bernoulli(0.2, 0.7)]))
        assert r.diversity == pytest.approx(diversity)
        cfc = -float(np.mean([js_bernoulli(0.9, 0.8), js_bernoulli(0.2, 0.3)]))
        assert r.cf_consistency == pytest.approx(cfc)
        assert r.total == pytest.approx(rare_acc + 0.5 * diversity + 0.8 * cfc)

    def test_single_player_has_zero_diversity(self):
        preds = [np.array([0.6, 0.4, 0.5, 0.5])]
        r = player_reward(0, preds, np.zeros(4), [[0, 1, 2, 3]],
                          np.array([0.6, 0.4, 0.5, 0.5]), self.stats, (1.0, 1.0))
        assert r.diversity == 0.0

    def test_wrong_predictions_zero_rare_acc(self):
        preds = [np.array([0.9, 0.9, 0.5, 0.5]),
                 np.array([0.5, 0.5, 0.5, 0.5])]
        r = player_reward(0, preds, np.array([0, 0, 0, 0]), self.subsets,
                          preds[0], self.stats, (1.0, 1.0))
        assert r.rare_acc == 0.0


class TestAnneal:
    def test_endpoints(self):
        cfg = RewardConfig(total_steps=100)
        assert anneal(0, 100, cfg) == (1.0, 0.2)
        assert anneal(100, 100, cfg) == pytest.approx((0.2, 1.0))

    def test_midpoint(self):
        cfg = RewardConfig(total_steps=100)
        beta, gamma_r = anneal(50, 100, cfg)
        assert beta == pytest.approx(0.6)
        assert gamma_r == pytest.approx(0.6)

    def test_monotone(self):
        cfg = RewardConfig(total_steps=10)
        betas = [anneal(s, 10, cfg)[0] for s in range(11)]
        gammas = [anneal(s, 10, cfg)[1] for s in range(11)]
        assert betas == sorted(betas, reverse=True)
        assert gammas == sorted(gammas)

    def test_step_out_of_range(self):
        cfg = RewardConfig(total_steps=10)
        with pytest.raises(ValueError):
            anneal(11, 10, cfg)
        with pytest.raises(ValueError):
            anneal(-1, 10, cfg)
