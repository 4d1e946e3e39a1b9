"""Run loop: stopping rule, tracking rule, and the threshold fast path.

The fast path must be indistinguishable from the generic loop on the same
seed, bit for bit; the parity suite here is what licenses using it for the
nested-simulation sweeps.
"""

import math

import numpy as np
import pytest

from partid.errors import DegenerateInstance, DomainError
from partid.lb_solvers import DEFAULT_SETTINGS, inner_inf
from partid.partitions import HalfSpace, Side, Threshold, classify
from partid.spef import DEFAULT_CLAMP, bernoulli, gaussian, poisson
from partid.track_stop import (RunState, StoppingConfig, _run_generic,
                               beta_threshold, d_tracking_next, glr_statistic,
                               run)

G1 = gaussian(1.0)


class TestStoppingConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            StoppingConfig(delta=0.0)
        with pytest.raises(ValueError):
            StoppingConfig(delta=1.0)
        with pytest.raises(ValueError):
            StoppingConfig(delta=0.1, c_const=0.0)
        with pytest.raises(ValueError):
            StoppingConfig(delta=0.1, max_steps=0)

    def test_beta_threshold_shape(self):
        cfg = StoppingConfig(delta=0.1)
        assert beta_threshold(1, cfg) < beta_threshold(10, cfg)
        tight = StoppingConfig(delta=0.001)
        assert beta_threshold(10, tight) > beta_threshold(10, cfg)
        assert beta_threshold(5, cfg) == pytest.approx(
            math.log(math.e * 5 / 0.1))


class TestRunState:
    def test_means_clamp_into_open_domain(self):
        st = RunState(t=2, counts=np.array([2, 2]),
                      sums=np.array([0.0, 2.0]))
        means = st.means([bernoulli(), bernoulli()])
        eps = DEFAULT_CLAMP.epsilon
        np.testing.assert_allclose(means, [eps, 1.0 - eps])

    def test_means_with_unvisited_arm(self):
        st = RunState(t=1, counts=np.array([1, 0]),
                      sums=np.array([3.0, 0.0]))
        means = st.means([G1, G1])
        np.testing.assert_allclose(means, [3.0, 0.0])


class TestDTracking:
    def test_starved_arm_wins_lowest_index_first(self):
        st = RunState(t=100, counts=np.array([3, 50, 47]),
                      sums=np.zeros(3))
        # sqrt(100) - 3/2 = 8.5, so arm 0 is starved
        assert d_tracking_next(st, [0.0, 0.5, 0.5]) == 0

    def test_tracks_largest_deficit_otherwise(self):
        st = RunState(t=100, counts=np.array([20, 40, 40]),
                      sums=np.zeros(3))
        assert d_tracking_next(st, [0.5, 0.25, 0.25]) == 0
        assert d_tracking_next(st, [0.1, 0.6, 0.3]) == 1


class TestGlrStatistic:
    def test_counts_weighted_inner_value(self):
        models = [G1, G1]
        st = RunState(t=4, counts=np.array([3, 1]),
                      sums=np.array([6.0, 0.0]))
        spec = Threshold(1.0)
        got = glr_statistic(models, st, spec)
        want = inner_inf(models, [2.0, 0.0], [3.0, 1.0], spec).value
        assert got == want
        assert got == pytest.approx(3 * 0.5)

    def test_zero_when_means_sit_on_boundary(self):
        models = [G1, G1]
        st = RunState(t=2, counts=np.array([1, 1]),
                      sums=np.array([1.0, 0.0]))
        assert glr_statistic(models, st, Threshold(1.0)) == 0.0


class TestRun:
    CFG = StoppingConfig(delta=0.1, max_steps=100_000)

    def test_easy_threshold_instance(self):
        res = run([G1, G1], [2.0, 0.0], Threshold(1.0), self.CFG,
                  np.random.default_rng(0))
        assert res.declared is Side.A1
        assert res.correct
        assert not res.truncated
        assert res.glr_at_stop >= beta_threshold(res.stop_time, self.CFG)
        assert res.forced_exploration_violations == 0
        assert int(res.final_counts.sum()) == res.stop_time

    def test_below_side_instance(self):
        res = run([G1, G1], [-1.0, 0.0], Threshold(1.0), self.CFG,
                  np.random.default_rng(1))
        assert res.declared is Side.A2
        assert res.correct

    def test_halfspace_instance(self):
        res = run([G1, G1], [0.0, 0.0], HalfSpace((1.0, 1.0), 1.0),
                  self.CFG, np.random.default_rng(2))
        assert res.declared is Side.A1
        assert res.correct

    def test_single_arm(self):
        res = run([G1], [1.5], Threshold(1.0), self.CFG,
                  np.random.default_rng(3))
        assert res.declared is Side.A1
        assert res.correct

    def test_truncation_is_reported(self):
        cfg = StoppingConfig(delta=1e-12, max_steps=25)
        res = run([G1, G1], [2.0, 0.0], Threshold(1.0), cfg,
                  np.random.default_rng(4))
        assert res.truncated
        assert res.stop_time == 25
        assert res.declared in (Side.A1, Side.A2)

    def test_same_seed_reproduces(self):
        a = run([G1, G1], [2.0, 0.0], Threshold(1.0), self.CFG,
                np.random.default_rng(7))
        b = run([G1, G1], [2.0, 0.0], Threshold(1.0), self.CFG,
                np.random.default_rng(7))
        assert a.stop_time == b.stop_time
        assert a.glr_at_stop == b.glr_at_stop
        np.testing.assert_array_equal(a.final_counts, b.final_counts)

    def test_boundary_truth_rejected(self):
        with pytest.raises(DegenerateInstance):
            run([G1, G1], [1.0, 0.0], Threshold(1.0), self.CFG,
                np.random.default_rng(0))

    def test_arm_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            run([G1, G1], [1.0], Threshold(0.5), self.CFG,
                np.random.default_rng(0))

    def test_bad_true_mean_rejected(self):
        with pytest.raises(DomainError):
            run([bernoulli(), bernoulli()], [0.5, 1.5], Threshold(0.6),
                self.CFG, np.random.default_rng(0))

    def test_tracking_concentrates_on_best_arm(self):
        res = run([G1, G1], [2.0, 0.0], Threshold(1.0),
                  StoppingConfig(delta=1e-3), np.random.default_rng(11))
        # w* = (1, 0): the share of arm 0 should dominate
        assert res.final_counts[0] / res.stop_time > 0.6


PARITY_CASES = [
    ("gaussian_above", [gaussian(0.5), gaussian(1.5)], [2.0, 0.0], 1.0),
    ("gaussian_below", [G1, G1], [0.0, -0.5], 1.0),
    ("bernoulli_above", [bernoulli(), bernoulli()], [0.8, 0.3], 0.55),
    ("bernoulli_below", [bernoulli(), bernoulli()], [0.2, 0.35], 0.6),
    ("poisson_above", [poisson(), poisson()], [2.0, 0.5], 1.2),
    ("mixed_three", [G1, bernoulli(), poisson()], [0.2, 0.4, 0.9], 0.6),
    ("single_arm", [G1], [1.8], 1.0),
]


@pytest.mark.parametrize("name,models,mu,u", PARITY_CASES,
                         ids=[c[0] for c in PARITY_CASES])
@pytest.mark.parametrize("seed", [1, 2])
def test_threshold_fast_path_parity(name, models, mu, u, seed):
    spec = Threshold(u)
    cfg = StoppingConfig(delta=0.05, max_steps=4000)
    mu_arr = np.asarray(mu, dtype=float)
    fast = run(models, mu, spec, cfg, np.random.default_rng(seed))
    slow = _run_generic(models, mu_arr, spec, cfg,
                        np.random.default_rng(seed), DEFAULT_SETTINGS,
                        DEFAULT_CLAMP, classify(spec, mu_arr))
    assert fast.stop_time == slow.stop_time
    assert fast.declared is slow.declared
    assert fast.correct == slow.correct
    assert fast.glr_at_stop == slow.glr_at_stop
    assert fast.truncated == slow.truncated
    assert fast.forced_exploration_violations == \
        slow.forced_exploration_violations
    np.testing.assert_array_equal(fast.final_counts, slow.final_counts)
    np.testing.assert_array_equal(fast.final_means, slow.final_means)


def test_threshold_fast_path_parity_under_truncation():
    spec = Threshold(1.0)
    cfg = StoppingConfig(delta=1e-9, max_steps=60)
    mu = np.array([1.3, 0.9])
    fast = run([G1, G1], mu, spec, cfg, np.random.default_rng(13))
    slow = _run_generic([G1, G1], mu, spec, cfg, np.random.default_rng(13),
                        DEFAULT_SETTINGS, DEFAULT_CLAMP, classify(spec, mu))
    assert fast.truncated and slow.truncated
    assert fast.stop_time == slow.stop_time
    assert fast.declared is slow.declared
    assert fast.glr_at_stop == slow.glr_at_stop
    np.testing.assert_array_equal(fast.final_counts, slow.final_counts)
    np.testing.assert_array_equal(fast.final_means, slow.final_means)


def test_fast_path_validates_level_against_domains():
    cfg = StoppingConfig(delta=0.1)
    with pytest.raises(DomainError, match="outside arm 1 domain"):
        run([G1, bernoulli()], [3.0, 0.5], Threshold(2.0), cfg,
            np.random.default_rng(0))
