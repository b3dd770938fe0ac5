import numpy as np
import pytest

from optsample.bounds import myopic_lower
from optsample.costs import build_action_costs
from optsample.models import SamplingModel, discrete_observations
from optsample.sim import (
    RunawayEpisodeError,
    change_time_chisquare,
    episode_rng,
    monte_carlo_evaluate,
    simulate_episode,
)
from optsample.solver import Policy, make_grid


def _stop_everywhere(X=2, n=11):
    g = make_grid(X, n)
    return Policy(g, np.zeros(g.size, dtype=int))


def test_stop_in_target_is_free(ex1):
    tr = simulate_episode(ex1, _stop_everywhere(), [1, 0], episode_rng(0, 0))
    assert tr.total == 0 and tr.measurement_cost == 0 and tr.actions == [0]


def test_immediate_alarm_before_change(ex1):
    s = monte_carlo_evaluate(ex1, _stop_everywhere(), [0, 1], 200, seed=3)
    assert s.means["false_alarm"] == 17 and s.std_errors["false_alarm"] == 0


def test_immediate_stop_in_target_summary(ex1):
    s = monte_carlo_evaluate(ex1, _stop_everywhere(), [1, 0], 50, seed=1)
    assert all(v == 0 for v in s.means.values())


def test_never_stopping_policy_is_runaway(ex1):
    g = make_grid(2, 11)
    never = Policy(g, np.full(g.size, 4))
    with pytest.raises(RunawayEpisodeError):
        simulate_episode(ex1, never, [0, 1], episode_rng(0, 0), cap=1000)
    s = monte_carlo_evaluate(ex1, never, [0, 1], 3, seed=0, cap=500)
    assert s.runaway == 3


def test_epochs_follow_intervals(ex1, ex1_solution):
    for i in range(20):
        tr = simulate_episode(ex1, ex1_solution.policy, [0, 1], episode_rng(5, i))
        steps = np.diff(tr.epochs)
        expected = [ex1.intervals[u - 1] for u in tr.actions[:-1]]
        np.testing.assert_array_equal(steps, expected)
        assert tr.actions[-1] == 0 and all(a > 0 for a in tr.actions[:-1])


def test_regression_trace_seed7(ex1, ex1_solution):
    tr = simulate_episode(ex1, ex1_solution.policy, [0, 1], episode_rng(7, 0))
    assert tr.change_time == 5
    assert tr.epochs == [0, 10, 11]
    assert tr.actions == [4, 1, 0]
    assert tr.total == pytest.approx(5.2)
    assert (tr.delay_cost, tr.false_alarm_cost, tr.measurement_cost) == pytest.approx((2.4, 0.0, 2.8))


def test_summary_additivity_and_reproducibility(ex1, ex1_solution):
    a = monte_carlo_evaluate(ex1, ex1_solution.policy, [0, 1], 3000, seed=11)
    b = monte_carlo_evaluate(ex1, ex1_solution.policy, [0, 1], 3000, seed=11, workers=3)
    assert a.to_dict() == b.to_dict()
    parts = sum(a.means[k] for k in ("delay", "false_alarm", "measurement"))
    assert a.means["total"] == pytest.approx(parts, abs=1e-9)


def test_optimal_beats_myopic_lower(ex1, ex1_solution):
    n = 5000
    opt = monte_carlo_evaluate(ex1, ex1_solution.policy, [0, 1], n, seed=2)
    low = monte_carlo_evaluate(ex1, myopic_lower(build_action_costs(ex1), ex1_solution.grid), [0, 1], n, seed=2)
    pooled = np.hypot(opt.std_errors["total"], low.std_errors["total"])
    assert opt.total <= low.total + 3 * pooled


def test_change_time_fit_three_states(ex4):
    g = make_grid(3, 10)
    s = monte_carlo_evaluate(ex4, Policy(g, np.zeros(g.size, dtype=int)), [0, 0, 1], 5000, seed=4)
    _, p = change_time_chisquare(s.change_times, ex4.A, [0, 0, 1])
    assert p > 0.01


def test_generic_costs_match_cost_vectors():
    """One-symbol channel: the belief path is deterministic, so E[cost] has a closed form."""
    from optsample.costs import CostSpec

    A = np.array([[1.0, 0.0], [0.1, 0.9]])
    c = np.array([[0.0, 1.0], [5.0, 2.0]])
    m = np.array([[0.5], [0.25]])
    model = SamplingModel(A, discrete_observations([[1.0], [1.0]]), (3,), CostSpec(c, m))
    g = make_grid(2, 5)
    pol = Policy(g, np.array([1, 1, 1, 0, 0]))  # pi(1) = 0.5 -> sample; 0.6355 -> stop
    pi0 = np.array([0.5, 0.5])
    C = build_action_costs(model).C
    exact = C[1] @ pi0 + C[0] @ (np.linalg.matrix_power(A, 3).T @ pi0)
    s = monte_carlo_evaluate(model, pol, pi0, 20000, seed=8)
    assert abs(s.total - exact) < 4 * s.std_errors["total"]
    with pytest.raises(RunawayEpisodeError):
        simulate_episode(model, Policy(g, np.ones(5, dtype=int)), pi0, episode_rng(0, 0), cap=50)
