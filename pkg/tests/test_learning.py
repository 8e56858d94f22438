import numpy as np
import pytest

from detpond.control import RandomAllowedPolicy
from detpond.hmdp import run_trace
from detpond.learning import (LearnParams, QTable, _backup, evaluate,
                              q_learn)

import learn_oracle
import tank_fixture


def test_greedy_mode_ties_to_larger_outflow():
    qt = QTable(1, 1, 1, 3, init=5.0)
    assert qt.greedy_mode(0, 0, 0, [0, 1, 2]) == 2
    qt.q[0, 0, 0] = [1.0, 3.0, 3.0]
    assert qt.greedy_mode(0, 0, 0, [0, 1, 2]) == 0
    assert qt.greedy_mode(0, 0, 0, [1, 2]) == 2
    qt.q[0, 0, 0] = [2.0, 1.0, 9.0]
    assert qt.greedy_mode(0, 0, 0, [0, 1, 2]) == 1


def test_policy_table_marks_unvisited():
    qt = QTable(2, 2, 1, 2, init=9.0)
    tab = qt.policy_table()
    assert np.all(tab == -1)
    qt.visits[0, 0, 0, 0] = 3
    qt.q[0, 0, 0, 0] = 4.0
    tab = qt.policy_table()
    assert tab[0, 0, 0] == 0
    assert tab[1, 1, 0] == -1
    # with both actions visited and tied values the larger mode wins
    qt.visits[1, 0, 0] = [1, 1]
    qt.q[1, 0, 0] = [7.0, 7.0]
    assert qt.policy_table()[1, 0, 0] == 1


def test_backup_hand_example():
    qt = QTable(2, 1, 1, 1, init=10.0)
    steps = [(0, 0, 0, (0,), 0, 0.0), (1, 0, 0, (0,), 0, 2.0)]
    _backup(qt, steps, 5.0)
    # newest first: step 1 target = (5 - 2) + 0 = 3, alpha = 1
    # then step 0 target = (2 - 0) + q[1] = 2 + 3 = 5, alpha = 1
    assert qt.q[1, 0, 0, 0] == 3.0
    assert qt.q[0, 0, 0, 0] == 5.0
    assert qt.visits.sum() == 2
    _backup(qt, steps, 5.0)
    # second visit averages with alpha = 1/2
    assert qt.q[1, 0, 0, 0] == 3.0
    assert qt.q[0, 0, 0, 0] == 5.0


def test_q_learn_tank_safe_and_deterministic(tank):
    model, grid, strat = tank
    pol_a, rep_a = q_learn(model, strat, tank_fixture.W0, seed=7)
    pol_b, rep_b = q_learn(model, strat, tank_fixture.W0, seed=7)
    np.testing.assert_array_equal(pol_a.table, pol_b.table)
    assert rep_a.scores == rep_b.scores
    assert rep_a.episodes_run > 0
    assert len(rep_a.epsilons) == len(rep_a.episodes)
    # the shield keeps every trained run overflow free on every trace
    for tr in tank_fixture.all_traces(model.program):
        traj = run_trace(model, pol_a.decide, tr, tank_fixture.W0)
        assert traj.final_overflow_min == 0.0


def test_q_learn_matches_brute_force_optimum(tank):
    model, grid, strat = tank
    best_cost, best_table, points, costs = learn_oracle.brute_force_optimum(
        model, strat, grid, tank_fixture.W0)
    pol, _ = q_learn(model, strat, tank_fixture.W0, seed=7)
    got = learn_oracle.exact_table_cost(model, strat, grid, tank_fixture.W0,
                                        pol.table)
    assert got <= best_cost + 1e-9
    assert got >= best_cost - 1e-9


def test_q_learn_beats_random_baseline(tank):
    model, grid, strat = tank
    pol, _ = q_learn(model, strat, tank_fixture.W0, seed=7)
    learned = evaluate(model, pol, tank_fixture.W0, n_runs=400, seed=3)
    baseline = evaluate(model, RandomAllowedPolicy(strat),
                        tank_fixture.W0, n_runs=400, seed=3)
    assert learned.mean < baseline.mean


def test_evaluate_validation(tank):
    model, grid, strat = tank
    pol, _ = q_learn(model, strat, 0.0, seed=1)
    with pytest.raises(ValueError):
        evaluate(model, pol, 0.0, n_runs=1)
    with pytest.raises(ValueError):
        evaluate(model, pol, 0.0, observer="x")


def test_evaluate_deterministic_and_ci(tank):
    model, grid, strat = tank
    pol, _ = q_learn(model, strat, 0.0, seed=1)
    a = evaluate(model, pol, 0.0, n_runs=50, seed=9)
    b = evaluate(model, pol, 0.0, n_runs=50, seed=9)
    assert a.mean == b.mean
    np.testing.assert_array_equal(a.values, b.values)
    assert a.half_width_95 >= 0.0
    assert a.n_runs == 50
    o = evaluate(model, pol, 0.0, n_runs=50, seed=9, observer="o")
    assert o.mean == 0.0


def test_learn_params_override(tank):
    model, grid, strat = tank
    fast = LearnParams(generations=2, successful_runs=5, max_runs=20,
                       good_runs=2, eval_runs=5)
    pol, rep = q_learn(model, strat, 0.0, params=fast, seed=0)
    assert len(rep.scores) <= 2
