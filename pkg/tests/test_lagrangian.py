import io
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcrp import exact, kernels, lagrangian as L, model
from rcrp.apcore import InfeasibleError
from rcrp.coverage import Scorer, VisibilityTensor
from rcrp.model import Budget

from conftest import tiny_instances


def dual_value(inst, lam, cfg=None):
    cfg = cfg or L.SubgradientConfig(gap_tol=0.0, lr1_node_limit=10**6)
    w = kernels.slot_weights(inst.visibility.bits, np.ascontiguousarray(lam.T))
    redundant = inst.budget.kind == "ARC" and inst.budget.epsilon >= inst.cost.max(axis=1).sum()
    lr1 = L.solve_lr1(inst, w, cfg, redundant)
    y, z2 = L.solve_lr2(lam, inst.rewards, inst.thresholds)
    return lr1, y, lr1.bound + z2


def test_lr2_zero_multipliers():
    pi = np.array([[0.5, 1.0], [2.0, 0.0]])
    y, val = L.solve_lr2(np.zeros((2, 2)), pi, np.ones((2, 2)))
    assert y.tolist() == [[True, True], [True, False]] and val == -3.5


def test_lr2_boundary_is_strict():
    y, val = L.solve_lr2(np.array([[0.5]]), np.array([[1.0]]), np.array([[2]]))
    assert not y[0, 0] and val == 0.0


def test_lr2_matches_enumeration_on_small_grid():
    rng = np.random.default_rng(0)
    lam, pi, r = rng.random((4, 2)) * 2, rng.random((4, 2)), rng.integers(1, 3, (4, 2))
    coef = lam * r - pi
    best = min(float((coef * np.array(bits).reshape(4, 2)).sum()) for bits in itertools.product([0, 1], repeat=8))
    assert L.solve_lr2(lam, pi, r)[1] == pytest.approx(best, abs=1e-15)


def test_subgradient_signs():
    r = np.ones((2, 1))
    assert np.all(L.subgradient(np.zeros((2, 1)), np.zeros((2, 1)), r) == 0)
    g = L.subgradient(np.array([[1], [0]]), np.array([[0], [2]]), r)
    assert g.tolist() == [[1], [-2]]


def test_step_and_update():
    assert L.step_size(3.0, 3.0, np.ones(4), 2.0) == 0.0
    assert L.step_size(10.0, 0.0, np.array([2.0]), 2.0) == 5.0
    with pytest.raises(ZeroDivisionError):
        L.step_size(1.0, 0.0, np.zeros(3), 1.0)
    assert L.update_multipliers(np.zeros(3), 1.0, -np.ones(3)).tolist() == [0, 0, 0]
    assert L.update_multipliers(np.array([1.0]), 1.0, np.array([-2.0])).tolist() == [0.0]
    with pytest.raises(ValueError):
        L.update_multipliers(np.zeros(1), -1.0, np.zeros(1))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_update_keeps_multipliers_nonnegative(seed):
    rng = np.random.default_rng(seed)
    lam = L.update_multipliers(rng.random(20), rng.random() * 5, rng.normal(size=20) * 3)
    assert np.all(lam >= 0)


@pytest.mark.parametrize("seed", range(8))
def test_subgradient_is_supergradient_of_dual(seed):
    inst = tiny_instances(8, seed0=500)[seed]
    rng = np.random.default_rng(seed)
    lam = rng.random((inst.m, inst.n_targets))
    lr1, y, z = dual_value(inst, lam)
    b = Scorer(inst.visibility, inst.rewards, inst.thresholds).state(lr1.slot_of).b
    g = L.subgradient(y, b, inst.thresholds)
    for _ in range(5):
        lam2 = np.maximum(0.0, lam + rng.normal(size=lam.shape))
        assert dual_value(inst, lam2)[2] <= z + float(np.sum(g * (lam2 - lam))) + 1e-9


def test_primal_repair_extremes():
    d = np.zeros((3, 2, 1), dtype=bool)
    d[:, 1, 0] = True
    V = VisibilityTensor.from_dense(d)
    pi, r = np.array([[1.0], [2.0], [3.0]]), np.ones((3, 1), dtype=int)
    sc = Scorer(V, pi, r)
    assert L.primal_repair(sc, [0])[1] == 0.0
    assert L.primal_repair(sc, [1])[1] == -6.0


def test_local_search_single_satellite_reaches_optimum():
    for seed in range(5):
        inst = model.random_instance((1, 9, 2, 40), seed).with_budget(Budget.arc(math.inf))
        sc = Scorer(inst.visibility, inst.rewards, inst.thresholds)
        slot, _, val = L.local_search(inst, sc, inst.initial_slots, cap=None)
        assert val == pytest.approx(exact.brute_force_rcrp(inst).value)


def test_local_search_keeps_global_optimum():
    inst = tiny_instances(1, seed0=42)[0]
    opt = exact.brute_force_rcrp(inst)
    sc = Scorer(inst.visibility, inst.rewards, inst.thresholds)
    start = np.array(opt.assignments[0])
    slot, _, val = L.local_search(inst, sc, start, cap=None)
    assert val == pytest.approx(opt.value)


def test_local_search_respects_budget_and_improves(desk_instance):
    sc = Scorer(desk_instance.visibility, desk_instance.rewards, desk_instance.thresholds)
    rng = np.random.default_rng(0)
    for eps in model.epsilon_schedule(desk_instance, 4):
        inst = desk_instance.with_budget(Budget.arc(eps))
        start = inst.initial_slots
        _, before = L.primal_repair(sc, start)
        slot, state, val = L.local_search(inst, sc, start, cap=10 * inst.n_sats, rng=rng)
        assert inst.cost[np.arange(inst.n_sats), slot].sum() <= eps + 1e-9
        assert np.unique(slot).size == slot.size
        assert val <= before
        assert val == pytest.approx(L.primal_repair(sc, slot)[1])


def test_saturating_instance_closes_gap():
    m, P, J = 20, 1, 6
    d = np.zeros((m, J, P), dtype=bool)
    d[:, 3, 0] = True
    inst = model.random_instance((2, J, P, m), 0)
    inst = model.ReconInstance(**{**vars(inst), "visibility": VisibilityTensor.from_dense(d),
                                  "thresholds": np.ones((m, P), dtype=int)})
    res = L.solve(inst.with_budget(Budget.arc(inst.cost.max(axis=1).sum())))
    assert res.gap == 0.0
    assert res.iterations <= 5
    assert 3 in res.slot_of


def test_first_lower_bound_is_minus_total_reward(rgt_instance):
    res = L.solve(rgt_instance, L.SubgradientConfig(max_iters=3))
    assert res.trace[0].lb == pytest.approx(-rgt_instance.rewards.sum())


def test_bound_traces(rgt_instance):
    res = L.solve(rgt_instance, L.SubgradientConfig(max_iters=40, gap_tol=0.0))
    ubs = [t.ub for t in res.trace]
    best = [t.best_lb for t in res.trace]
    assert all(a >= b for a, b in zip(ubs, ubs[1:]))
    assert all(a <= b for a, b in zip(best, best[1:]))
    assert res.lower_bound <= res.upper_bound
    assert rgt_instance.budget.feasible(rgt_instance.cost, res.slot_of)
    assert res.reward == pytest.approx(-res.upper_bound)


def test_alpha_halves_after_window(rgt_instance):
    cfg = L.SubgradientConfig(max_iters=60, gap_tol=0.0, step_tol=0.0, alpha_window=3)
    res = L.solve(rgt_instance, cfg)
    alphas = [t.alpha for t in res.trace]
    assert alphas[0] == 2.0
    for a, b in zip(alphas, alphas[1:]):
        assert b in (a, a / 2)
    stall = 0
    for prev, cur in zip(res.trace, res.trace[1:]):
        stall = 0 if cur.best_lb > prev.best_lb + 1e-12 else stall + 1
        if cur.alpha < prev.alpha:
            assert stall % 3 == 0 and stall > 0
            stall = 0


def test_trace_stream_and_hook(rgt_instance):
    buf = io.StringIO()
    seen = []
    res = L.solve(rgt_instance, L.SubgradientConfig(max_iters=5, gap_tol=0.0),
                  trace_stream=buf, iteration_hook=lambda k, lb, ub, phi: seen.append(k))
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == ",".join(L.TRACE_FIELDS)
    assert len(lines) == res.iterations + 1 and seen == list(range(1, res.iterations + 1))


def test_irc_mode():
    inst = model.random_instance((3, 8, 2, 40), 3, max_threshold=2)
    inst = inst.with_budget(Budget.irc([0.8, math.inf, 0.0]))
    res = L.solve(inst)
    assert inst.budget.feasible(inst.cost, res.slot_of)
    opt = exact.brute_force_rcrp(inst)
    assert res.lower_bound <= opt.value + 1e-9 <= res.upper_bound + 2e-9


def test_infeasible_budget_raises():
    inst = model.random_instance((2, 5, 1, 10), 0)
    inst = model.ReconInstance(**{**vars(inst), "cost": inst.cost + 1.0, "budget": Budget.arc(0.5)})
    with pytest.raises(InfeasibleError):
        L.solve(inst)


def test_config_validation():
    with pytest.raises(ValueError):
        L.SubgradientConfig(alpha0=3.0)
    with pytest.raises(ValueError):
        L.SubgradientConfig(max_iters=0)


def test_sweep_single_point_and_threads(rgt_instance):
    cfg = L.SubgradientConfig(max_iters=20)
    eps_r = float(rgt_instance.cost.max(axis=1).sum())
    [pt] = L.sweep(rgt_instance, [eps_r], cfg)
    res = L.solve(rgt_instance.with_budget(Budget.arc(eps_r)), cfg)
    assert pt.reward == pytest.approx(res.reward) and pt.lower_bound == pytest.approx(res.lower_bound)
    sched = model.epsilon_schedule(rgt_instance, 4)
    assert L.sweep(rgt_instance, sched, cfg, threads=3) == L.sweep(rgt_instance, sched, cfg)
    with pytest.raises(ValueError):
        L.sweep(rgt_instance, [], cfg)


def test_sweep_records_infeasible_points():
    inst = model.random_instance((2, 5, 1, 10), 0)
    inst = model.ReconInstance(**{**vars(inst), "cost": inst.cost + 1.0, "budget": Budget.arc(5.0)})
    pts = L.sweep(inst, [0.5, 10.0])
    assert pts[0].status == "infeasible" and pts[1].status == "ok"


def test_realized_cost_within_budget(desk_instance):
    eps = model.epsilon_schedule(desk_instance, 10)[0]
    res = L.solve(desk_instance.with_budget(Budget.arc(eps)), L.SubgradientConfig(max_iters=30))
    assert res.realized_cost <= eps + 1e-9
    assert res.lower_bound <= res.upper_bound
