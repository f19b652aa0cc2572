import math

import numpy as np
import pytest

from rcrp import coverage, exact, model
from rcrp.exact import SizeGuardError
from rcrp.model import Budget


def test_dense_unpack_matches_tensor():
    inst = model.random_instance((2, 6, 2, 90), seed=1)
    assert np.array_equal(exact.dense_visibility(inst.visibility), inst.visibility.to_dense())


@pytest.mark.parametrize("seed", range(10))
def test_oracle_scoring_matches_coverage(seed):
    inst = model.random_instance((3, 8, 2, 40), seed, max_threshold=2)
    rng = np.random.default_rng(seed)
    slots = rng.choice(8, 3, replace=False)
    dense = exact.dense_visibility(inst.visibility)
    ref, _ = coverage.reward_of_assignment(slots, inst.visibility, inst.rewards, inst.thresholds)
    assert exact.score(dense, slots, inst.rewards, inst.thresholds) == pytest.approx(ref)


def test_single_satellite_is_argmax():
    inst = model.random_instance((1, 7, 2, 30), seed=4)
    inst = inst.with_budget(Budget.arc(1.0))
    rep = exact.brute_force_rcrp(inst)
    dense = exact.dense_visibility(inst.visibility)
    vals = [exact.score(dense, [j], inst.rewards, inst.thresholds) if inst.cost[0, j] <= 1.0 else -1
            for j in range(7)]
    assert rep.reward == pytest.approx(max(vals))
    assert rep.enumerated == sum(inst.cost[0] <= 1.0)


def test_unbounded_budget_equals_mcp():
    inst = model.random_instance((3, 8, 2, 30), seed=5, max_threshold=2)
    rcrp = exact.brute_force_rcrp(inst.with_budget(Budget.arc(math.inf)))
    mcp = exact.brute_force_mcp(inst.visibility, 3, inst.rewards, inst.thresholds)
    assert rcrp.value == pytest.approx(mcp.value)
    assert mcp.enumerated == math.comb(8, 3)


def test_mcp_edge_cases():
    inst = model.random_instance((1, 5, 2, 30), seed=6, max_threshold=2)
    full = exact.brute_force_mcp(inst.visibility, 5, inst.rewards, inst.thresholds)
    d = exact.dense_visibility(inst.visibility).sum(axis=1)
    assert full.reward == pytest.approx(inst.rewards[d >= inst.thresholds].sum())
    assert exact.brute_force_mcp(inst.visibility, 0, inst.rewards, inst.thresholds).reward == 0.0


def test_irc_oracle():
    inst = model.random_instance((2, 6, 1, 30), seed=7)
    rep = exact.brute_force_rcrp(inst, Budget.irc([0.0, 0.0]))
    assert rep.enumerated == 1
    assert list(rep.assignments[0]) == inst.initial_slots.tolist()


def test_size_guards():
    with pytest.raises(SizeGuardError):
        exact.brute_force_rcrp(model.random_instance((5, 6, 1, 10), 0))
    with pytest.raises(SizeGuardError):
        exact.brute_force_rcrp(model.random_instance((2, 15, 1, 10), 0))
    big = model.random_instance((1, 60, 1, 10), 0)
    with pytest.raises(SizeGuardError):
        exact.brute_force_mcp(big.visibility, 10, big.rewards, big.thresholds)


def test_lp_and_milp_agree_with_enumeration():
    inst = model.random_instance((3, 9, 2, 25), seed=8, max_threshold=2)
    brute = exact.brute_force_mcp(inst.visibility, 3, inst.rewards, inst.thresholds)
    val, slots, proven = exact.mcp_milp(inst.visibility, 3, inst.rewards, inst.thresholds)
    assert proven and val == pytest.approx(brute.value, abs=1e-6)
    assert exact.mcp_lp_relaxation(inst.visibility, 3, inst.rewards, inst.thresholds) <= val + 1e-6


def test_infeasible_budget_reports_inf():
    inst = model.random_instance((2, 4, 1, 10), seed=9)
    inst.cost[:] += 1.0
    assert exact.brute_force_rcrp(inst, Budget.arc(0.5)).value == math.inf
