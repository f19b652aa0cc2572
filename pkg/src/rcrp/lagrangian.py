"""Lagrangian heuristic for the reconfiguration problem.

Objective values use the minimization sign: a configuration with reward ``R``
has objective ``-R``. Lower bounds come from the Lagrangian dual obtained by
relaxing the coverage-linking constraints ``r y <= sum V phi`` with
multipliers ``lam[t, p] >= 0``; upper bounds come from feasible assignments
improved by a 1-exchange local search.
"""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .apcore import InfeasibleError, hungarian, solve_lr1_budgeted, solve_lr1_irc, solve_lr1_topn
from .coverage import Scorer
from .model import Budget, ParetoPoint, ReconInstance


@dataclass
class SubgradientConfig:
    max_iters: int = 200
    gap_tol: float = 5e-3
    step_tol: float = 1e-6
    alpha0: float = 2.0
    alpha_window: int = 3
    nbhd_cap_factor: int = 10
    seed: int | None = 0
    lr1_node_limit: int = 200
    ls_max_rounds: int | None = None

    def __post_init__(self):
        if not 0 < self.alpha0 <= 2:
            raise ValueError("alpha0 must lie in (0, 2]")
        for name in ("max_iters", "alpha_window", "nbhd_cap_factor", "lr1_node_limit"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.gap_tol < 0 or self.step_tol < 0:
            raise ValueError("tolerances must be non-negative")


@dataclass
class TraceRow:
    iter: int
    lb: float
    best_lb: float
    ub: float
    theta: float
    g_norm: float
    alpha: float


@dataclass
class SolveResult:
    slot_of: np.ndarray
    upper_bound: float
    lower_bound: float
    gap: float
    realized_cost: float
    coverage: np.ndarray  # y~ as [t, p]
    iterations: int
    stop_reason: str
    trace: list[TraceRow] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def reward(self) -> float:
        return -self.upper_bound


TRACE_FIELDS = ("iter", "lb", "best_lb", "ub", "theta", "g_norm", "alpha")


def solve_lr2(lam, rewards, thresholds):
    """Closed-form coverage subproblem: ``y = 1`` exactly where ``lam r - pi < 0``."""
    coef = np.asarray(lam, dtype=float) * np.asarray(thresholds) - np.asarray(rewards, dtype=float)
    y = coef < 0
    return y, float(coef[y].sum())


def subgradient(y, counts_tp, thresholds):
    """``g[t, p] = r y - sum V phi``; ``counts_tp`` is the coverage timeline ``b[t, p]``."""
    return np.asarray(thresholds) * np.asarray(y) - np.asarray(counts_tp)


def step_size(upper, lower, g, alpha) -> float:
    g2 = float(np.sum(np.square(g, dtype=float)))
    if g2 == 0.0:
        raise ZeroDivisionError("zero subgradient: the multipliers are optimal")
    return (upper - lower) / g2 * alpha


def update_multipliers(lam, theta, g):
    if theta < 0:
        raise ValueError("step size must be non-negative")
    return np.maximum(0.0, np.asarray(lam, dtype=float) + theta * np.asarray(g, dtype=float))


def primal_repair(scorer: Scorer, slot_of):
    """Conforming coverage of an assignment and its objective ``-sum pi y~``."""
    state = scorer.state(slot_of)
    return state, -scorer.reward(state)


def compute_gap(lower, upper) -> float:
    if upper == lower:
        return 0.0
    if upper == 0:
        return math.inf
    return abs(upper - lower) / abs(upper)


def _dest_mask(inst: ReconInstance, slot_of, spent):
    """Budget-conforming destinations ``(I, J)`` for single-satellite moves."""
    cost = inst.cost
    I = slot_of.size
    cur = cost[np.arange(I), slot_of]
    if inst.budget.kind == "ARC":
        ok = (spent - cur)[:, None] + cost <= inst.budget.epsilon + 1e-12
    else:
        ok = cost <= np.asarray(inst.budget.per_satellite)[:, None]
    occupied = np.zeros(inst.n_slots, dtype=bool)
    occupied[slot_of] = True
    ok &= ~occupied[None, :]
    return ok


def local_search(inst: ReconInstance, scorer: Scorer, slot_of, cap: int | None = None,
                 rng: np.random.Generator | None = None, max_rounds: int | None = None):
    """1-exchange local search over budget-conforming, unoccupied destinations.

    With ``cap=None`` the full neighbourhood is scanned and the best improving
    move is taken. Otherwise each round samples at most ``cap`` candidates
    uniformly without replacement and accepts the first improving one. The
    search stops when a round finds no improvement.
    Returns ``(slot_of, state, objective)``.
    """
    slot_of = np.array(slot_of, dtype=np.int64)
    state = scorer.state(slot_of)
    value = -scorer.reward(state)
    cost = inst.cost
    spent = float(cost[np.arange(slot_of.size), slot_of].sum())
    rng = rng or np.random.default_rng(0)
    rounds = 0
    while max_rounds is None or rounds < max_rounds:
        rounds += 1
        sats, dests = np.nonzero(_dest_mask(inst, slot_of, spent))
        if sats.size == 0:
            break
        if cap is not None and sats.size > cap:
            pick = rng.choice(sats.size, size=cap, replace=False)
            sats, dests = sats[pick], dests[pick]
        deltas = scorer.deltas(state, slot_of[sats], dests)
        if cap is None:
            k = int(np.argmax(deltas))
            if deltas[k] <= 1e-12:
                break
        else:
            improving = np.flatnonzero(deltas > 1e-12)
            if improving.size == 0:
                break
            k = int(improving[0])
        i, j = int(sats[k]), int(dests[k])
        scorer.apply(state, slot_of[i], j)
        spent += cost[i, j] - cost[i, slot_of[i]]
        slot_of[i] = j
        value -= float(deltas[k])
    # recompute to avoid drift from accumulated float deltas
    value = -scorer.reward(state)
    return slot_of, state, value


def feasible_start(inst: ReconInstance):
    if inst.n_sats > inst.n_slots:
        raise InfeasibleError(f"{inst.n_sats} satellites but only {inst.n_slots} slots")
    if inst.budget.kind == "ARC":
        cheapest = hungarian(inst.cost)
        if cheapest.cost > inst.budget.epsilon + 1e-12:
            raise InfeasibleError(
                f"budget {inst.budget.epsilon:.6g} km/s is below the cheapest reconfiguration "
                f"({cheapest.cost:.6g} km/s)"
            )
        return cheapest.slot_of
    return solve_lr1_irc(np.zeros(inst.n_slots), inst.cost, inst.budget.per_satellite).slot_of


def solve_lr1(inst: ReconInstance, w, cfg: SubgradientConfig, redundant: bool):
    if inst.budget.kind == "IRC":
        return solve_lr1_irc(w, inst.cost, inst.budget.per_satellite)
    if redundant:
        return solve_lr1_topn(w, inst.n_sats, inst.cost)
    return solve_lr1_budgeted(w, inst.cost, inst.budget.epsilon, cfg.gap_tol, cfg.lr1_node_limit)


def solve(inst: ReconInstance, cfg: SubgradientConfig | None = None, trace_stream=None,
          iteration_hook=None) -> SolveResult:
    """Subgradient optimization with a local-search primal heuristic.

    ``trace_stream`` receives one CSV row per iteration. ``iteration_hook`` is
    called as ``hook(k, lb, ub, slot_of_k)`` after every iteration (used by the
    oracle tests to check bounds along the run).
    """
    cfg = cfg or SubgradientConfig()
    t0 = time.perf_counter()
    V = inst.visibility
    scorer = Scorer(V, inst.rewards, inst.thresholds)
    rng = np.random.default_rng(cfg.seed)
    r_tp = inst.thresholds
    pi_tp = inst.rewards
    I = inst.n_sats
    cap = cfg.nbhd_cap_factor * I
    redundant = inst.budget.kind == "ARC" and inst.budget.epsilon >= float(inst.cost.max(axis=1).sum())

    start = feasible_start(inst)
    best_slot = None
    best_ub = math.inf
    best_state = None
    candidates = [start]
    if inst.initial_slots is not None and inst.budget.feasible(inst.cost, inst.initial_slots):
        candidates.append(np.asarray(inst.initial_slots, dtype=np.int64))
    for cand in candidates:
        st, val = primal_repair(scorer, cand)
        if val < best_ub:
            best_ub, best_slot, best_state = val, np.array(cand, dtype=np.int64), st

    writer = None
    if trace_stream is not None:
        writer = csv.writer(trace_stream)
        writer.writerow(TRACE_FIELDS)

    lam = np.zeros((inst.m, inst.n_targets))
    best_lb = -math.inf
    alpha = cfg.alpha0
    stall = 0
    trace: list[TraceRow] = []
    stop = "max_iters"
    k = 0
    for k in range(1, cfg.max_iters + 1):
        w = kernels.slot_weights(V.bits, np.ascontiguousarray(lam.T))
        lr1 = solve_lr1(inst, w, cfg, redundant)
        y, zd2 = solve_lr2(lam, pi_tp, r_tp)
        lb = lr1.bound + zd2
        if lb > best_lb + 1e-12:
            best_lb = lb
            stall = 0
        else:
            stall += 1
            if stall >= cfg.alpha_window:
                alpha *= 0.5
                stall = 0

        phi = lr1.slot_of
        ls_slot, ls_state, ls_val = local_search(inst, scorer, phi, cap, rng, cfg.ls_max_rounds)
        if ls_val < best_ub:
            best_ub, best_slot, best_state = ls_val, ls_slot, ls_state

        counts = scorer.state(phi).b
        g = subgradient(y, counts, r_tp)
        g_norm = float(np.linalg.norm(g))
        gap = compute_gap(best_lb, best_ub)
        theta = 0.0 if g_norm == 0 else step_size(best_ub, lb, g, alpha)
        row = TraceRow(k, lb, best_lb, best_ub, theta, g_norm, alpha)
        trace.append(row)
        if writer is not None:
            writer.writerow([k, repr(lb), repr(best_lb), repr(best_ub), repr(theta), repr(g_norm), repr(alpha)])
        if iteration_hook is not None:
            iteration_hook(k, lb, best_ub, phi)
        if g_norm == 0:
            stop = "zero_subgradient"
            break
        if gap <= cfg.gap_tol:
            stop = "gap"
            break
        if theta < cfg.step_tol:
            stop = "step"
            break
        lam = update_multipliers(lam, theta, g)

    spent = float(inst.cost[np.arange(I), best_slot].sum())
    coverage = (best_state.counts >= best_state.thresholds).T.copy()
    return SolveResult(
        slot_of=best_slot,
        upper_bound=best_ub,
        lower_bound=best_lb,
        gap=compute_gap(best_lb, best_ub),
        realized_cost=spent,
        coverage=coverage,
        iterations=k,
        stop_reason=stop,
        trace=trace,
        wall_time=time.perf_counter() - t0,
    )


def _sweep_point(inst: ReconInstance, eps: float, cfg: SubgradientConfig) -> ParetoPoint:
    try:
        res = solve(inst.with_budget(Budget.arc(eps)), cfg)
    except InfeasibleError:
        return ParetoPoint(eps, math.nan, math.nan, math.nan, math.nan, math.nan, 0, "infeasible")
    return ParetoPoint(eps, res.realized_cost, res.reward, res.lower_bound, res.gap,
                       res.upper_bound, res.iterations, "ok")


def sweep(inst: ReconInstance, schedule, cfg: SubgradientConfig | None = None, threads: int = 1) -> list[ParetoPoint]:
    """Epsilon-constraint sweep: one aggregated-budget solve per budget value.

    Infeasible points are recorded with status ``"infeasible"`` instead of
    aborting the sweep.
    """
    schedule = list(schedule)
    if not schedule:
        raise ValueError("empty budget schedule")
    cfg = cfg or SubgradientConfig()
    if threads <= 1:
        return [_sweep_point(inst, e, cfg) for e in schedule]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda e: _sweep_point(inst, e, cfg), schedule))
