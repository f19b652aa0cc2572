"""Assignment-problem machinery for the slot-selection subproblem.

The subproblem maximizes ``sum_i w[slot_of[i]]`` over injective assignments of
satellites to slots, optionally under a delta-v budget. Because the slot
weights ``w`` do not depend on the satellite, the unbudgeted case reduces to
picking the ``n`` heaviest slots.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels


class InfeasibleError(ValueError):
    """No assignment satisfies the budget (or some row has no allowed column)."""


@dataclass
class HungarianResult:
    slot_of: np.ndarray
    cost: float
    u: np.ndarray
    v: np.ndarray


@dataclass
class Lr1Solution:
    """Slot-selection solution.

    ``value`` is ``-sum w`` of the returned assignment (minimization sign) and
    ``bound`` a valid lower bound on the subproblem optimum; they coincide
    when ``optimal`` is true and the search closed the gap exactly.
    """

    slot_of: np.ndarray
    value: float
    bound: float
    optimal: bool
    nodes_explored: int = 0
    cost: float = 0.0


def hungarian(cost) -> HungarianResult:
    """Minimum-cost injective assignment of rows to columns (rows <= columns).

    ``inf`` entries are forbidden edges. Raises :class:`InfeasibleError` when a
    row cannot be assigned.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError("cost must be a matrix")
    n, m = cost.shape
    if n > m:
        raise ValueError(f"{n} rows cannot be assigned injectively to {m} columns")
    if n == 0:
        return HungarianResult(np.zeros(0, dtype=np.int64), 0.0, np.zeros(0), np.zeros(m))
    if np.any(np.isnan(cost)) or np.any(cost == -np.inf):
        raise ValueError("cost entries must be finite or +inf")
    try:
        col, u, v = kernels.lsap(cost)
    except ValueError as exc:
        raise InfeasibleError(str(exc)) from exc
    return HungarianResult(col, float(cost[np.arange(n), col].sum()), u, v)


def check_certificate(cost, res: HungarianResult, tol: float = 1e-9) -> bool:
    """Dual feasibility and complementary slackness of a Hungarian solution."""
    cost = np.asarray(cost, dtype=float)
    n = cost.shape[0]
    with np.errstate(invalid="ignore"):
        red = cost - res.u[:, None] - res.v[None, :]
    finite = np.isfinite(cost)
    scale = tol * max(1.0, float(np.abs(cost[finite]).max()) if finite.any() else 1.0)
    if np.any(red[finite] < -scale) or np.any(res.v > scale):
        return False
    if np.any(np.abs(red[np.arange(n), res.slot_of]) > scale):
        return False
    unassigned = np.ones(cost.shape[1], dtype=bool)
    unassigned[res.slot_of] = False
    if np.any(np.abs(res.v[unassigned]) > scale):
        return False
    return abs(res.u.sum() + res.v.sum() - res.cost) <= scale * max(1, n)


def _pair_cheapest(slots, cost):
    """Pair satellites with a fixed slot set at minimum total cost."""
    slots = np.asarray(slots, dtype=np.int64)
    if cost is None:
        return slots.copy()
    res = hungarian(np.asarray(cost)[:, slots])
    return slots[res.slot_of]


def solve_lr1_topn(w, n: int, cost=None) -> Lr1Solution:
    """Heaviest-``n`` slot selection (budget absent or redundant).

    Ties go to the lowest slot index. When ``cost`` is given the chosen slots
    are paired with satellites at minimum total cost, which leaves the value
    unchanged.
    """
    w = np.asarray(w, dtype=float)
    if n > w.size:
        raise ValueError(f"cannot place {n} satellites in {w.size} slots")
    chosen = np.sort(np.argsort(-w, kind="stable")[:n])
    slot_of = _pair_cheapest(chosen, cost)
    value = -float(w[chosen].sum())
    spent = 0.0 if cost is None else float(np.asarray(cost)[np.arange(n), slot_of].sum())
    return Lr1Solution(slot_of, value, value, True, 0, spent)


def solve_lr1_irc(w, cost, eps_i) -> Lr1Solution:
    """Slot selection under individual budgets ``cost[i, j] <= eps_i[i]``.

    The individual limits only remove edges, so the filtered problem is a plain
    assignment problem.
    """
    w = np.asarray(w, dtype=float)
    cost = np.asarray(cost, dtype=float)
    eps_i = np.asarray(eps_i, dtype=float)
    allowed = cost <= eps_i[:, None]
    dead = np.flatnonzero(~allowed.any(axis=1))
    if dead.size:
        raise InfeasibleError(f"satellites {dead.tolist()} cannot reach any slot within their budget")
    profit = np.where(allowed, -w[None, :], np.inf)
    res = hungarian(profit)
    spent = float(cost[np.arange(cost.shape[0]), res.slot_of].sum())
    return Lr1Solution(res.slot_of, res.cost, res.cost, True, 0, spent)


# ---------------------------------------------------------------------------
# budgeted slot selection

class _Node:
    __slots__ = ("fixed", "forbidden", "bound")

    def __init__(self, fixed, forbidden, bound):
        self.fixed = fixed          # tuple of (sat, slot)
        self.forbidden = forbidden  # frozenset of (sat, slot)
        self.bound = bound          # upper bound on sum w (maximization)


class BudgetedSelector:
    """Exact budgeted slot selection.

    Maximizes ``sum w`` subject to injectivity and ``sum cost <= eps``. A single
    multiplier ``mu`` prices the budget; each dual evaluation is one assignment
    problem on ``mu * cost - w``. The dual bound drives a depth-first
    branch-and-bound over (satellite, slot) fixings.
    """

    def __init__(self, w, cost, eps, gap_tol=5e-3, dual_iters=60, node_limit=1_000_000,
                 exhaustive_limit=200_000):
        self.w = np.asarray(w, dtype=float)
        self.cost = np.asarray(cost, dtype=float)
        self.eps = float(eps)
        self.gap_tol = gap_tol
        self.dual_iters = dual_iters
        self.node_limit = node_limit
        self.exhaustive_limit = exhaustive_limit
        self.n, self.J = self.cost.shape
        self.best_value = -math.inf
        self.best_slot_of = None
        self.nodes = 0

    # -- helpers -----------------------------------------------------------
    def _offer(self, slot_of):
        slot_of = np.asarray(slot_of, dtype=np.int64)
        spent = float(self.cost[np.arange(self.n), slot_of].sum())
        if spent <= self.eps + 1e-12:
            val = float(self.w[slot_of].sum())
            if val > self.best_value:
                self.best_value = val
                self.best_slot_of = slot_of.copy()

    def _target(self):
        if self.best_value == -math.inf:
            return math.inf
        return self.best_value + self.gap_tol * abs(self.best_value) + 1e-12

    def _dual(self, fixed, forbidden):
        """Lagrangian bound of the node; also offers feasible dual solutions.

        Returns ``(bound, over_budget_assignment)``; the second item is
        ``None`` when the node needs no branching.
        """
        blocked = np.zeros((self.n, self.J), dtype=bool)
        if fixed:
            fr, fc = (np.fromiter(x, dtype=np.int64) for x in zip(*fixed))
            blocked[fr, :] = True
            blocked[:, fc] = True
            blocked[fr, fc] = False
        if forbidden:
            br, bc = (np.fromiter(x, dtype=np.int64) for x in zip(*forbidden))
            blocked[br, bc] = True
        c = np.where(blocked, np.inf, self.cost)
        budget = self.eps
        rows = np.arange(self.n)

        def line(slot_of):
            return float(self.w[slot_of].sum()), float(self.cost[rows, slot_of].sum()) - budget, slot_of

        def evaluate(mu):
            res = hungarian(c * mu - self.w[None, :] if mu > 0 else np.where(blocked, np.inf, -self.w[None, :]))
            return line(res.slot_of)

        try:
            lo_line = evaluate(0.0)
            cheap = hungarian(c)
        except InfeasibleError:
            return -math.inf, None
        self._offer(lo_line[2])
        if lo_line[1] <= 1e-12:
            return lo_line[0], None  # budget slack at mu = 0: the node is solved exactly
        if cheap.cost > budget + 1e-12:
            return -math.inf, None
        hi_line = line(cheap.slot_of)
        self._offer(hi_line[2])
        # ub(mu) = max over assignments of W - mu (C - budget) is convex and
        # piecewise linear; intersect the bracketing lines until no new line appears
        best_ub, branch_from = lo_line[0], lo_line[2]
        for _ in range(self.dual_iters):
            (w_lo, s_lo, _), (w_hi, s_hi, _) = lo_line, hi_line
            if s_lo - s_hi <= 1e-15:
                break
            mu = (w_lo - w_hi) / (s_lo - s_hi)
            new = evaluate(mu)
            ub = new[0] - mu * new[1]
            best_ub = min(best_ub, ub)
            line_val = w_lo - mu * s_lo
            if ub <= line_val + 1e-9 * max(1.0, abs(line_val)) or best_ub <= self._target():
                break
            if new[1] > 1e-12:
                lo_line = new
                branch_from = new[2]
            else:
                hi_line = new
                self._offer(new[2])
        return best_ub, branch_from

    def _exhaustive(self):
        n, J = self.n, self.J
        best = -math.inf
        best_perm = None
        for perm in itertools.permutations(range(J), n):
            p = np.fromiter(perm, dtype=np.int64, count=n)
            if self.cost[np.arange(n), p].sum() <= self.eps + 1e-12:
                val = self.w[p].sum()
                if val > best:
                    best, best_perm = float(val), p
        if best_perm is None:
            raise InfeasibleError("no assignment satisfies the budget")
        self.best_value, self.best_slot_of = best, best_perm
        return best

    def _branch_choice(self, full, fixed, forbidden):
        fixed_rows = {i for i, _ in fixed}
        costs = [(self.cost[i, full[i]], -i) for i in range(self.n) if i not in fixed_rows]
        if not costs:
            return None
        _, neg_i = max(costs)
        i = -neg_i
        return i, int(full[i])

    def solve(self) -> Lr1Solution:
        n, J = self.n, self.J
        if n == 0:
            return Lr1Solution(np.zeros(0, dtype=np.int64), 0.0, 0.0, True, 0, 0.0)
        if n > J:
            raise ValueError(f"cannot place {n} satellites in {J} slots")
        cheapest = hungarian(self.cost)
        if cheapest.cost > self.eps + 1e-12:
            raise InfeasibleError(
                f"budget {self.eps:.6g} km/s is below the cheapest assignment cost {cheapest.cost:.6g} km/s"
            )
        self._offer(cheapest.slot_of)
        if n <= 3 and math.perm(J, n) <= self.exhaustive_limit:
            val = self._exhaustive()
            return self._result(val, True)

        root_bound, branch_from = self._dual((), frozenset())
        if branch_from is None or root_bound <= self._target():
            return self._result(root_bound, True)
        # depth-first, best bound first among siblings
        counter = itertools.count()
        stack = [(-root_bound, next(counter), _Node((), frozenset(), root_bound), branch_from)]
        open_bounds = []
        while stack:
            if self.nodes >= self.node_limit:
                open_bounds = [nd.bound for _, _, nd, _ in stack]
                break
            _, _, node, full = stack.pop()
            if node.bound <= self._target():
                continue
            choice = self._branch_choice(full, node.fixed, node.forbidden)
            if choice is None:
                continue
            i, j = choice
            children = []
            for fixed, forbidden in (
                (node.fixed, node.forbidden | {(i, j)}),
                (node.fixed + ((i, j),), node.forbidden),
            ):
                self.nodes += 1
                bound, bf = self._dual(fixed, forbidden)
                bound = min(bound, node.bound)
                if bf is None or bound <= self._target():
                    continue
                children.append((bound, _Node(fixed, forbidden, bound), bf))
            children.sort(key=lambda x: x[0])
            for bound, nd, bf in children:
                stack.append((-bound, next(counter), nd, bf))
        if open_bounds:
            ub = max(max(open_bounds), self.best_value)
            return self._result(ub, False)
        return self._result(max(self.best_value, min(root_bound, self._target())), True)

    def _result(self, upper, optimal):
        upper = max(upper, self.best_value)
        slot_of = self.best_slot_of
        spent = float(self.cost[np.arange(self.n), slot_of].sum())
        return Lr1Solution(slot_of, -self.best_value, -upper, optimal, self.nodes, spent)


def solve_lr1_budgeted(w, cost, eps, gap_tol: float = 5e-3, node_limit: int = 1_000_000,
                       dual_iters: int = 60) -> Lr1Solution:
    """Budgeted slot selection, exact within ``gap_tol`` (relative).

    Redundant budgets (``eps`` at or above the sum of row maxima) fall through
    to :func:`solve_lr1_topn`.
    """
    cost = np.asarray(cost, dtype=float)
    w = np.asarray(w, dtype=float)
    if eps < 0:
        raise ValueError("budget must be non-negative")
    if cost.size and eps >= float(cost.max(axis=1).sum()):
        return solve_lr1_topn(w, cost.shape[0], cost)
    return BudgetedSelector(w, cost, eps, gap_tol, dual_iters, node_limit).solve()
