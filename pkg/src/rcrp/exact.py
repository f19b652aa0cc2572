"""Brute-force oracles and reference integer programs for small instances.

Scoring here is written from the raw visibility bits with plain numpy so it
stays independent of the incremental kernels used by the solvers.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .model import Budget, ReconInstance

MAX_SATS = 4
MAX_SLOTS = 14
MAX_SUBSETS = 10_000_000


class SizeGuardError(ValueError):
    """The enumeration would exceed the oracle's size guard."""


@dataclass
class OracleReport:
    value: float  # minimization sign: -(best reward)
    assignments: list = field(default_factory=list)
    enumerated: int = 0
    wall_time: float = 0.0

    @property
    def reward(self) -> float:
        return -self.value


def dense_visibility(V) -> np.ndarray:
    """Boolean ``[t, j, p]`` array unpacked directly from the packed words."""
    raw = np.ascontiguousarray(V.bits).view(np.uint8)
    P, J, _ = V.bits.shape
    bits = np.unpackbits(raw.reshape(P, J, -1), axis=-1, bitorder="little")[..., :V.m]
    return bits.transpose(2, 1, 0).astype(bool)


def score(dense_tjp, slots, rewards, thresholds) -> float:
    """Reward of occupying ``slots``: sum of pi where the count reaches r."""
    counts = dense_tjp[:, list(slots), :].sum(axis=1)
    return float(np.asarray(rewards)[counts >= np.asarray(thresholds)].sum())


def _tol_close(a, b):
    if not (math.isfinite(a) and math.isfinite(b)):
        return False
    return abs(a - b) <= 1e-9 * max(1.0, abs(a), abs(b))


def brute_force_rcrp(inst: ReconInstance, budget: Budget | None = None) -> OracleReport:
    """Exact optimum over every injective, budget-feasible assignment."""
    budget = budget or inst.budget
    I, J = inst.n_sats, inst.n_slots
    if I > MAX_SATS or J > MAX_SLOTS:
        raise SizeGuardError(f"oracle limited to |I| <= {MAX_SATS}, |J| <= {MAX_SLOTS} (got {I}, {J})")
    t0 = time.perf_counter()
    dense = dense_visibility(inst.visibility)
    cost = np.asarray(inst.cost)
    caps = None if budget.kind == "ARC" else np.asarray(budget.per_satellite)
    best, best_list, count = -math.inf, [], 0
    for perm in itertools.permutations(range(J), I):
        used = cost[np.arange(I), list(perm)]
        if budget.kind == "ARC":
            if used.sum() > budget.epsilon + 1e-12:
                continue
        elif np.any(used > caps):
            continue
        count += 1
        val = score(dense, perm, inst.rewards, inst.thresholds)
        if val > best and not _tol_close(val, best):
            best, best_list = val, [perm]
        elif _tol_close(val, best):
            best_list.append(perm)
    if count == 0:
        return OracleReport(math.inf, [], 0, time.perf_counter() - t0)
    return OracleReport(-best, best_list, count, time.perf_counter() - t0)


def brute_force_mcp(V, n: int, rewards, thresholds) -> OracleReport:
    """Exact maximum-coverage optimum by enumerating all ``n``-subsets of slots."""
    J = V.n_slots
    total = math.comb(J, n)
    if total > MAX_SUBSETS:
        raise SizeGuardError(f"C({J}, {n}) = {total} subsets exceeds the guard of {MAX_SUBSETS}")
    t0 = time.perf_counter()
    dense = dense_visibility(V).astype(np.int16)
    pi = np.asarray(rewards, dtype=float)
    r = np.asarray(thresholds)
    best, best_list = -math.inf, []
    combos = itertools.combinations(range(J), n)
    while True:
        chunk = list(itertools.islice(combos, 4096))
        if not chunk:
            break
        idx = np.array(chunk, dtype=np.int64).reshape(len(chunk), n)
        counts = dense[:, idx, :].sum(axis=2)  # (m, B, P)
        vals = np.where(counts >= r[:, None, :], pi[:, None, :], 0.0).sum(axis=(0, 2))
        top = vals.max()
        if top > best and not _tol_close(top, best):
            best, best_list = float(top), []
        if _tol_close(top, best):
            best_list.extend(tuple(chunk[k]) for k in np.flatnonzero(np.abs(vals - best) <= 1e-9 * max(1.0, abs(best))))
    return OracleReport(-best, best_list, total, time.perf_counter() - t0)


def _mcp_model(V, n, rewards, thresholds):
    from scipy.optimize import Bounds, LinearConstraint

    dense = dense_visibility(V)
    m, J, P = dense.shape
    pi = np.asarray(rewards, dtype=float).ravel()  # index t * P + p
    r = np.asarray(thresholds, dtype=float).ravel()
    nv = J + m * P
    c = np.concatenate([np.zeros(J), -pi])
    # r y - sum_j V x <= 0 for every (t, p)
    A = np.zeros((m * P + 1, nv))
    A[:m * P, :J] = -1.0 * dense.transpose(0, 2, 1).reshape(m * P, J)
    A[np.arange(m * P), J + np.arange(m * P)] = r
    A[m * P, :J] = 1.0
    lo = np.concatenate([np.full(m * P, -np.inf), [n]])
    hi = np.concatenate([np.zeros(m * P), [n]])
    return c, LinearConstraint(A, lo, hi), Bounds(0.0, 1.0), nv


def mcp_lp_relaxation(V, n: int, rewards, thresholds) -> float:
    """LP relaxation optimum of the maximum-coverage program (minimization sign)."""
    from scipy.optimize import milp

    c, cons, bounds, nv = _mcp_model(V, n, rewards, thresholds)
    res = milp(c, constraints=cons, bounds=bounds, integrality=np.zeros(nv))
    if not res.success:
        raise RuntimeError(f"LP relaxation failed: {res.message}")
    return float(res.fun)


def mcp_milp(V, n: int, rewards, thresholds, time_limit: float = 60.0):
    """Integer optimum of the maximum-coverage program via HiGHS.

    Returns ``(value, slots, proven_optimal)`` with ``value`` in minimization sign.
    """
    from scipy.optimize import milp

    c, cons, bounds, nv = _mcp_model(V, n, rewards, thresholds)
    J = V.n_slots
    res = milp(c, constraints=cons, bounds=bounds, integrality=np.ones(nv),
               options={"time_limit": time_limit})
    if res.x is None:
        raise RuntimeError(f"MILP failed: {res.message}")
    slots = np.flatnonzero(res.x[:J] > 0.5)
    return float(res.fun), slots, res.status == 0
