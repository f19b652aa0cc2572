"""Pure-numpy implementations of the hot kernels.

Same signatures and results as the compiled ``_kernels`` module. Layout
conventions shared by both backends:

* ``bits``: uint64 array (P, J, W), bit ``t % 64`` of word ``t // 64`` set when
  slot ``j`` sees target ``p`` at step ``t``; padding bits are zero.
* ``b``, ``r``: int32 arrays (P, m); ``pi``, ``lam``: float64 arrays (P, m).
"""
import numpy as np

_INF = np.inf


def unpack_columns(bits, slots, m):
    """Dense uint8 (P, len(slots), m) view of the selected slot columns."""
    words = np.ascontiguousarray(bits[:, slots, :])
    as_bytes = words.view(np.uint8)
    return np.unpackbits(as_bytes, axis=-1, count=m, bitorder="little")


def coverage_counts(bits, slots, m):
    slots = np.asarray(slots, dtype=np.int64)
    if slots.size == 0:
        return np.zeros((bits.shape[0], m), dtype=np.int32)
    return unpack_columns(bits, slots, m).sum(axis=1, dtype=np.int32)


def covered_steps(bits, slots, m):
    """Per target, number of steps seen by at least one of ``slots`` (popcount of the OR)."""
    slots = np.asarray(slots, dtype=np.int64)
    if slots.size == 0:
        return np.zeros(bits.shape[0], dtype=np.int64)
    union = np.bitwise_or.reduce(bits[:, slots, :], axis=1)
    return np.unpackbits(union.view(np.uint8), axis=-1).sum(axis=-1).astype(np.int64)


def move_deltas(bits, b, r, pi, j_from, j_to):
    """Reward change of replacing slot ``j_from[k]`` by ``j_to[k]`` for each k."""
    j_from = np.asarray(j_from, dtype=np.int64)
    j_to = np.asarray(j_to, dtype=np.int64)
    m = b.shape[1]
    out = np.zeros(j_from.size)
    covered = b >= r
    for k in range(j_from.size):
        jf, jt = j_from[k], j_to[k]
        if jf == jt:
            continue
        cols = unpack_columns(bits, [jf, jt], m).astype(np.int32)
        nb = b - cols[:, 0, :] + cols[:, 1, :]
        out[k] = float(np.sum(pi * ((nb >= r).astype(np.int8) - covered)))
    return out


def apply_move(bits, b, j_from, j_to):
    if j_from == j_to:
        return
    m = b.shape[1]
    cols = unpack_columns(bits, [j_from, j_to], m).astype(np.int32)
    b -= cols[:, 0, :]
    b += cols[:, 1, :]


def slot_weights(bits, lam):
    """``w[j] = sum_{t,p} lam[p, t] * V[t, j, p]``."""
    P, J, _ = bits.shape
    m = lam.shape[1]
    w = np.zeros(J)
    chunk = max(1, 2_000_000 // max(1, P * m))
    for start in range(0, J, chunk):
        sl = np.arange(start, min(J, start + chunk))
        dense = unpack_columns(bits, sl, m)
        w[sl] = np.einsum("pjt,pt->j", dense, lam, dtype=np.float64)
    return w


def lsap(cost):
    """Rectangular min-cost assignment by shortest augmenting paths.

    ``cost`` is (n, m) with n <= m; ``inf`` marks forbidden edges.
    Returns ``(col_of_row, u, v)`` where ``u``/``v`` are dual potentials with
    ``cost[i, j] - u[i] - v[j] >= 0`` and equality on assigned edges, ``v <= 0``
    and ``v == 0`` on unassigned columns. Raises ValueError when infeasible.
    """
    cost = np.asarray(cost, dtype=np.float64)
    n, m = cost.shape
    if n > m:
        raise ValueError("more rows than columns")
    u = np.zeros(n)
    v = np.zeros(m)
    row_of_col = np.full(m, -1, dtype=np.int64)
    col_of_row = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        shortest = np.full(m, _INF)
        path = np.full(m, -1, dtype=np.int64)
        used_col = np.zeros(m, dtype=bool)
        used_rows = [i]
        cur_row, min_val, sink = i, 0.0, -1
        while sink < 0:
            red = min_val + cost[cur_row] - u[cur_row] - v
            better = (~used_col) & (red < shortest)
            shortest[better] = red[better]
            path[better] = cur_row
            cand = np.where(used_col, _INF, shortest)
            j = int(np.argmin(cand))
            min_val = cand[j]
            if not np.isfinite(min_val):
                raise ValueError(f"row {i} cannot be assigned: no finite augmenting path")
            used_col[j] = True
            if row_of_col[j] < 0:
                sink = j
            else:
                cur_row = int(row_of_col[j])
                used_rows.append(cur_row)
        # potential update on the visited tree
        rows = np.asarray(used_rows)
        u[i] += min_val
        others = rows[1:]
        if others.size:
            u[others] += min_val - shortest[col_of_row[others]]
        v[used_col] -= min_val - shortest[used_col]
        j = sink
        while True:
            r_ = path[j]
            row_of_col[j] = r_
            col_of_row[r_], j = j, col_of_row[r_]
            if r_ == i:
                break
    return col_of_row, u, v
