# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, isfinite
from libc.stdint cimport uint64_t, int32_t, int64_t

cnp.import_array()

cdef extern from *:
    int __builtin_ctzll(unsigned long long) nogil
    int __builtin_popcountll(unsigned long long) nogil


def unpack_columns(bits, slots, m):
    words = np.ascontiguousarray(bits[:, slots, :])
    return np.unpackbits(words.view(np.uint8), axis=-1, count=m, bitorder="little")


def coverage_counts(const uint64_t[:, :, ::1] bits, slots, Py_ssize_t m):
    cdef const int64_t[::1] sl = np.ascontiguousarray(slots, dtype=np.int64)
    cdef Py_ssize_t P = bits.shape[0], W = bits.shape[2]
    out = np.zeros((P, m), dtype=np.int32)
    cdef int32_t[:, ::1] b = out
    cdef Py_ssize_t p, k, w, t
    cdef uint64_t x
    with nogil:
        for p in range(P):
            for k in range(sl.shape[0]):
                for w in range(W):
                    x = bits[p, sl[k], w]
                    while x:
                        t = w * 64 + __builtin_ctzll(x)
                        b[p, t] += 1
                        x &= x - 1
    return out


def covered_steps(const uint64_t[:, :, ::1] bits, slots, Py_ssize_t m):
    cdef const int64_t[::1] sl = np.ascontiguousarray(slots, dtype=np.int64)
    cdef Py_ssize_t P = bits.shape[0], W = bits.shape[2]
    out = np.zeros(P, dtype=np.int64)
    cdef int64_t[::1] cnt = out
    cdef Py_ssize_t p, k, w
    cdef uint64_t acc
    with nogil:
        for p in range(P):
            for w in range(W):
                acc = 0
                for k in range(sl.shape[0]):
                    acc |= bits[p, sl[k], w]
                cnt[p] += __builtin_popcountll(acc)
    return out


cdef double _delta(const uint64_t[:, :, ::1] bits, const int32_t[:, ::1] b,
                   const int32_t[:, ::1] r, const double[:, ::1] pi,
                   Py_ssize_t jf, Py_ssize_t jt) noexcept nogil:
    cdef Py_ssize_t P = bits.shape[0], W = bits.shape[2]
    cdef Py_ssize_t p, w, t
    cdef int bit
    cdef uint64_t a, c, x
    cdef int32_t old, new
    cdef double d = 0.0
    if jf == jt:
        return 0.0
    for p in range(P):
        for w in range(W):
            a = bits[p, jf, w]
            c = bits[p, jt, w]
            x = a ^ c
            while x:
                bit = __builtin_ctzll(x)
                t = w * 64 + bit
                old = b[p, t]
                if (c >> bit) & 1:
                    new = old + 1
                else:
                    new = old - 1
                if new >= r[p, t] and old < r[p, t]:
                    d += pi[p, t]
                elif new < r[p, t] and old >= r[p, t]:
                    d -= pi[p, t]
                x &= x - 1
    return d


def move_deltas(const uint64_t[:, :, ::1] bits, const int32_t[:, ::1] b,
                const int32_t[:, ::1] r, const double[:, ::1] pi, j_from, j_to):
    cdef const int64_t[::1] jf = np.ascontiguousarray(j_from, dtype=np.int64)
    cdef const int64_t[::1] jt = np.ascontiguousarray(j_to, dtype=np.int64)
    cdef Py_ssize_t n = jf.shape[0], k
    out = np.zeros(n)
    cdef double[::1] o = out
    with nogil:
        for k in range(n):
            o[k] = _delta(bits, b, r, pi, jf[k], jt[k])
    return out


def apply_move(const uint64_t[:, :, ::1] bits, int32_t[:, ::1] b, Py_ssize_t j_from, Py_ssize_t j_to):
    cdef Py_ssize_t P = bits.shape[0], W = bits.shape[2]
    cdef Py_ssize_t p, w, t
    cdef int bit
    cdef uint64_t a, c, x
    if j_from == j_to:
        return
    with nogil:
        for p in range(P):
            for w in range(W):
                a = bits[p, j_from, w]
                c = bits[p, j_to, w]
                x = a ^ c
                while x:
                    bit = __builtin_ctzll(x)
                    t = w * 64 + bit
                    if (c >> bit) & 1:
                        b[p, t] += 1
                    else:
                        b[p, t] -= 1
                    x &= x - 1


def slot_weights(const uint64_t[:, :, ::1] bits, const double[:, ::1] lam):
    cdef Py_ssize_t P = bits.shape[0], J = bits.shape[1], W = bits.shape[2]
    out = np.zeros(J)
    cdef double[::1] w_ = out
    cdef Py_ssize_t p, j, w
    cdef uint64_t x
    cdef double acc
    with nogil:
        for j in range(J):
            acc = 0.0
            for p in range(P):
                for w in range(W):
                    x = bits[p, j, w]
                    while x:
                        acc += lam[p, w * 64 + __builtin_ctzll(x)]
                        x &= x - 1
            w_[j] = acc
    return out


def lsap(cost_in):
    cdef double[:, ::1] cost = np.ascontiguousarray(cost_in, dtype=np.float64)
    cdef Py_ssize_t n = cost.shape[0], m = cost.shape[1]
    if n > m:
        raise ValueError("more rows than columns")
    u_arr = np.zeros(n)
    v_arr = np.zeros(m)
    col_arr = np.full(n, -1, dtype=np.int64)
    row_arr = np.full(m, -1, dtype=np.int64)
    shortest_arr = np.empty(m)
    path_arr = np.empty(m, dtype=np.int64)
    usedc_arr = np.empty(m, dtype=np.uint8)
    usedr_arr = np.empty(n, dtype=np.uint8)
    cdef double[::1] u = u_arr, v = v_arr, shortest = shortest_arr
    cdef int64_t[::1] col_of_row = col_arr, row_of_col = row_arr, path = path_arr
    cdef unsigned char[::1] used_col = usedc_arr, used_row = usedr_arr
    cdef Py_ssize_t i, j, cur, sink, best_j, k, r_, tmp
    cdef double min_val, red, best
    cdef bint failed = False
    with nogil:
        for i in range(n):
            for j in range(m):
                shortest[j] = INFINITY
                path[j] = -1
                used_col[j] = 0
            for k in range(n):
                used_row[k] = 0
            cur = i
            min_val = 0.0
            sink = -1
            while sink < 0:
                used_row[cur] = 1
                best = INFINITY
                best_j = -1
                for j in range(m):
                    if used_col[j]:
                        continue
                    red = min_val + cost[cur, j] - u[cur] - v[j]
                    if red < shortest[j]:
                        shortest[j] = red
                        path[j] = cur
                    if shortest[j] < best:
                        best = shortest[j]
                        best_j = j
                if best_j < 0 or not isfinite(best):
                    failed = True
                    break
                min_val = best
                used_col[best_j] = 1
                if row_of_col[best_j] < 0:
                    sink = best_j
                else:
                    cur = row_of_col[best_j]
            if failed:
                break
            u[i] += min_val
            for k in range(n):
                if used_row[k] and k != i:
                    u[k] += min_val - shortest[col_of_row[k]]
            for j in range(m):
                if used_col[j]:
                    v[j] -= min_val - shortest[j]
            j = sink
            while True:
                r_ = path[j]
                row_of_col[j] = r_
                tmp = col_of_row[r_]
                col_of_row[r_] = j
                j = tmp
                if r_ == i:
                    break
    if failed:
        raise ValueError(f"row {i} cannot be assigned: no finite augmenting path")
    return col_arr, u_arr, v_arr
