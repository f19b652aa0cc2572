"""Visibility tensors, coverage timelines and assignment rewards.

Index conventions follow ``V[t, j, p]`` (time step, slot, target) at the public
surface. Internally the tensor is stored target-major as 64-bit packed time
words, shape (P, J, ceil(m / 64)), which is what the kernels consume.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .astro import J2_EARTH, GeodeticTarget, OrbitalElements, TimeGrid, elevation, gmst, propagate_many


def pack_time_bits(dense_pjt: np.ndarray) -> np.ndarray:
    """Pack a boolean (P, J, m) array along time into uint64 words."""
    dense_pjt = np.asarray(dense_pjt, dtype=bool)
    P, J, m = dense_pjt.shape
    W = max(1, -(-m // 64))
    padded = np.zeros((P, J, W * 64), dtype=bool)
    padded[..., :m] = dense_pjt
    packed = np.packbits(padded, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64, copy=False).reshape(P, J, W)


class VisibilityTensor:
    """Immutable boolean tensor ``V[t, j, p]``.

    Parameters
    ----------
    bits : uint64 array (P, J, W)
        Packed storage (see :func:`pack_time_bits`).
    m : int
        Number of time steps.
    slot_sub : int array (J,), optional
        Subconstellation index of every slot (all zeros by default).
    profiles, offsets : optional
        Circulant description: boolean reference profiles (S, P, m) and the
        per-slot time shift, so ``V[t, j, p] = profiles[s_j, p, (t - offsets[j]) % m]``.
    """

    def __init__(self, bits, m, slot_sub=None, profiles=None, offsets=None):
        bits = np.ascontiguousarray(bits, dtype=np.uint64)
        if bits.ndim != 3 or bits.shape[2] != max(1, -(-m // 64)):
            raise ValueError(f"packed shape {bits.shape} inconsistent with m={m}")
        self.bits = bits
        self.bits.setflags(write=False)
        self.m = int(m)
        J = bits.shape[1]
        self.slot_sub = np.zeros(J, dtype=np.int64) if slot_sub is None else np.asarray(slot_sub, dtype=np.int64)
        if self.slot_sub.shape != (J,):
            raise ValueError("slot->subconstellation map must have one entry per slot")
        self.profiles = None if profiles is None else np.asarray(profiles, dtype=bool)
        self.offsets = None if offsets is None else np.asarray(offsets, dtype=np.int64)

    @classmethod
    def from_dense(cls, dense_tjp, slot_sub=None) -> "VisibilityTensor":
        dense_tjp = np.asarray(dense_tjp, dtype=bool)
        m = dense_tjp.shape[0]
        return cls(pack_time_bits(dense_tjp.transpose(2, 1, 0)), m, slot_sub)

    @classmethod
    def from_profiles(cls, profiles, slot_sub, offsets) -> "VisibilityTensor":
        """Circulant tensor from reference profiles (S, P, m)."""
        profiles = np.asarray(profiles, dtype=bool)
        slot_sub = np.asarray(slot_sub, dtype=np.int64)
        offsets = np.asarray(offsets, dtype=np.int64)
        S, P, m = profiles.shape
        t = np.arange(m)
        idx = (t[None, :] - offsets[:, None]) % m  # (J, m)
        dense_pjt = profiles[slot_sub[:, None], :, idx]  # (J, m, P)
        bits = pack_time_bits(dense_pjt.transpose(2, 0, 1))
        return cls(bits, m, slot_sub, profiles, offsets)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.m, self.bits.shape[1], self.bits.shape[0])

    @property
    def n_slots(self) -> int:
        return self.bits.shape[1]

    @property
    def n_targets(self) -> int:
        return self.bits.shape[0]

    @property
    def is_circulant(self) -> bool:
        return self.profiles is not None

    def to_dense(self) -> np.ndarray:
        """Boolean array indexed ``[t, j, p]``."""
        dense = kernels.unpack_columns(self.bits, np.arange(self.n_slots), self.m)
        return dense.transpose(2, 1, 0).astype(bool)

    def columns(self, slots) -> np.ndarray:
        """Boolean (m, len(slots), P) slice."""
        dense = kernels.unpack_columns(self.bits, np.asarray(slots, dtype=np.int64), self.m)
        return dense.transpose(2, 1, 0).astype(bool)

    def __eq__(self, other):
        if not isinstance(other, VisibilityTensor):
            return NotImplemented
        return self.m == other.m and np.array_equal(self.bits, other.bits)

    def __repr__(self):
        m, J, P = self.shape
        kind = "circulant" if self.is_circulant else "dense"
        return f"VisibilityTensor(m={m}, J={J}, P={P}, {kind})"


def circulant_expand(profile, m: int | None = None) -> np.ndarray:
    """``circ(v)``: the (m, m) matrix with ``V[t, j] = v[(t - j) mod m]``."""
    v = np.asarray(profile, dtype=bool)
    if v.ndim != 1:
        raise ValueError("profile must be one-dimensional")
    if m is not None and v.size != m:
        raise ValueError(f"profile length {v.size} does not match m={m}")
    n = v.size
    t = np.arange(n)
    return v[(t[:, None] - t[None, :]) % n]


def visibility_mask(slots, targets, grid: TimeGrid, j2: float = J2_EARTH, chunk: int = 256) -> np.ndarray:
    """Boolean (P, J, m) visibility computed from elevation masks."""
    slots = list(slots)
    P, J, m = len(targets), len(slots), grid.m
    out = np.zeros((P, J, m), dtype=bool)
    times = grid.times()
    g = gmst(grid.epoch + times)[:, None]
    for start in range(0, J, chunk):
        part = slots[start:start + chunk]
        pos = propagate_many(part, times, j2)  # (m, c, 3)
        for p, tgt in enumerate(targets):
            el = elevation(pos, tgt, g)
            out[p, start:start + len(part), :] = (el >= tgt.min_elevation).T
    return out


def build_visibility(slots, targets, grid: TimeGrid, slot_sub=None, j2: float = J2_EARTH) -> VisibilityTensor:
    """Visibility tensor by propagating every slot over the grid.

    A step counts as visible when the elevation is at or above the target's
    minimum elevation.
    """
    mask = visibility_mask(slots, targets, grid, j2)
    return VisibilityTensor(pack_time_bits(mask), grid.m, slot_sub)


def reference_profiles(reference: OrbitalElements, targets, grid: TimeGrid, j2: float = J2_EARTH) -> np.ndarray:
    """Boolean (P, m) visibility profile of one reference orbit."""
    return visibility_mask([reference], targets, grid, j2)[:, 0, :]


def coverage_timeline(V: VisibilityTensor, x) -> np.ndarray:
    """Satellites in view ``b[t, p] = sum_j V[t, j, p] x[j]`` for a 0/1 pattern ``x``."""
    x = np.asarray(x)
    if x.shape != (V.n_slots,):
        raise ValueError(f"pattern length {x.shape} does not match {V.n_slots} slots")
    slots = np.flatnonzero(x)
    return kernels.coverage_counts(V.bits, slots, V.m).T.copy()


def circular_timeline(profile, x) -> np.ndarray:
    """Coverage timeline of one target as the circular convolution of ``profile`` and ``x``."""
    v = np.asarray(profile, dtype=float)
    x = np.asarray(x, dtype=float)
    if v.shape != x.shape:
        raise ValueError("profile and pattern must have equal length")
    return np.rint(np.fft.irfft(np.fft.rfft(v) * np.fft.rfft(x), n=v.size)).astype(np.int64)


@dataclass
class CoverageState:
    """Satellite counts and coverage flags of one configuration.

    ``counts`` and ``thresholds`` are target-major (P, m); :attr:`b` and
    :attr:`y` give the ``[t, p]`` views.
    """

    counts: np.ndarray
    thresholds: np.ndarray

    @property
    def b(self) -> np.ndarray:
        return self.counts.T

    @property
    def y(self) -> np.ndarray:
        return (self.counts >= self.thresholds).T

    def copy(self) -> "CoverageState":
        return CoverageState(self.counts.copy(), self.thresholds)


class Scorer:
    """Reward evaluation for one (V, pi, r) triple.

    Holds the target-major copies the kernels need, so repeated evaluation in a
    local search does not re-layout the inputs.
    """

    def __init__(self, V: VisibilityTensor, rewards, thresholds):
        rewards = np.asarray(rewards, dtype=np.float64)
        thresholds = np.asarray(thresholds)
        if rewards.shape != (V.m, V.n_targets) or thresholds.shape != rewards.shape:
            raise ValueError("rewards/thresholds must have shape (m, P)")
        self.V = V
        self.pi = np.ascontiguousarray(rewards.T)
        self.r = np.ascontiguousarray(thresholds.T, dtype=np.int32)
        self.total = float(self.pi.sum())

    def state(self, slots) -> CoverageState:
        return CoverageState(kernels.coverage_counts(self.V.bits, np.asarray(slots, dtype=np.int64), self.V.m), self.r)

    def reward(self, state: CoverageState) -> float:
        return float(self.pi[state.counts >= self.r].sum())

    def deltas(self, state: CoverageState, j_from, j_to) -> np.ndarray:
        return kernels.move_deltas(self.V.bits, state.counts, self.r, self.pi, j_from, j_to)

    def apply(self, state: CoverageState, j_from: int, j_to: int) -> None:
        kernels.apply_move(self.V.bits, state.counts, int(j_from), int(j_to))


def _check_injective(slot_of, n_slots):
    slot_of = np.asarray(slot_of, dtype=np.int64)
    if slot_of.size and (slot_of.min() < 0 or slot_of.max() >= n_slots):
        raise ValueError("assignment refers to a slot outside the slot set")
    if np.unique(slot_of).size != slot_of.size:
        raise ValueError("assignment is not injective: two satellites share a slot")
    return slot_of


def reward_of_assignment(slot_of, V: VisibilityTensor, rewards, thresholds):
    """Reward ``sum pi * y~`` of an assignment and its conforming coverage state."""
    slot_of = _check_injective(slot_of, V.n_slots)
    scorer = Scorer(V, rewards, thresholds)
    state = scorer.state(slot_of)
    return scorer.reward(state), state


def reward_delta(state: CoverageState, slot_of, move, V: VisibilityTensor, rewards, thresholds) -> float:
    """Reward change of moving one satellite, evaluated incrementally.

    ``move`` is ``(satellite, from_slot, to_slot)``. ``state`` is not modified;
    use :meth:`Scorer.apply` to commit a move.
    """
    sat, j_from, j_to = (int(v) for v in move)
    slot_of = np.asarray(slot_of)
    if slot_of[sat] != j_from:
        raise ValueError(f"satellite {sat} is on slot {slot_of[sat]}, not {j_from}")
    if j_to != j_from and np.any(slot_of == j_to):
        raise ValueError(f"destination slot {j_to} is occupied")
    scorer = Scorer(V, rewards, thresholds)
    return float(scorer.deltas(state, [j_from], [j_to])[0])


def coverage_fraction(V: VisibilityTensor, slots) -> np.ndarray:
    """Per target, fraction of steps seen by at least one occupied slot."""
    return kernels.covered_steps(V.bits, np.asarray(slots, dtype=np.int64), V.m) / V.m
