"""Impulsive transfer costs between circular orbits.

A transfer is a Hohmann two-impulse transfer whose plane rotation is shared
between the two burns, followed by a two-impulse phasing manoeuvre on the
destination orbit. Costs are delta-v magnitudes in km/s.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .astro import MU_EARTH, TWO_PI, OrbitalElements

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class TransferPolicy:
    """How plane change and phasing are costed.

    phasing_angle_mode
        ``"worst-case"`` charges a phasing angle of pi for every transfer (an
        upper value); ``"computed"`` uses the argument-of-latitude offset.
    phasing_revolutions
        Revolutions spent on the phasing orbit.
    plane_change_split
        ``"optimal"`` minimizes total delta-v over the fraction of the rotation
        done at the first burn; ``"apoapsis"`` does all of it at the burn on
        the larger radius.
    """

    phasing_angle_mode: Literal["worst-case", "computed"] = "worst-case"
    phasing_revolutions: int = 1
    plane_change_split: Literal["optimal", "apoapsis"] = "optimal"
    grid_points: int = 33
    golden_iters: int = 40

    def __post_init__(self):
        if self.phasing_revolutions < 1:
            raise ValueError("phasing revolutions must be >= 1")
        if self.phasing_angle_mode not in ("worst-case", "computed"):
            raise ValueError(f"unknown phasing mode {self.phasing_angle_mode!r}")
        if self.plane_change_split not in ("optimal", "apoapsis"):
            raise ValueError(f"unknown plane-change split {self.plane_change_split!r}")


class TransferError(ValueError):
    pass


def rotation_angle(inc1, raan1, inc2, raan2):
    """Angle between two orbit planes."""
    n1 = np.stack(np.broadcast_arrays(np.sin(raan1) * np.sin(inc1), -np.cos(raan1) * np.sin(inc1), np.cos(inc1)), -1)
    n2 = np.stack(np.broadcast_arrays(np.sin(raan2) * np.sin(inc2), -np.cos(raan2) * np.sin(inc2), np.cos(inc2)), -1)
    n1, n2 = np.broadcast_arrays(n1, n2)
    return np.arctan2(np.linalg.norm(np.cross(n1, n2), axis=-1), np.einsum("...k,...k->...", n1, n2))


def _burns(v1, vt1, vt2, v2, theta, s):
    d1 = np.sqrt(np.maximum(v1**2 + vt1**2 - 2.0 * v1 * vt1 * np.cos(s * theta), 0.0))
    d2 = np.sqrt(np.maximum(vt2**2 + v2**2 - 2.0 * vt2 * v2 * np.cos((1.0 - s) * theta), 0.0))
    return d1 + d2


def combined_hohmann_dv(r1, r2, theta, split: str = "optimal", grid_points: int = 33, golden_iters: int = 40):
    """Delta-v of a Hohmann transfer r1 -> r2 combined with a plane rotation theta.

    Vectorized over broadcastable inputs. The optimal split is found by a grid
    scan over the first-burn fraction followed by golden-section refinement
    around the best grid node.
    """
    r1, r2, theta = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (r1, r2, theta)))
    at = 0.5 * (r1 + r2)
    v1 = np.sqrt(MU_EARTH / r1)
    v2 = np.sqrt(MU_EARTH / r2)
    vt1 = np.sqrt(MU_EARTH * (2.0 / r1 - 1.0 / at))
    vt2 = np.sqrt(MU_EARTH * (2.0 / r2 - 1.0 / at))
    if split == "apoapsis":
        s = np.where(r1 > r2, 1.0, 0.0)
        return _burns(v1, vt1, vt2, v2, theta, s)

    grid = np.linspace(0.0, 1.0, grid_points)
    vals = _burns(*(a[..., None] for a in (v1, vt1, vt2, v2, theta)), grid)
    k = np.argmin(vals, axis=-1)
    best = np.take_along_axis(vals, k[..., None], axis=-1)[..., 0]
    h = 1.0 / (grid_points - 1)
    lo = np.clip(grid[k] - h, 0.0, 1.0)
    hi = np.clip(grid[k] + h, 0.0, 1.0)
    for _ in range(golden_iters):
        a = hi - _GOLDEN * (hi - lo)
        b = lo + _GOLDEN * (hi - lo)
        left = _burns(v1, vt1, vt2, v2, theta, a) < _burns(v1, vt1, vt2, v2, theta, b)
        hi = np.where(left, b, hi)
        lo = np.where(left, lo, a)
    refined = _burns(v1, vt1, vt2, v2, theta, 0.5 * (lo + hi))
    return np.minimum(best, refined)


def phasing_dv(r, beta, revolutions: int = 1):
    """Two-impulse phasing delta-v on a circular orbit of radius ``r``.

    A phase offset ``beta`` in [0, pi] can be recovered either by a shorter
    phasing orbit (catching up by ``beta``) or by a longer one (falling back by
    ``2*pi - beta``); the cheaper option is charged.
    """
    r = np.asarray(r, dtype=float)
    beta = np.abs(np.asarray(beta, dtype=float))
    vc = np.sqrt(MU_EARTH / r)
    k = float(revolutions)
    out = []
    for frac in (1.0 - beta / (TWO_PI * k), 1.0 + (TWO_PI - beta) / (TWO_PI * k)):
        a_ph = r * np.power(frac, 2.0 / 3.0)
        v_ph = np.sqrt(np.maximum(MU_EARTH * (2.0 / r - 1.0 / a_ph), 0.0))
        out.append(2.0 * np.abs(v_ph - vc))
    return np.where(beta == 0.0, 0.0, np.minimum(out[0], out[1]))


def _phase_offset(u1, u2):
    d = np.mod(np.asarray(u2) - np.asarray(u1) + math.pi, TWO_PI) - math.pi
    return np.abs(d)


def _columns(elements):
    arr = np.array([e.as_array() for e in elements], dtype=float).reshape(-1, 6)
    if np.any(arr[:, 1] != 0.0):
        raise TransferError("transfer costs are defined for circular orbits only")
    return arr


def transfer_costs(from_els, to_els, policy: TransferPolicy = TransferPolicy()) -> np.ndarray:
    """Cost matrix ``c[i, j]`` from every ``from_els[i]`` to every ``to_els[j]``."""
    A = _columns(from_els)
    B = _columns(to_els)
    r1 = A[:, 0][:, None]
    r2 = B[:, 0][None, :]
    theta = rotation_angle(A[:, 2][:, None], A[:, 4][:, None], B[:, 2][None, :], B[:, 4][None, :])
    dv = combined_hohmann_dv(r1, r2, theta, policy.plane_change_split, policy.grid_points, policy.golden_iters)
    u1 = (A[:, 3] + A[:, 5])[:, None]
    u2 = (B[:, 3] + B[:, 5])[None, :]
    if policy.phasing_angle_mode == "worst-case":
        beta = np.full(dv.shape, math.pi)
    else:
        beta = _phase_offset(u1, u2)
    dv = dv + phasing_dv(r2, beta, policy.phasing_revolutions)
    # no manoeuvre is needed to stay on the same orbit and phase
    same = (np.abs(r1 - r2) == 0) & (theta == 0) & (_phase_offset(u1, u2) == 0)
    dv = np.where(same, 0.0, dv)
    return np.maximum(dv, 0.0)


def transfer_cost(src: OrbitalElements, dst: OrbitalElements, policy: TransferPolicy = TransferPolicy()) -> float:
    """Delta-v (km/s) to move a satellite from ``src`` onto slot ``dst``."""
    return float(transfer_costs([src], [dst], policy)[0, 0])


def build_cost_matrix(satellites, slots, policy: TransferPolicy = TransferPolicy(), chunk: int = 4096) -> np.ndarray:
    """Cost matrix (|I|, |J|) in km/s."""
    slots = list(slots)
    parts = [transfer_costs(satellites, slots[s:s + chunk], policy) for s in range(0, len(slots), chunk)]
    return np.concatenate(parts, axis=1) if parts else np.zeros((len(satellites), 0))


def epsilon_redundant(cost) -> float:
    """Budget at and above which the aggregated cost constraint cannot bind."""
    cost = np.asarray(cost, dtype=float)
    if cost.size == 0:
        return 0.0
    return float(cost.max(axis=1).sum())


def write_cost_csv(cost, path) -> None:
    """Rows are satellites, columns are slots, km/s to 9 significant digits."""
    cost = np.asarray(cost, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"slot_{j}" for j in range(cost.shape[1])])
        for row in cost:
            w.writerow([f"{v:.9g}" for v in row])


def read_cost_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty cost file")
    return np.array([[float(v) for v in row] for row in rows[1:]], dtype=float).reshape(len(rows) - 1, len(rows[0]))
