"""Orbit geometry: secular-J2 propagation, repeating-ground-track sizing and
target elevation.

All distances are km, times are seconds, angles are radians.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

MU_EARTH = 398600.4418  # km^3/s^2
J2_EARTH = 1.08262668e-3
R_EARTH_EQ = 6378.137  # km, used in the J2 rates
R_EARTH_MEAN = 6371.0  # km, used for visibility geometry and altitude conventions
# IAU 1982 GMST rate and GMST at J2000.0 (2000-01-01 12:00 UT1)
OMEGA_EARTH = 7.2921158553e-5  # rad/s
GMST_J2000 = math.radians(280.46061837)

TWO_PI = 2.0 * math.pi


class OrbitError(ValueError):
    """Invalid orbital input or a failed orbit-design solve."""


def wrap_angle(x):
    """Normalize angle(s) to [0, 2*pi)."""
    out = np.mod(x, TWO_PI)
    if np.ndim(out) == 0:
        out = float(out)
        return 0.0 if out == TWO_PI else out
    out[out == TWO_PI] = 0.0
    return out


@dataclass(frozen=True)
class OrbitalElements:
    """Classical elements of one satellite or orbital slot.

    ``anomaly`` is the mean anomaly; for circular orbits it is the argument of
    latitude measured from the node when ``argp`` is zero.
    """

    sma: float
    ecc: float
    inc: float
    argp: float
    raan: float
    anomaly: float

    def __post_init__(self):
        if not self.sma > R_EARTH_MEAN:
            raise OrbitError(f"semi-major axis {self.sma} km is inside the Earth")
        if not 0.0 <= self.ecc < 1.0:
            raise OrbitError(f"eccentricity {self.ecc} outside [0, 1)")
        if not 0.0 <= self.inc <= math.pi:
            raise OrbitError(f"inclination {self.inc} outside [0, pi]")
        object.__setattr__(self, "argp", wrap_angle(self.argp))
        object.__setattr__(self, "raan", wrap_angle(self.raan))
        object.__setattr__(self, "anomaly", wrap_angle(self.anomaly))

    @classmethod
    def circular(cls, sma: float, inc: float, raan: float, u: float) -> "OrbitalElements":
        return cls(sma, 0.0, inc, 0.0, raan, u)

    def as_array(self) -> np.ndarray:
        return np.array([self.sma, self.ecc, self.inc, self.argp, self.raan, self.anomaly])


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid of ``m`` steps of ``dt`` seconds from ``epoch``.

    ``epoch`` is seconds past J2000.0.
    """

    m: int
    dt: float
    epoch: float = 0.0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"step count must be a positive integer, got {self.m}")
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        object.__setattr__(self, "m", int(self.m))

    @classmethod
    def over_horizon(cls, horizon: float, m: int, epoch: float = 0.0) -> "TimeGrid":
        return cls(m, horizon / m, epoch)

    @property
    def horizon(self) -> float:
        return self.m * self.dt

    def times(self) -> np.ndarray:
        """Seconds since epoch of every step."""
        return np.arange(self.m) * self.dt


@dataclass(frozen=True)
class RgtSpec:
    n_p: int
    n_d: int
    inc: float
    ecc: float = 0.0

    def __post_init__(self):
        if self.n_p < 1 or self.n_d < 1:
            raise ValueError("revolution and day counts must be positive")
        g = math.gcd(int(self.n_p), int(self.n_d))
        object.__setattr__(self, "n_p", int(self.n_p) // g)
        object.__setattr__(self, "n_d", int(self.n_d) // g)


@dataclass(frozen=True)
class GeodeticTarget:
    lat: float
    lon: float
    min_elevation: float = 0.0
    name: str = ""

    def __post_init__(self):
        if abs(self.lat) > math.pi / 2:
            raise ValueError(f"latitude {self.lat} outside [-pi/2, pi/2]")
        if not 0.0 <= self.min_elevation < math.pi / 2 + 1e-15:
            raise ValueError(f"minimum elevation {self.min_elevation} outside [0, pi/2]")


def secular_rates(sma, ecc, inc, j2: float = J2_EARTH):
    """First-order secular J2 rates ``(raan_dot, argp_dot, mean_anomaly_dot)`` in rad/s."""
    sma = np.asarray(sma, dtype=float)
    n = np.sqrt(MU_EARTH / sma**3)
    p = sma * (1.0 - ecc**2)
    k = j2 * (R_EARTH_EQ / p) ** 2
    ci = np.cos(inc)
    raan_dot = -1.5 * n * k * ci
    argp_dot = 0.75 * n * k * (5.0 * ci**2 - 1.0)
    m_dot = n * (1.0 + 0.75 * k * np.sqrt(1.0 - ecc**2) * (3.0 * ci**2 - 1.0))
    return raan_dot, argp_dot, m_dot


def nodal_period(sma, ecc, inc, j2: float = J2_EARTH):
    """Satellite nodal period: time between successive ascending-node passes."""
    _, argp_dot, m_dot = secular_rates(sma, ecc, inc, j2)
    return TWO_PI / (m_dot + argp_dot)


def greenwich_nodal_period(sma, ecc, inc, j2: float = J2_EARTH):
    """Period of the Earth's rotation relative to the precessing orbit plane."""
    raan_dot, _, _ = secular_rates(sma, ecc, inc, j2)
    return TWO_PI / (OMEGA_EARTH - raan_dot)


def rgt_residual(sma: float, spec: RgtSpec, j2: float = J2_EARTH) -> float:
    """Relative mismatch ``(N_P T_S - N_D T_G) / T`` for a candidate sma."""
    ts = nodal_period(sma, spec.ecc, spec.inc, j2)
    tg = greenwich_nodal_period(sma, spec.ecc, spec.inc, j2)
    return float((spec.n_p * ts - spec.n_d * tg) / (spec.n_d * tg))


def solve_rgt_sma(
    spec: RgtSpec,
    j2: float = J2_EARTH,
    bracket: tuple[float, float] = (R_EARTH_EQ + 100.0, R_EARTH_EQ + 30000.0),
) -> float:
    """Semi-major axis giving ``n_p`` revolutions in ``n_d`` nodal days.

    Raises
    ------
    OrbitError
        If the resonance has no root inside ``bracket``.
    """
    lo, hi = bracket
    f_lo = rgt_residual(lo, spec, j2)
    f_hi = rgt_residual(hi, spec, j2)
    if not np.isfinite(f_lo) or not np.isfinite(f_hi) or f_lo * f_hi > 0:
        raise OrbitError(
            f"no repeating-ground-track solution for {spec} in [{lo:.1f}, {hi:.1f}] km"
        )
    return brentq(rgt_residual, lo, hi, args=(spec, j2), xtol=1e-10, rtol=1e-15, maxiter=200)


def rgt_repeat_period(spec: RgtSpec, sma: float | None = None, j2: float = J2_EARTH) -> float:
    """Repeat period ``N_D * T_G`` in seconds."""
    if sma is None:
        sma = solve_rgt_sma(spec, j2)
    return float(spec.n_d * greenwich_nodal_period(sma, spec.ecc, spec.inc, j2))


def solve_kepler(mean_anomaly, ecc, tol: float = 1e-14, max_iter: int = 50):
    """Eccentric anomaly from mean anomaly by Newton iteration (vectorized)."""
    mean_anomaly = np.asarray(mean_anomaly, dtype=float)
    ecc = np.broadcast_to(np.asarray(ecc, dtype=float), mean_anomaly.shape)
    if not np.any(ecc):
        return mean_anomaly.copy()
    E = np.where(ecc < 0.8, mean_anomaly, np.pi)
    for _ in range(max_iter):
        dE = (E - ecc * np.sin(E) - mean_anomaly) / (1.0 - ecc * np.cos(E))
        E = E - dE
        if np.max(np.abs(dE)) < tol:
            break
    return E


def _elements_columns(elements):
    if isinstance(elements, OrbitalElements):
        arr = elements.as_array()[None, :]
    else:
        arr = np.array([e.as_array() for e in elements]) if len(elements) else np.zeros((0, 6))
    return arr.T


def propagate_many(elements, t: np.ndarray, j2: float = J2_EARTH) -> np.ndarray:
    """ECI positions of every orbit at every time.

    Parameters
    ----------
    elements : OrbitalElements or sequence of them
    t : array of seconds since the elements' epoch

    Returns
    -------
    ndarray of shape (len(t), n_orbits, 3)
    """
    sma, ecc, inc, argp0, raan0, m0 = _elements_columns(elements)
    t = np.asarray(t, dtype=float)[:, None]
    raan_dot, argp_dot, m_dot = secular_rates(sma, ecc, inc, j2)
    raan = raan0 + raan_dot * t
    argp = argp0 + argp_dot * t
    M = m0 + m_dot * t
    if np.any(ecc):
        E = solve_kepler(np.mod(M, TWO_PI), np.broadcast_to(ecc, M.shape))
        nu = 2.0 * np.arctan2(np.sqrt(1.0 + ecc) * np.sin(E / 2), np.sqrt(1.0 - ecc) * np.cos(E / 2))
        r = sma * (1.0 - ecc * np.cos(E))
    else:
        nu = M
        r = np.broadcast_to(sma, M.shape)
    u = argp + nu
    cu, su = np.cos(u), np.sin(u)
    cO, sO = np.cos(raan), np.sin(raan)
    ci, si = np.cos(inc), np.sin(inc)
    pos = np.empty(M.shape + (3,))
    pos[..., 0] = r * (cO * cu - sO * su * ci)
    pos[..., 1] = r * (sO * cu + cO * su * ci)
    pos[..., 2] = r * (su * si)
    return pos


def propagate(el: OrbitalElements, grid: TimeGrid, j2: float = J2_EARTH) -> np.ndarray:
    """ECI track of one orbit over ``grid``, shape (m, 3) in km."""
    return propagate_many(el, grid.times(), j2)[:, 0, :]


def gmst(t_j2000) -> np.ndarray:
    """Greenwich mean sidereal angle from the linear IAU 1982 rate."""
    return np.mod(GMST_J2000 + OMEGA_EARTH * np.asarray(t_j2000, dtype=float), TWO_PI)


def target_unit_eci(target: GeodeticTarget, gmst_angle) -> np.ndarray:
    """Unit zenith vector(s) of a target on a spherical Earth, in ECI."""
    lam = target.lon + np.asarray(gmst_angle, dtype=float)
    cl = math.cos(target.lat)
    out = np.empty(np.shape(lam) + (3,))
    out[..., 0] = cl * np.cos(lam)
    out[..., 1] = cl * np.sin(lam)
    out[..., 2] = math.sin(target.lat)
    return out


def elevation(sat_eci, target: GeodeticTarget, gmst_angle, radius: float = R_EARTH_MEAN):
    """Topocentric elevation of satellite position(s) seen from ``target``.

    Broadcasting: ``sat_eci`` has shape (..., 3) and ``gmst_angle`` broadcasts
    against its leading axes.
    """
    sat = np.asarray(sat_eci, dtype=float)
    up = target_unit_eci(target, gmst_angle)
    rho = sat - radius * up
    vert = np.einsum("...k,...k->...", rho, up)
    horiz = np.linalg.norm(np.cross(rho, up), axis=-1)
    el = np.arctan2(vert, horiz)
    return float(el) if el.ndim == 0 else el


def subsatellite_point(sat_eci, gmst_angle):
    """Geocentric (lat, lon) of the sub-satellite point, lon wrapped to (-pi, pi]."""
    sat = np.asarray(sat_eci, dtype=float)
    lat = np.arctan2(sat[..., 2], np.hypot(sat[..., 0], sat[..., 1]))
    lon = np.arctan2(sat[..., 1], sat[..., 0]) - gmst_angle
    lon = np.angle(np.exp(1j * lon))
    return lat, lon


def great_circle(lat1, lon1, lat2, lon2):
    """Central angle between two points (haversine)."""
    a = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2.0 * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def rgt_slots(reference: OrbitalElements, spec: RgtSpec, m: int, j2: float = J2_EARTH):
    """The ``m`` slots of a common-ground-track constellation.

    Slot ``j`` retraces the reference ground track delayed by ``j`` steps of
    ``T/m``, so ``N_P * raan + N_D * anomaly`` is the same for every slot.
    """
    if reference.ecc != 0.0:
        raise OrbitError("common-ground-track slots are generated for circular orbits only")
    j = np.arange(m)
    raan = reference.raan + TWO_PI * spec.n_d * j / m
    u = reference.anomaly - TWO_PI * spec.n_p * j / m
    return [
        replace(reference, raan=float(wrap_angle(a)), anomaly=float(wrap_angle(b)))
        for a, b in zip(raan, u)
    ]
