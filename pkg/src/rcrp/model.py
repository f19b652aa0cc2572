"""Problem data: reconfiguration instances, generators, bounds and file formats.

Objective values follow the minimization convention (``-reward``) unless a
name says otherwise.
"""
from __future__ import annotations

import base64
import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .astro import (
    R_EARTH_MEAN,
    GeodeticTarget,
    OrbitalElements,
    RgtSpec,
    TimeGrid,
    rgt_repeat_period,
    rgt_slots,
    solve_rgt_sma,
)
from .coverage import VisibilityTensor, build_visibility, reference_profiles
from .transfer import TransferPolicy, build_cost_matrix

SCHEMA_VERSION = 1
DEG = math.pi / 180.0


class InstanceFormatError(ValueError):
    """Malformed, inconsistent or unsupported instance/result file."""


class BoundInapplicable(ValueError):
    """The analytic LP bound needs a circulant tensor and time-invariant pi/r."""


@dataclass(frozen=True)
class Budget:
    """Aggregated (``"ARC"``) or per-satellite (``"IRC"``) delta-v budget.

    For IRC, ``per_satellite[i]`` is ``inf`` for satellites without a limit.
    """

    kind: str
    epsilon: float = math.inf
    per_satellite: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("ARC", "IRC"):
            raise ValueError(f"budget type must be ARC or IRC, got {self.kind!r}")
        if self.kind == "ARC" and not self.epsilon >= 0:
            raise ValueError(f"budget epsilon must be >= 0, got {self.epsilon}")
        if self.kind == "IRC" and any(not e >= 0 for e in self.per_satellite):
            raise ValueError("individual budgets must be >= 0")

    @classmethod
    def arc(cls, epsilon: float) -> "Budget":
        return cls("ARC", float(epsilon))

    @classmethod
    def irc(cls, eps_i) -> "Budget":
        return cls("IRC", math.inf, tuple(float(e) for e in eps_i))

    @property
    def n_limited(self) -> int:
        """Satellites carrying an individual limit (|I'|)."""
        return sum(1 for e in self.per_satellite if math.isfinite(e))

    def feasible(self, cost, slot_of) -> bool:
        slot_of = np.asarray(slot_of)
        used = np.asarray(cost)[np.arange(slot_of.size), slot_of]
        if self.kind == "ARC":
            return bool(used.sum() <= self.epsilon)
        return bool(np.all(used <= np.asarray(self.per_satellite)))


@dataclass
class ReconInstance:
    slots: list
    targets: list
    grid: TimeGrid
    rewards: np.ndarray
    thresholds: np.ndarray
    visibility: VisibilityTensor
    cost: np.ndarray
    budget: Budget
    satellites: list | None = None
    initial_slots: np.ndarray | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rewards = np.asarray(self.rewards, dtype=float)
        self.thresholds = np.asarray(self.thresholds, dtype=np.int64)
        self.cost = np.asarray(self.cost, dtype=float)
        if self.initial_slots is not None:
            self.initial_slots = np.asarray(self.initial_slots, dtype=np.int64)
        self.validate()

    @property
    def n_sats(self) -> int:
        return self.cost.shape[0]

    @property
    def n_slots(self) -> int:
        return self.cost.shape[1]

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    @property
    def m(self) -> int:
        return self.grid.m

    @property
    def slot_sub(self) -> np.ndarray:
        return self.visibility.slot_sub

    def validate(self) -> None:
        m, J, P = self.visibility.shape
        I = self.n_sats
        if m != self.grid.m:
            raise InstanceFormatError(f"visibility has {m} steps, grid has {self.grid.m}")
        if J != len(self.slots) or self.cost.shape != (I, J):
            raise InstanceFormatError(f"slot count mismatch: V {J}, slots {len(self.slots)}, cost {self.cost.shape}")
        if P != len(self.targets):
            raise InstanceFormatError(f"target count mismatch: V {P}, targets {len(self.targets)}")
        if self.rewards.shape != (m, P) or self.thresholds.shape != (m, P):
            raise InstanceFormatError("rewards and thresholds must have shape (m, P)")
        if I > J:
            raise InstanceFormatError(f"{I} satellites cannot occupy {J} slots")
        if np.any(~np.isfinite(self.rewards)) or np.any(self.rewards < 0):
            raise InstanceFormatError("rewards must be finite and non-negative")
        if np.any(self.thresholds < 1):
            raise InstanceFormatError("coverage thresholds must be >= 1")
        if np.any(~np.isfinite(self.cost)) or np.any(self.cost < 0):
            raise InstanceFormatError("costs must be finite and non-negative")
        if self.budget.kind == "IRC" and len(self.budget.per_satellite) != I:
            raise InstanceFormatError("IRC budget needs one entry per satellite")
        if self.satellites is not None and len(self.satellites) != I:
            raise InstanceFormatError("satellite element count does not match the cost matrix")
        if self.initial_slots is not None:
            if self.initial_slots.shape != (I,) or np.unique(self.initial_slots).size != I:
                raise InstanceFormatError("initial slots must be distinct, one per satellite")
        periods = [s.get("repeat_period_s") for s in self.meta.get("subconstellations", [])]
        periods = [p for p in periods if p is not None]
        if periods and max(periods) - min(periods) > 1e-6 * max(periods):
            raise InstanceFormatError("subconstellations violate the synchronous condition T_s = T")

    def with_budget(self, budget: Budget) -> "ReconInstance":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d["budget"] = budget
        return ReconInstance(**d)


@dataclass
class ParetoPoint:
    epsilon: float
    realized_cost: float
    reward: float
    lower_bound: float
    gap: float
    upper_bound: float = math.nan
    iterations: int = 0
    status: str = "ok"


def problem_size(inst: ReconInstance) -> dict:
    """Variable and constraint counts of the integer program, domains excluded."""
    I, J, m, P = inst.n_sats, inst.n_slots, inst.m, inst.n_targets
    extra = 1 if inst.budget.kind == "ARC" else inst.budget.n_limited
    return {
        "phi_variables": I * J,
        "y_variables": m * P,
        "variables": I * J + m * P,
        "constraints": I + J + m * P + extra,
    }


def lp_bound_hat(inst: ReconInstance) -> float:
    """Analytic lower bound ``max(-|I| sum xi v, -sum pi)`` (minimization sign).

    Needs a single-subconstellation circulant tensor and ``pi/r`` constant in
    time for every target.
    """
    V = inst.visibility
    if not V.is_circulant or V.profiles.shape[0] != 1:
        raise BoundInapplicable("analytic LP bound needs one circulant subconstellation")
    xi = inst.rewards / inst.thresholds
    if not np.allclose(xi, xi[:1, :], rtol=1e-12, atol=0.0):
        raise BoundInapplicable("analytic LP bound needs time-invariant pi/r per target")
    v = V.profiles[0].T  # (m, P)
    first = -inst.n_sats * float(np.sum(xi * v))
    return max(first, -float(inst.rewards.sum()))


def epsilon_schedule(cost_or_inst, steps: int) -> list[float]:
    """``steps`` budgets ``eps_max * k / steps``, k = 1..steps, with ``eps_max = max c``."""
    if steps < 1:
        raise ValueError("schedule needs at least one step")
    cost = cost_or_inst.cost if isinstance(cost_or_inst, ReconInstance) else np.asarray(cost_or_inst)
    eps_max = float(cost.max()) if cost.size else 0.0
    return [eps_max * k / steps for k in range(1, steps + 1)]


# --------------------------------------------------------------------------
# generators

def generate_instance(
    shape: tuple[int, int, int, int],
    seed: int,
    policy: TransferPolicy | None = None,
    epsilon: float | None = None,
) -> ReconInstance:
    """Random RGT instance ``(|I|, |J|, |P|, |T|)`` in the style of the benchmark suite.

    One common-ground-track subconstellation with N_D = 3, circular orbits and
    the reference slot at RAAN = u = 0. N_P, inclination and the minimum
    elevation are drawn from [30, 45], [0, 120] deg and [5, 20] deg.
    """
    I, J, P, T = (int(v) for v in shape)
    if min(I, J, P, T) < 1:
        raise ValueError(f"shape entries must be positive, got {shape}")
    if T != J:
        raise ValueError("generated instances use |T| = |J|")
    if I > J:
        raise ValueError("more satellites than slots")
    policy = policy or TransferPolicy(phasing_angle_mode="computed")
    rng = np.random.default_rng(seed)
    n_p = int(rng.integers(30, 46))
    inc = float(rng.uniform(0.0, 120.0)) * DEG
    min_el = float(rng.uniform(5.0, 20.0)) * DEG
    spec = RgtSpec(n_p, 3, inc)
    sma = solve_rgt_sma(spec)
    period = rgt_repeat_period(spec, sma)
    grid = TimeGrid.over_horizon(period, T)
    reference = OrbitalElements.circular(sma, inc, 0.0, 0.0)
    slots = rgt_slots(reference, spec, J)

    band = min(inc, math.pi - inc)
    lats = rng.uniform(-band, band, size=P)
    lons = rng.uniform(-math.pi, math.pi, size=P)
    targets = [GeodeticTarget(float(a), float(b), min_el, f"p{k}") for k, (a, b) in enumerate(zip(lats, lons))]

    initial = rng.choice(J, size=I, replace=False)
    rewards = rng.uniform(0.0, 1.0, size=(T, P))

    profiles = reference_profiles(reference, targets, grid)
    V = VisibilityTensor.from_profiles(profiles[None], np.zeros(J, dtype=np.int64), np.arange(J))
    satellites = [slots[k] for k in initial]
    cost = build_cost_matrix(satellites, slots, policy)
    eps = float(cost.max()) if epsilon is None else float(epsilon)
    meta = {
        "generator": "rgt",
        "shape": [I, J, P, T],
        "rgt": {"n_p": spec.n_p, "n_d": spec.n_d, "inc_rad": inc, "sma_km": sma},
        "min_elevation_rad": min_el,
        "transfer_policy": asdict(policy),
        "subconstellations": [{"index": 0, "repeat_period_s": period, "rgt": [spec.n_p, spec.n_d]}],
    }
    return ReconInstance(
        slots=slots,
        targets=targets,
        grid=grid,
        rewards=rewards,
        thresholds=np.ones((T, P), dtype=np.int64),
        visibility=V,
        cost=cost,
        budget=Budget.arc(eps),
        satellites=satellites,
        initial_slots=initial,
        seed=seed,
        meta=meta,
    )


def mcp_instance(
    reference: OrbitalElements,
    spec: RgtSpec,
    targets,
    m: int,
    n_sats: int,
    epoch: float = 0.0,
    rewards=None,
    thresholds=None,
) -> ReconInstance:
    """Pure coverage-design instance: ``n_sats`` free satellites, zero transfer cost."""
    period = rgt_repeat_period(spec, reference.sma)
    grid = TimeGrid.over_horizon(period, m, epoch)
    slots = rgt_slots(reference, spec, m)
    P = len(targets)
    profiles = reference_profiles(reference, targets, grid)
    V = VisibilityTensor.from_profiles(profiles[None], np.zeros(m, dtype=np.int64), np.arange(m))
    return ReconInstance(
        slots=slots,
        targets=list(targets),
        grid=grid,
        rewards=np.ones((m, P)) if rewards is None else rewards,
        thresholds=np.ones((m, P), dtype=np.int64) if thresholds is None else thresholds,
        visibility=V,
        cost=np.zeros((n_sats, m)),
        budget=Budget.arc(0.0),
        meta={"generator": "mcp", "subconstellations": [{"index": 0, "repeat_period_s": period}]},
    )


def random_instance(
    shape: tuple[int, int, int, int],
    seed: int,
    density: float = 0.3,
    max_threshold: int = 1,
    max_cost: float = 2.0,
) -> ReconInstance:
    """Synthetic instance with Bernoulli visibility, for oracle cross-checks.

    The slot elements are placeholders (visibility is not derived from them).
    Costs are uniform in ``[0, max_cost]`` except the zero-cost initial slots.
    """
    I, J, P, m = (int(v) for v in shape)
    if I > J:
        raise ValueError("more satellites than slots")
    rng = np.random.default_rng(seed)
    dense = rng.random((m, J, P)) < density
    initial = rng.choice(J, size=I, replace=False)
    cost = rng.uniform(0.0, max_cost, size=(I, J))
    cost[np.arange(I), initial] = 0.0
    sma = R_EARTH_MEAN + 1000.0
    slots = [OrbitalElements.circular(sma, 0.9, 2 * math.pi * j / J, 0.0) for j in range(J)]
    return ReconInstance(
        slots=slots,
        targets=[GeodeticTarget(0.0, 2 * math.pi * p / max(P, 1) - math.pi, 0.0, f"p{p}") for p in range(P)],
        grid=TimeGrid(m, 60.0),
        rewards=rng.uniform(0.0, 1.0, size=(m, P)),
        thresholds=rng.integers(1, max_threshold + 1, size=(m, P)),
        visibility=VisibilityTensor.from_dense(dense),
        cost=cost,
        budget=Budget.arc(float(cost.max())),
        initial_slots=initial,
        seed=seed,
        meta={"generator": "random", "density": density},
    )


# Initial federation of the disaster-monitoring scenario: a km, inc, RAAN, u (deg), delta-v limit km/s.
TONGA_SATELLITES = [
    (8236.65, 73.68, 79.09, 338.41, 2.79),
    (7574.06, 28.89, 352.30, 294.35, 2.60),
    (7939.43, 57.38, 292.21, 121.00, 2.06),
    (8990.08, 77.94, 61.90, 63.15, 4.80),
    (6889.94, 33.60, 293.84, 134.22, 4.12),
    (7182.06, 32.05, 98.67, 2.05, 3.40),
    (8555.01, 27.04, 155.41, 90.87, 3.67),
]
TONGA_TARGETS = [
    ("Getty", 34.09, -118.47),
    ("Asheikri", 11.96, 12.93),
    ("Hunga Tonga-Hunga Ha'apai", -21.18, -175.19),
]


def tonga_instance(
    seed: int = 0,
    n_slots: int = 10_000,
    m: int = 5_000,
    horizon_days: float = 7.0,
    min_elevation_deg: float = 10.0,
    policy: TransferPolicy | None = None,
) -> ReconInstance:
    """Non-RGT federated-monitoring scenario with individual delta-v limits.

    Random circular slots (altitude 500-2500 km over the mean radius,
    inclination 20-85 deg) plus one zero-cost stay slot per satellite.
    """
    policy = policy or TransferPolicy(phasing_angle_mode="worst-case")
    rng = np.random.default_rng(seed)
    sats = [OrbitalElements.circular(a, i * DEG, raan * DEG, u * DEG) for a, i, raan, u, _ in TONGA_SATELLITES]
    eps_i = [e for *_, e in TONGA_SATELLITES]
    sma = rng.uniform(R_EARTH_MEAN + 500.0, R_EARTH_MEAN + 2500.0, n_slots)
    inc = rng.uniform(20.0, 85.0, n_slots) * DEG
    raan = rng.uniform(0.0, 2 * math.pi, n_slots)
    u = rng.uniform(0.0, 2 * math.pi, n_slots)
    slots = [OrbitalElements.circular(*vals) for vals in zip(sma, inc, raan, u)] + sats
    targets = [GeodeticTarget(lat * DEG, lon * DEG, min_elevation_deg * DEG, name) for name, lat, lon in TONGA_TARGETS]
    grid = TimeGrid.over_horizon(horizon_days * 86400.0, m)
    V = build_visibility(slots, targets, grid)
    cost = build_cost_matrix(sats, slots, policy)
    rewards = rng.uniform(0.0, 1.0, size=(m, len(targets)))
    I = len(sats)
    return ReconInstance(
        slots=slots,
        targets=targets,
        grid=grid,
        rewards=rewards,
        thresholds=np.ones((m, len(targets)), dtype=np.int64),
        visibility=V,
        cost=cost,
        budget=Budget.irc(eps_i),
        satellites=sats,
        initial_slots=np.arange(n_slots, n_slots + I),
        seed=seed,
        meta={"generator": "tonga", "transfer_policy": asdict(policy), "horizon_days": horizon_days},
    )


# --------------------------------------------------------------------------
# serialization

def _els_to_list(els):
    return [[float(v) for v in e.as_array()] for e in els]


def _els_from_list(rows):
    return [OrbitalElements(*map(float, r)) for r in rows]


def _visibility_to_json(V: VisibilityTensor) -> dict:
    if V.is_circulant:
        return {
            "mode": "circulant",
            "profiles": [["".join("1" if b else "0" for b in row) for row in sub] for sub in V.profiles],
            "offsets": V.offsets.tolist(),
        }
    return {
        "mode": "dense",
        "packed_shape": list(V.bits.shape),
        "data": base64.b64encode(V.bits.astype("<u8").tobytes()).decode("ascii"),
    }


def _visibility_from_json(d: dict, m: int, slot_sub) -> VisibilityTensor:
    mode = d["mode"]
    if mode == "circulant":
        profiles = np.array([[[c == "1" for c in row] for row in sub] for sub in d["profiles"]], dtype=bool)
        if profiles.ndim != 3 or profiles.shape[2] != m:
            raise InstanceFormatError("circulant profiles do not match the time grid")
        return VisibilityTensor.from_profiles(profiles, slot_sub, d["offsets"])
    if mode == "dense":
        shape = tuple(d["packed_shape"])
        raw = base64.b64decode(d["data"].encode("ascii"), validate=True)
        bits = np.frombuffer(raw, dtype="<u8").astype(np.uint64)
        if bits.size != int(np.prod(shape)):
            raise InstanceFormatError("packed visibility payload has the wrong length")
        return VisibilityTensor(bits.reshape(shape), m, slot_sub)
    raise InstanceFormatError(f"unknown visibility mode {mode!r}")


def instance_to_dict(inst: ReconInstance) -> dict:
    b = inst.budget
    if b.kind == "ARC":
        budget = {"type": "ARC", "units": "km/s", "values": b.epsilon}
    else:
        budget = {"type": "IRC", "units": "km/s",
                  "values": [e if math.isfinite(e) else None for e in b.per_satellite]}
    return {
        "schema": "rcrp-instance",
        "version": SCHEMA_VERSION,
        "meta": {**inst.meta, "seed": inst.seed,
                 "units": {"length": "km", "angle": "rad", "time": "s", "cost": "km/s"}},
        "grid": {"m": inst.grid.m, "dt_s": inst.grid.dt, "epoch_j2000_s": inst.grid.epoch},
        "slots": _els_to_list(inst.slots),
        "slot_subconstellation": inst.slot_sub.tolist(),
        "subconstellations": inst.meta.get("subconstellations", []),
        "satellites": None if inst.satellites is None else _els_to_list(inst.satellites),
        "initial_slots": None if inst.initial_slots is None else inst.initial_slots.tolist(),
        "targets": [{"name": t.name, "lat_rad": t.lat, "lon_rad": t.lon, "min_elevation_rad": t.min_elevation}
                    for t in inst.targets],
        "rewards": inst.rewards.tolist(),
        "thresholds": inst.thresholds.tolist(),
        "budget": budget,
        "visibility": _visibility_to_json(inst.visibility),
        "cost": {"units": "km/s", "inline": inst.cost.tolist()},
    }


def instance_from_dict(d: dict, base_dir: Path | None = None) -> ReconInstance:
    try:
        if d.get("schema") != "rcrp-instance":
            raise InstanceFormatError("not an rcrp instance file")
        if d.get("version") != SCHEMA_VERSION:
            raise InstanceFormatError(f"unsupported instance schema version {d.get('version')!r}")
        g = d["grid"]
        grid = TimeGrid(int(g["m"]), float(g["dt_s"]), float(g["epoch_j2000_s"]))
        slots = _els_from_list(d["slots"])
        V = _visibility_from_json(d["visibility"], grid.m, d["slot_subconstellation"])
        c = d["cost"]
        if "inline" in c:
            cost = np.array(c["inline"], dtype=float)
        else:
            from .transfer import read_cost_csv

            path = Path(c["csv"])
            cost = read_cost_csv(path if path.is_absolute() or base_dir is None else base_dir / path)
        bud = d["budget"]
        if bud["type"] == "ARC":
            budget = Budget.arc(float(bud["values"]))
        elif bud["type"] == "IRC":
            budget = Budget.irc([math.inf if v is None else float(v) for v in bud["values"]])
        else:
            raise InstanceFormatError(f"unknown budget type {bud['type']!r}")
        meta = dict(d.get("meta", {}))
        seed = meta.pop("seed", None)
        meta.pop("units", None)
        return ReconInstance(
            slots=slots,
            targets=[GeodeticTarget(t["lat_rad"], t["lon_rad"], t["min_elevation_rad"], t.get("name", ""))
                     for t in d["targets"]],
            grid=grid,
            rewards=np.array(d["rewards"], dtype=float).reshape(grid.m, -1),
            thresholds=np.array(d["thresholds"], dtype=np.int64).reshape(grid.m, -1),
            visibility=V,
            cost=cost.reshape(-1, len(slots)) if cost.size else cost.reshape(0, len(slots)),
            budget=budget,
            satellites=None if d.get("satellites") is None else _els_from_list(d["satellites"]),
            initial_slots=d.get("initial_slots"),
            seed=seed,
            meta=meta,
        )
    except InstanceFormatError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise InstanceFormatError(f"invalid instance data: {exc}") from exc


def save_instance(inst: ReconInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst)))


def load_instance(path) -> ReconInstance:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno} col {exc.colno})") from exc
    return instance_from_dict(d, path.parent)


RESULT_FIELDS = ("epsilon", "assignment", "coverage_fraction", "reward", "lower_bound", "gap",
                 "iterations", "wall_time_s")


def save_result(data: dict, path) -> None:
    missing = [k for k in RESULT_FIELDS if k not in data]
    if missing:
        raise InstanceFormatError(f"result is missing fields {missing}")
    out = {"schema": "rcrp-result", "version": SCHEMA_VERSION, **data}
    Path(path).write_text(json.dumps(out, indent=2, allow_nan=True))


def load_result(path) -> dict:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: not valid JSON ({exc.msg})") from exc
    if d.get("schema") != "rcrp-result" or d.get("version") != SCHEMA_VERSION:
        raise InstanceFormatError(f"{path}: not a version-{SCHEMA_VERSION} result file")
    missing = [k for k in RESULT_FIELDS if k not in d]
    if missing:
        raise InstanceFormatError(f"{path}: result is missing fields {missing}")
    return d


PARETO_FIELDS = [f for f in ParetoPoint.__dataclass_fields__]


def write_pareto_csv(points, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=PARETO_FIELDS)
        w.writeheader()
        for pt in points:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in asdict(pt).items()})


def read_pareto_csv(path) -> list[ParetoPoint]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        out.append(ParetoPoint(
            epsilon=float(row["epsilon"]),
            realized_cost=float(row["realized_cost"]),
            reward=float(row["reward"]),
            lower_bound=float(row["lower_bound"]),
            gap=float(row["gap"]),
            upper_bound=float(row["upper_bound"]),
            iterations=int(row["iterations"]),
            status=row["status"],
        ))
    return out
