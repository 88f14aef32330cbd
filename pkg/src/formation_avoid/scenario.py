"""Problem description: formation, intruders, envelope, safety minima, weights.

All quantities are in an Earth-fixed frame aligned with the planned course:
axis 1 along-course, axis 2 lateral (positive left of course), axis 3
vertical (positive up).  Units are ft, ft/s, ft/s^2 and seconds throughout.
Time steps are 1-based (step i corresponds to elapsed time (i-1)*dt).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AxisTriple",
    "PerformanceEnvelope",
    "SafetyParams",
    "WakeBox",
    "Weights",
    "FormationSpec",
    "Intruder",
    "Scenario",
    "TrajectorySet",
    "ConflictEntry",
    "ConflictReport",
    "ScenarioError",
    "SchemaError",
    "PhysicsError",
    "parse_scenario",
    "scenario_to_json",
    "nominal_trajectory",
    "predict_conflict",
    "designated_positions",
]


class ScenarioError(ValueError):
    """Configuration rejected; `path` locates the offending field."""

    kind = "error"

    def __init__(self, path: str, detail: str):
        self.path = path
        self.detail = detail
        super().__init__(f"{self.kind}: {path}: {detail}")


class SchemaError(ScenarioError):
    kind = "schema violation"


class PhysicsError(ScenarioError):
    kind = "physics violation"


@dataclass(frozen=True)
class AxisTriple:
    """One value per spatial axis (1 along-course, 2 lateral, 3 vertical)."""

    d1: float
    d2: float
    d3: float

    def __post_init__(self):
        for name in ("d1", "d2", "d3"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise SchemaError(name, f"expected a finite number, got {v!r}")
            object.__setattr__(self, name, float(v))

    def __iter__(self):
        return iter((self.d1, self.d2, self.d3))

    def __getitem__(self, axis: int) -> float:
        return (self.d1, self.d2, self.d3)[axis]

    def as_array(self) -> np.ndarray:
        return np.array([self.d1, self.d2, self.d3], dtype=float)

    @staticmethod
    def of(values) -> "AxisTriple":
        seq = list(values)
        if len(seq) != 3:
            raise SchemaError("axis triple", f"expected exactly 3 components, got {len(seq)}")
        return AxisTriple(*seq)


@dataclass(frozen=True)
class PerformanceEnvelope:
    """Box bounds on velocity and acceleration per axis."""

    v_lo: AxisTriple
    v_hi: AxisTriple
    u_lo: AxisTriple
    u_hi: AxisTriple

    def check(self, path: str = "envelope"):
        # equal bounds are allowed so an axis can be pinned (e.g. no vertical motion)
        for d in range(3):
            if not self.v_lo[d] <= self.v_hi[d]:
                raise PhysicsError(f"{path}.v", f"v_min must be <= v_max on axis {d + 1}")
            if not (self.u_lo[d] <= 0.0 <= self.u_hi[d]):
                raise PhysicsError(f"{path}.u", f"acceleration bounds must straddle 0 on axis {d + 1}")

    def contains_velocity(self, v: AxisTriple) -> bool:
        return all(self.v_lo[d] <= v[d] <= self.v_hi[d] for d in range(3))


@dataclass(frozen=True)
class WakeBox:
    """Axis-aligned hazard region trailing a generator aircraft.

    Relative to the generator, the box spans [-behind_len, 0) along-course,
    [-half_width, half_width] laterally and [-below_depth, above_height]
    vertically.
    """

    behind_len: float = 5000.0
    half_width: float = 100.0
    below_depth: float = 300.0
    above_height: float = 100.0

    def check(self, path: str = "safety.wake_box"):
        for name in ("behind_len", "half_width", "below_depth", "above_height"):
            if getattr(self, name) <= 0:
                raise PhysicsError(f"{path}.{name}", "must be > 0")


@dataclass(frozen=True)
class SafetyParams:
    formation_sep: AxisTriple = AxisTriple(300.0, 300.0, 100.0)
    intruder_sep: AxisTriple = AxisTriple(1500.0, 1500.0, 600.0)
    wake_box: WakeBox = WakeBox()
    course_half_width: float = 4000.0
    formation_tol: AxisTriple = AxisTriple(200.0, 200.0, 50.0)

    def check(self, path: str = "safety"):
        for name in ("formation_sep", "intruder_sep", "formation_tol"):
            triple = getattr(self, name)
            for d in range(3):
                if triple[d] <= 0:
                    raise PhysicsError(f"{path}.{name}", f"axis {d + 1} must be > 0")
        if self.course_half_width <= 0:
            raise PhysicsError(f"{path}.course_half_width", "must be > 0")
        self.wake_box.check(f"{path}.wake_box")


@dataclass(frozen=True)
class Weights:
    """Objective weights: maneuver (s^2/ft), drag (1/ft), smoothness (1/ft),
    avoidance (per aircraft-step away from its designated position)."""

    maneuver: float = 1.0
    drag: float = 0.25
    smoothness: float = 10.0
    avoidance: float = 50.0

    def check(self, path: str = "weights"):
        for name in ("maneuver", "drag", "smoothness", "avoidance"):
            if getattr(self, name) < 0:
                raise PhysicsError(f"{path}.{name}", "must be >= 0")


@dataclass(frozen=True)
class FormationSpec:
    """V-formation: aircraft 1 is the lead; slot k is the designated offset
    of the (k+1)-th aircraft relative to the lead."""

    count: int
    slot_offsets: tuple[AxisTriple, ...]
    initial_positions: tuple[AxisTriple, ...]
    initial_velocities: tuple[AxisTriple, ...]

    def check(self, path: str = "formation"):
        if self.count < 1:
            raise PhysicsError(f"{path}.count", "need at least one aircraft")
        if len(self.slot_offsets) != self.count - 1:
            raise SchemaError(f"{path}.slot_offsets", f"expected {self.count - 1} offsets, got {len(self.slot_offsets)}")
        if len(self.initial_positions) != self.count:
            raise SchemaError(f"{path}.initial_positions", f"expected {self.count} entries, got {len(self.initial_positions)}")
        if len(self.initial_velocities) != self.count:
            raise SchemaError(f"{path}.initial_velocities", f"expected {self.count} entries, got {len(self.initial_velocities)}")
        seen = set()
        for k, off in enumerate(self.slot_offsets):
            key = (off.d1, off.d2, off.d3)
            if key in seen or key == (0.0, 0.0, 0.0):
                raise PhysicsError(f"{path}.slot_offsets[{k}]", "slot offsets must be pairwise distinct and non-lead")
            seen.add(key)
        v0 = self.initial_velocities[0]
        for p, v in enumerate(self.initial_velocities[1:], start=2):
            if (v.d1, v.d2, v.d3) != (v0.d1, v0.d2, v0.d3):
                raise PhysicsError(f"{path}.initial_velocities[{p - 1}]", "formation starts with a common velocity")


@dataclass(frozen=True)
class Intruder:
    position: AxisTriple
    velocity: AxisTriple  # constant over the horizon, zero acceleration


@dataclass(frozen=True)
class Scenario:
    """Immutable problem description; all downstream code treats it as read-only."""

    dt: float = 1.0
    steps: int = 30
    wind: AxisTriple = AxisTriple(0.0, 0.0, 0.0)
    formation: FormationSpec = field(default_factory=lambda: _default_formation(2))
    intruders: tuple[Intruder, ...] = ()
    envelope: PerformanceEnvelope = field(default_factory=lambda: DEFAULT_ENVELOPE)
    safety: SafetyParams = SafetyParams()
    weights: Weights = Weights()
    terminal_window: int = 5

    @property
    def n_aircraft(self) -> int:
        return self.formation.count

    @property
    def n_intruders(self) -> int:
        return len(self.intruders)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps) * self.dt

    def check(self):
        if self.dt <= 0:
            raise PhysicsError("dt", f"must be > 0, got {self.dt}")
        if self.terminal_window < 1:
            raise PhysicsError("terminal_window", "must be >= 1")
        if self.steps < self.terminal_window + 1:
            raise PhysicsError("steps", f"need at least terminal_window + 1 = {self.terminal_window + 1}")
        self.formation.check()
        self.envelope.check()
        self.safety.check()
        self.weights.check()
        for p, v in enumerate(self.formation.initial_velocities, start=1):
            if not self.envelope.contains_velocity(v):
                raise PhysicsError(f"formation.initial_velocities[{p - 1}]", "initial state outside envelope")

    def slot_offset_of(self, p: int) -> AxisTriple:
        """Designated offset of 1-based aircraft p under the identity assignment."""
        if p == 1:
            return AxisTriple(0.0, 0.0, 0.0)
        return self.formation.slot_offsets[p - 2]


# Narrow-body cruise performance; not taken from published flight-test data.
DEFAULT_ENVELOPE = PerformanceEnvelope(
    v_lo=AxisTriple(680.0, -100.0, -42.0),
    v_hi=AxisTriple(820.0, 100.0, 42.0),
    u_lo=AxisTriple(-2.0, -8.0, -4.0),
    u_hi=AxisTriple(2.0, 8.0, 4.0),
)

CRUISE_VELOCITY = AxisTriple(750.0, 0.0, 0.0)


def default_slot_offsets(count: int) -> tuple[AxisTriple, ...]:
    """V-shape behind the lead: odd slots on the right (negative lateral),
    even slots on the left, stepping 2000 ft back and 1500 ft out per row."""
    offsets = []
    for k in range(1, count):
        row = (k + 1) // 2
        side = -1.0 if k % 2 == 1 else 1.0
        offsets.append(AxisTriple(-2000.0 * row, side * 1500.0 * row, 0.0))
    return tuple(offsets)


def _default_formation(count: int) -> FormationSpec:
    offsets = default_slot_offsets(count)
    positions = (AxisTriple(0.0, 0.0, 0.0),) + offsets
    velocities = tuple(CRUISE_VELOCITY for _ in range(count))
    return FormationSpec(count, offsets, positions, velocities)


# ---------------------------------------------------------------------------
# JSON parsing

_TOP_KEYS = {"dt", "steps", "wind", "formation", "intruders", "envelope",
             "safety", "weights", "terminal_window"}


def _require_mapping(obj, path: str) -> dict:
    if not isinstance(obj, dict):
        raise SchemaError(path, f"expected an object, got {type(obj).__name__}")
    return obj


def _reject_unknown(obj: dict, allowed: set, path: str):
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaError(path, f"unknown key(s): {', '.join(sorted(unknown))}")


def _number(obj: dict, key: str, default, path: str) -> float:
    if key not in obj:
        if default is None:
            raise SchemaError(f"{path}.{key}" if path else key, "missing required field")
        return default
    v = obj[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise SchemaError(f"{path}.{key}" if path else key, f"expected a number, got {v!r}")
    return float(v)


def _integer(obj: dict, key: str, default, path: str) -> int:
    v = _number(obj, key, default, path)
    if v != int(v):
        raise SchemaError(f"{path}.{key}" if path else key, f"expected an integer, got {v}")
    return int(v)


def _triple(value, path: str) -> AxisTriple:
    if not isinstance(value, list) or len(value) != 3:
        raise SchemaError(path, "expected a list of 3 numbers")
    try:
        return AxisTriple.of(value)
    except ScenarioError as exc:
        raise SchemaError(path, exc.detail) from None


def _triple_key(obj: dict, key: str, default: AxisTriple, path: str) -> AxisTriple:
    if key not in obj:
        return default
    return _triple(obj[key], f"{path}.{key}" if path else key)


def _parse_formation(obj, path: str = "formation") -> FormationSpec:
    obj = _require_mapping(obj, path)
    _reject_unknown(obj, {"count", "slot_offsets", "initial_positions", "initial_velocities"}, path)

    offsets_raw = obj.get("slot_offsets")
    if offsets_raw is not None and not isinstance(offsets_raw, list):
        raise SchemaError(f"{path}.slot_offsets", "expected a list")
    if "count" in obj:
        count = _integer(obj, "count", None, path)
    elif offsets_raw is not None:
        count = len(offsets_raw) + 1
    else:
        count = 2
    if count < 1:
        raise PhysicsError(f"{path}.count", "need at least one aircraft")
    if offsets_raw is None:
        offsets = default_slot_offsets(count)
    else:
        offsets = tuple(_triple(o, f"{path}.slot_offsets[{k}]") for k, o in enumerate(offsets_raw))

    if "initial_positions" in obj:
        raw = obj["initial_positions"]
        if not isinstance(raw, list):
            raise SchemaError(f"{path}.initial_positions", "expected a list")
        positions = tuple(_triple(x, f"{path}.initial_positions[{k}]") for k, x in enumerate(raw))
    else:
        positions = (AxisTriple(0.0, 0.0, 0.0),) + offsets

    if "initial_velocities" in obj:
        raw = obj["initial_velocities"]
        if not isinstance(raw, list):
            raise SchemaError(f"{path}.initial_velocities", "expected a list")
        velocities = tuple(_triple(x, f"{path}.initial_velocities[{k}]") for k, x in enumerate(raw))
    else:
        velocities = tuple(CRUISE_VELOCITY for _ in range(count))

    return FormationSpec(count, offsets, positions, velocities)


def _parse_intruders(obj, path: str = "intruders") -> tuple[Intruder, ...]:
    if not isinstance(obj, list):
        raise SchemaError(path, "expected a list")
    out = []
    for k, entry in enumerate(obj):
        entry = _require_mapping(entry, f"{path}[{k}]")
        _reject_unknown(entry, {"position", "velocity"}, f"{path}[{k}]")
        if "position" not in entry:
            raise SchemaError(f"{path}[{k}].position", "missing required field")
        if "velocity" not in entry:
            raise SchemaError(f"{path}[{k}].velocity", "missing required field")
        out.append(Intruder(_triple(entry["position"], f"{path}[{k}].position"),
                            _triple(entry["velocity"], f"{path}[{k}].velocity")))
    return tuple(out)


def _parse_envelope(obj, path: str = "envelope") -> PerformanceEnvelope:
    obj = _require_mapping(obj, path)
    _reject_unknown(obj, {"v_min", "v_max", "u_min", "u_max"}, path)
    d = DEFAULT_ENVELOPE
    return PerformanceEnvelope(
        v_lo=_triple_key(obj, "v_min", d.v_lo, path),
        v_hi=_triple_key(obj, "v_max", d.v_hi, path),
        u_lo=_triple_key(obj, "u_min", d.u_lo, path),
        u_hi=_triple_key(obj, "u_max", d.u_hi, path),
    )


def _parse_safety(obj, path: str = "safety") -> SafetyParams:
    obj = _require_mapping(obj, path)
    _reject_unknown(obj, {"formation_sep", "intruder_sep", "wake_box", "course_half_width", "formation_tol"}, path)
    d = SafetyParams()
    wake = d.wake_box
    if "wake_box" in obj:
        w = _require_mapping(obj["wake_box"], f"{path}.wake_box")
        _reject_unknown(w, {"behind_len", "half_width", "below_depth", "above_height"}, f"{path}.wake_box")
        wake = WakeBox(
            behind_len=_number(w, "behind_len", wake.behind_len, f"{path}.wake_box"),
            half_width=_number(w, "half_width", wake.half_width, f"{path}.wake_box"),
            below_depth=_number(w, "below_depth", wake.below_depth, f"{path}.wake_box"),
            above_height=_number(w, "above_height", wake.above_height, f"{path}.wake_box"),
        )
    return SafetyParams(
        formation_sep=_triple_key(obj, "formation_sep", d.formation_sep, path),
        intruder_sep=_triple_key(obj, "intruder_sep", d.intruder_sep, path),
        wake_box=wake,
        course_half_width=_number(obj, "course_half_width", d.course_half_width, path),
        formation_tol=_triple_key(obj, "formation_tol", d.formation_tol, path),
    )


def _parse_weights(obj, path: str = "weights") -> Weights:
    obj = _require_mapping(obj, path)
    _reject_unknown(obj, {"maneuver", "drag", "smoothness", "avoidance"}, path)
    d = Weights()
    return Weights(
        maneuver=_number(obj, "maneuver", d.maneuver, path),
        drag=_number(obj, "drag", d.drag, path),
        smoothness=_number(obj, "smoothness", d.smoothness, path),
        avoidance=_number(obj, "avoidance", d.avoidance, path),
    )


def parse_scenario(text: str) -> Scenario:
    """Parse a scenario JSON document (strict: unknown keys are an error).

    Every field is either present or defaulted; the returned Scenario has
    passed all schema and physics checks.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("<document>", f"not valid JSON: {exc}") from None
    raw = _require_mapping(raw, "<document>")
    _reject_unknown(raw, _TOP_KEYS, "<document>")

    s = Scenario(
        dt=_number(raw, "dt", 1.0, ""),
        steps=_integer(raw, "steps", 30, ""),
        wind=_triple_key(raw, "wind", AxisTriple(0.0, 0.0, 0.0), ""),
        formation=_parse_formation(raw["formation"]) if "formation" in raw else _default_formation(2),
        intruders=_parse_intruders(raw["intruders"]) if "intruders" in raw else (),
        envelope=_parse_envelope(raw["envelope"]) if "envelope" in raw else DEFAULT_ENVELOPE,
        safety=_parse_safety(raw["safety"]) if "safety" in raw else SafetyParams(),
        weights=_parse_weights(raw["weights"]) if "weights" in raw else Weights(),
        terminal_window=_integer(raw, "terminal_window", 5, ""),
    )
    s.check()
    return s


def scenario_to_json(s: Scenario) -> str:
    """Serialize so that parse(serialize(s)) reproduces every field."""
    doc = {
        "dt": s.dt,
        "steps": s.steps,
        "wind": list(s.wind),
        "formation": {
            "count": s.formation.count,
            "slot_offsets": [list(o) for o in s.formation.slot_offsets],
            "initial_positions": [list(x) for x in s.formation.initial_positions],
            "initial_velocities": [list(v) for v in s.formation.initial_velocities],
        },
        "intruders": [{"position": list(r.position), "velocity": list(r.velocity)} for r in s.intruders],
        "envelope": {
            "v_min": list(s.envelope.v_lo),
            "v_max": list(s.envelope.v_hi),
            "u_min": list(s.envelope.u_lo),
            "u_max": list(s.envelope.u_hi),
        },
        "safety": {
            "formation_sep": list(s.safety.formation_sep),
            "intruder_sep": list(s.safety.intruder_sep),
            "wake_box": {
                "behind_len": s.safety.wake_box.behind_len,
                "half_width": s.safety.wake_box.half_width,
                "below_depth": s.safety.wake_box.below_depth,
                "above_height": s.safety.wake_box.above_height,
            },
            "course_half_width": s.safety.course_half_width,
            "formation_tol": list(s.safety.formation_tol),
        },
        "weights": {
            "maneuver": s.weights.maneuver,
            "drag": s.weights.drag,
            "smoothness": s.weights.smoothness,
            "avoidance": s.weights.avoidance,
        },
        "terminal_window": s.terminal_window,
    }
    return json.dumps(doc, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Trajectories

@dataclass(frozen=True)
class TrajectorySet:
    """Per-step state series: aircraft arrays are (A, T, 3), intruder arrays
    (NI, T, 3).  Arrays are read-only."""

    dt: float
    positions: np.ndarray
    velocities: np.ndarray
    accelerations: np.ndarray
    intruder_positions: np.ndarray
    intruder_velocities: np.ndarray

    def __post_init__(self):
        for name in ("positions", "velocities", "accelerations",
                     "intruder_positions", "intruder_velocities"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_aircraft(self) -> int:
        return self.positions.shape[0]

    @property
    def n_intruders(self) -> int:
        return self.intruder_positions.shape[0]

    @property
    def steps(self) -> int:
        return self.positions.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps) * self.dt


def nominal_trajectory(s: Scenario) -> TrajectorySet:
    """Zero-acceleration, constant-velocity propagation of everyone.

    Aircraft drift with the wind (position gains (v + W)*dt per step);
    intruders advance by their own constant velocity only.
    """
    A, T, NI = s.n_aircraft, s.steps, s.n_intruders
    wind = s.wind.as_array()
    k = np.arange(T)[:, None]  # elapsed steps

    pos = np.empty((A, T, 3))
    vel = np.empty((A, T, 3))
    for p in range(A):
        x0 = s.formation.initial_positions[p].as_array()
        v0 = s.formation.initial_velocities[p].as_array()
        pos[p] = x0 + (v0 + wind) * s.dt * k
        vel[p] = np.broadcast_to(v0, (T, 3))
    acc = np.zeros((A, T, 3))

    ipos = np.empty((NI, T, 3))
    ivel = np.empty((NI, T, 3))
    for r in range(NI):
        x0 = s.intruders[r].position.as_array()
        v0 = s.intruders[r].velocity.as_array()
        ipos[r] = x0 + v0 * s.dt * k
        ivel[r] = np.broadcast_to(v0, (T, 3))

    return TrajectorySet(s.dt, pos, vel, acc, ipos, ivel)


def intruder_positions(s: Scenario) -> np.ndarray:
    """(NI, T, 3) constant-velocity intruder tracks."""
    return nominal_trajectory(s).intruder_positions


# ---------------------------------------------------------------------------
# Conflict prediction

@dataclass(frozen=True)
class ConflictEntry:
    """Nominal-trajectory conflict between one aircraft and one intruder.

    A violation is recorded exactly when all three per-axis absolute gaps
    fall below the intruder separation minima simultaneously.
    """

    aircraft: int  # 1-based
    intruder: int  # 1-based
    first_step: int | None          # 1-based step of first discrete violation
    first_step_time: float | None
    continuous_time: float | None   # closed-form first instant of violation
    gaps_at_first_step: AxisTriple | None

    @property
    def in_conflict(self) -> bool:
        return self.first_step is not None or self.continuous_time is not None


@dataclass(frozen=True)
class ConflictReport:
    entries: tuple[ConflictEntry, ...]

    @property
    def has_conflict(self) -> bool:
        return any(e.in_conflict for e in self.entries)

    def conflicts(self) -> tuple[ConflictEntry, ...]:
        return tuple(e for e in self.entries if e.in_conflict)

    @property
    def first_continuous_time(self) -> float | None:
        times = [e.continuous_time for e in self.entries if e.continuous_time is not None]
        return min(times) if times else None

    @property
    def first_step_time(self) -> float | None:
        times = [e.first_step_time for e in self.entries if e.first_step_time is not None]
        return min(times) if times else None


def _axis_violation_interval(g0: float, dg: float, r: float) -> tuple[float, float] | None:
    """Open interval of t where |g0 + dg*t| < r, or None if empty."""
    if dg == 0.0:
        return (-math.inf, math.inf) if abs(g0) < r else None
    t1 = (-r - g0) / dg
    t2 = (r - g0) / dg
    lo, hi = min(t1, t2), max(t1, t2)
    return (lo, hi)


def _continuous_first_violation(rel0: np.ndarray, relv: np.ndarray,
                                minima: np.ndarray, horizon: float) -> float | None:
    """First instant in [0, horizon] where every per-axis |gap| is below its
    minimum, from the closed-form per-axis linear gap equations."""
    lo, hi = 0.0, horizon
    for d in range(3):
        iv = _axis_violation_interval(rel0[d], relv[d], minima[d])
        if iv is None:
            return None
        lo, hi = max(lo, iv[0]), min(hi, iv[1])
    if lo < hi:  # nonempty interior
        return lo
    return None


def predict_conflict(s: Scenario) -> ConflictReport:
    """Scan nominal trajectories for loss of intruder separation.

    Reports, per (aircraft, intruder) pair, the first discrete step at which
    all three per-axis gaps are simultaneously below the minima, and the
    continuous-time first-violation instant solved in closed form.
    """
    traj = nominal_trajectory(s)
    minima = s.safety.intruder_sep.as_array()
    horizon = (s.steps - 1) * s.dt
    wind = s.wind.as_array()

    entries = []
    for p in range(s.n_aircraft):
        for r in range(s.n_intruders):
            gaps = np.abs(traj.positions[p] - traj.intruder_positions[r])  # (T, 3)
            violating = np.all(gaps < minima, axis=1)
            hit = np.flatnonzero(violating)

            rel0 = (s.formation.initial_positions[p].as_array()
                    - s.intruders[r].position.as_array())
            relv = (s.formation.initial_velocities[p].as_array() + wind
                    - s.intruders[r].velocity.as_array())
            t_cont = _continuous_first_violation(rel0, relv, minima, horizon)

            if hit.size:
                k = int(hit[0])
                entries.append(ConflictEntry(
                    aircraft=p + 1, intruder=r + 1,
                    first_step=k + 1, first_step_time=k * s.dt,
                    continuous_time=t_cont,
                    gaps_at_first_step=AxisTriple.of(gaps[k]),
                ))
            else:
                entries.append(ConflictEntry(
                    aircraft=p + 1, intruder=r + 1,
                    first_step=None, first_step_time=None,
                    continuous_time=t_cont, gaps_at_first_step=None,
                ))
    return ConflictReport(tuple(entries))


def designated_positions(s: Scenario, i: int) -> list[AxisTriple]:
    """Course-fixed target of each aircraft at 1-based step i: the lead's
    nominal position plus the identity-assignment slot offset."""
    if not 1 <= i <= s.steps:
        raise ValueError(f"step {i} outside 1..{s.steps}")
    k = i - 1
    lead = (s.formation.initial_positions[0].as_array()
            + (s.formation.initial_velocities[0].as_array() + s.wind.as_array()) * s.dt * k)
    out = []
    for p in range(1, s.n_aircraft + 1):
        out.append(AxisTriple.of(lead + s.slot_offset_of(p).as_array()))
    return out


def designated_position_array(s: Scenario) -> np.ndarray:
    """(A, T, 3) course-fixed designated positions for every step."""
    lead0 = s.formation.initial_positions[0].as_array()
    vlead = s.formation.initial_velocities[0].as_array() + s.wind.as_array()
    k = np.arange(s.steps)[:, None]
    lead = lead0 + vlead * s.dt * k  # (T, 3)
    out = np.empty((s.n_aircraft, s.steps, 3))
    for p in range(1, s.n_aircraft + 1):
        out[p - 1] = lead + s.slot_offset_of(p).as_array()
    return out
