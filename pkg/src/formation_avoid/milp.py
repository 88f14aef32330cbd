"""Solver-agnostic MILP container: typed variables, linear rows, objective.

Variable names follow a fixed scheme so exported models are reproducible
byte-for-byte: ``x_{i}_{p}_{d}`` (position), ``v``/``u`` likewise,
``g``/``h`` (maneuver/drag slacks, per axis), ``k`` (vertical smoothness
slack), ``b`` (at-designated-position binary), ``sep_{i}_{p}_{q}_{d}_{s}``,
``wk_{i}_{p}_{q}_{f}``, ``a_{i}_{p}_{r}_{d}_{s}`` (disjunction binaries) and
``y_{p}_{slot}`` (slot assignment).  All indices are 1-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

__all__ = [
    "VarKey",
    "LinTerm",
    "LinConstraint",
    "MilpModel",
    "MilpParams",
    "ModelError",
    "fmt",
]

LEQ, GEQ, EQ = "<=", ">=", "="
_SENSES = (LEQ, GEQ, EQ)


class ModelError(ValueError):
    pass


class VarKey(NamedTuple):
    """Typed variable identity; `kind` is the name prefix, `idx` the 1-based indices."""

    kind: str
    idx: tuple[int, ...]

    @property
    def name(self) -> str:
        return "_".join((self.kind, *map(str, self.idx)))

    # constructors, one per variable family
    @staticmethod
    def pos(i, p, d): return VarKey("x", (i, p, d))
    @staticmethod
    def vel(i, p, d): return VarKey("v", (i, p, d))
    @staticmethod
    def acc(i, p, d): return VarKey("u", (i, p, d))
    @staticmethod
    def maneuver_slack(i, p, d): return VarKey("g", (i, p, d))
    @staticmethod
    def drag_slack(i, p, d): return VarKey("h", (i, p, d))
    @staticmethod
    def smooth_slack(i, p): return VarKey("k", (i, p))
    @staticmethod
    def at_place(i, p): return VarKey("b", (i, p))
    @staticmethod
    def sep_bin(i, p, q, d, s): return VarKey("sep", (i, p, q, d, s))
    @staticmethod
    def wake_bin(i, p, q, f): return VarKey("wk", (i, p, q, f))
    @staticmethod
    def intruder_bin(i, p, r, d, s): return VarKey("a", (i, p, r, d, s))
    @staticmethod
    def slot_assign(p, slot): return VarKey("y", (p, slot))


def fmt(x: float) -> str:
    """Shortest exact decimal for a float; never emits -0."""
    if x == 0:
        return "0"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(float(x))


@dataclass
class LinTerm:
    """Linear expression: sum of coefficient * variable plus a constant."""

    terms: list[tuple[float, VarKey]] = field(default_factory=list)
    constant: float = 0.0

    def add(self, coef: float, key: VarKey) -> "LinTerm":
        self.terms.append((float(coef), key))
        return self

    def canonicalized(self) -> "LinTerm":
        """Merge duplicate variables (first-occurrence order), drop zeros."""
        seen: dict[VarKey, int] = {}
        merged: list[tuple[float, VarKey]] = []
        for coef, key in self.terms:
            if key in seen:
                old_c, old_k = merged[seen[key]]
                merged[seen[key]] = (old_c + coef, old_k)
            else:
                seen[key] = len(merged)
                merged.append((coef, key))
        return LinTerm([(c, k) for c, k in merged if c != 0.0], self.constant)


@dataclass(frozen=True)
class LinConstraint:
    label: str
    body: LinTerm  # canonical, constant already folded into rhs
    sense: str
    rhs: float


@dataclass(frozen=True)
class VarInfo:
    lb: float
    ub: float
    binary: bool = False


@dataclass(frozen=True)
class MilpParams:
    """Model-build controls.

    Big-M values are derived per row from variable bounds (tight), then
    capped; a cap too small to keep the row inactive raises ModelError
    instead of emitting an unsound constraint.
    """

    big_m_cap: float = 1.0e5
    gap_tolerance: float = 0.01
    time_limit_s: float = 900.0
    size_cap: int = 2000  # max steps * aircraft

    def __post_init__(self):
        if self.big_m_cap <= 0 or self.gap_tolerance <= 0 or self.time_limit_s <= 0:
            raise ModelError("MilpParams values must be positive")


class MilpModel:
    """Ordered variable registry + constraint list + minimized objective.

    Construction order defines variable ordinals and row order, so two
    builds from the same inputs serialize identically.
    """

    def __init__(self):
        self._vars: dict[VarKey, VarInfo] = {}
        self._ordinals: dict[VarKey, int] = {}
        self.constraints: list[LinConstraint] = []
        self._labels: set[str] = set()
        self.objective: LinTerm = LinTerm()

    # -- variables ---------------------------------------------------------
    def add_var(self, key: VarKey, lb: float, ub: float, binary: bool = False) -> VarKey:
        if key in self._vars:
            raise ModelError(f"duplicate variable {key.name}")
        if lb > ub:
            raise ModelError(f"empty bounds for {key.name}: [{lb}, {ub}]")
        self._ordinals[key] = len(self._vars)
        self._vars[key] = VarInfo(float(lb), float(ub), binary)
        return key

    def var_info(self, key: VarKey) -> VarInfo:
        return self._vars[key]

    def tighten_bounds(self, key: VarKey, lb: float, ub: float):
        """Intersect the stored bounds with [lb, ub]."""
        info = self._vars[key]
        nlb, nub = max(info.lb, lb), min(info.ub, ub)
        if nlb > nub:
            raise ModelError(f"empty bounds for {key.name}: [{nlb}, {nub}]")
        self._vars[key] = VarInfo(nlb, nub, info.binary)

    def ordinal(self, key: VarKey) -> int:
        return self._ordinals[key]

    @property
    def variables(self) -> dict[VarKey, VarInfo]:
        return self._vars

    @property
    def num_vars(self) -> int:
        return len(self._vars)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    @property
    def num_binaries(self) -> int:
        return sum(1 for info in self._vars.values() if info.binary)

    def keys_of_kind(self, kind: str) -> list[VarKey]:
        return [k for k in self._vars if k.kind == kind]

    # -- rows ---------------------------------------------------------------
    def add_constraint(self, label: str, body: LinTerm, sense: str, rhs: float):
        if sense not in _SENSES:
            raise ModelError(f"bad sense {sense!r}")
        if label in self._labels:
            raise ModelError(f"duplicate constraint label {label!r}")
        canon = body.canonicalized()
        for _, key in canon.terms:
            if key not in self._vars:
                raise ModelError(f"constraint {label!r} references unregistered {key.name}")
        folded = LinTerm(canon.terms, 0.0)
        self._labels.add(label)
        self.constraints.append(LinConstraint(label, folded, sense, float(rhs) - canon.constant))

    def add_objective_term(self, coef: float, key: VarKey):
        if key not in self._vars:
            raise ModelError(f"objective references unregistered {key.name}")
        self.objective.add(coef, key)

    def add_objective_constant(self, value: float):
        self.objective.constant += value

    def finalize_objective(self):
        self.objective = self.objective.canonicalized()

    # -- interval arithmetic over the bounds box -----------------------------
    def body_range(self, body: LinTerm) -> tuple[float, float]:
        lo = hi = body.constant
        for coef, key in body.canonicalized().terms:
            info = self._vars[key]
            a, b = coef * info.lb, coef * info.ub
            lo += min(a, b)
            hi += max(a, b)
        return lo, hi

    # -- evaluation ----------------------------------------------------------
    def evaluate_term(self, term: LinTerm, values: dict[VarKey, float]) -> float:
        return term.constant + sum(c * values[k] for c, k in term.terms)

    def evaluate(self, values: dict[VarKey, float], tol: float = 1e-6):
        """Objective value and rows violated by more than tol at a point."""
        violations = []
        for con in self.constraints:
            lhs = self.evaluate_term(con.body, values)
            err = 0.0
            if con.sense == LEQ:
                err = lhs - con.rhs
            elif con.sense == GEQ:
                err = con.rhs - lhs
            else:
                err = abs(lhs - con.rhs)
            if err > tol:
                violations.append((con.label, err))
        return self.evaluate_term(self.objective, values), violations

    # -- canonical serialization ---------------------------------------------
    def canonical_text(self) -> str:
        """Deterministic, platform-independent listing used for golden tests."""
        out = ["variables"]
        for key, info in self._vars.items():
            kind = "bin" if info.binary else "cont"
            out.append(f"  {key.name} {fmt(info.lb)} {fmt(info.ub)} {kind}")
        out.append("minimize")
        obj = self.objective.canonicalized()
        parts = [f"{fmt(c)}*{k.name}" for c, k in obj.terms]
        if obj.constant != 0.0:
            parts.append(fmt(obj.constant))
        out.append("  " + (" + ".join(parts) if parts else "0"))
        out.append("subject to")
        for con in self.constraints:
            terms = " + ".join(f"{fmt(c)}*{k.name}" for c, k in con.body.terms) or "0"
            out.append(f"  {con.label}: {terms} {con.sense} {fmt(con.rhs)}")
        out.append("end")
        return "\n".join(out) + "\n"


def tight_big_m(model: MilpModel, body: LinTerm, sense: str, rhs: float,
                params: MilpParams) -> float:
    """Smallest M (plus one, capped) that deactivates `body sense rhs`.

    For a >= row the relaxed form is  body + M*z >= rhs  (z = 1 relaxes);
    for <= it is  body - M*z <= rhs.  M strictly exceeds the worst-case
    slack over the variable bounds box.
    """
    lo, hi = model.body_range(body)
    if sense == GEQ:
        need = rhs - lo
    elif sense == LEQ:
        need = hi - rhs
    else:
        raise ModelError("big-M rows must be inequalities")
    m = max(1.0, need + 1.0)
    if not math.isfinite(m) or m > params.big_m_cap:
        raise ModelError(
            f"required big-M {m:.3g} exceeds cap {params.big_m_cap:.3g}; "
            "shrink the horizon or raise MilpParams.big_m_cap")
    return m
