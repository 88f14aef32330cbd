"""Deterministic LP-format export and a reader for the same dialect.

The writer emits the CPLEX-style sections Minimize / Subject To / Bounds /
Binaries / End with one objective term or constraint per line, variables in
registration order and shortest-roundtrip float literals, so identical
models produce identical bytes.  The reader accepts exactly this dialect
(plus blank lines and ``\\`` comments) and rebuilds an equivalent model.
"""

from __future__ import annotations

import math
import re

from .milp import EQ, GEQ, LEQ, LinTerm, MilpModel, VarKey, fmt

__all__ = ["export_lp", "parse_lp", "LpFormatError"]


class LpFormatError(ValueError):
    pass


def _signed(x: float) -> str:
    return ("+" if x >= 0 else "-") + fmt(abs(x))


def export_lp(model: MilpModel, name: str = "formation_avoid") -> str:
    lines = [f"\\ {name}", "Minimize", " obj:"]
    obj = model.objective.canonicalized()
    for coef, key in obj.terms:
        lines.append(f"  {_signed(coef)} {key.name}")
    if obj.constant != 0.0:
        lines.append(f"  {_signed(obj.constant)}")

    lines.append("Subject To")
    for con in model.constraints:
        if not con.body.terms:
            raise LpFormatError(f"constraint {con.label!r} has no variables")
        parts = " ".join(f"{_signed(c)} {k.name}" for c, k in con.body.terms)
        lines.append(f" {con.label}: {parts} {con.sense} {fmt(con.rhs)}")

    lines.append("Bounds")
    for key, info in model.variables.items():
        lo, hi = info.lb, info.ub
        if lo == hi:
            lines.append(f" {key.name} = {fmt(lo)}")
        elif math.isinf(lo) and math.isinf(hi):
            lines.append(f" {key.name} free")
        elif math.isinf(lo):
            lines.append(f" {key.name} <= {fmt(hi)}")
        elif math.isinf(hi):
            lines.append(f" {key.name} >= {fmt(lo)}")
        else:
            lines.append(f" {fmt(lo)} <= {key.name} <= {fmt(hi)}")

    binaries = [key.name for key, info in model.variables.items() if info.binary]
    if binaries:
        lines.append("Binaries")
        for name_ in binaries:
            lines.append(f" {name_}")
    lines.append("End")
    return "\n".join(lines) + "\n"


_NUM = r"\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?"
_TERM_RE = re.compile(rf"\s*([-+])\s*({_NUM})(?:\s+([A-Za-z]\w*))?")


def _parse_varkey(name: str) -> VarKey:
    parts = name.split("_")
    try:
        return VarKey(parts[0], tuple(int(t) for t in parts[1:]))
    except ValueError:
        raise LpFormatError(f"variable name {name!r} does not follow the naming scheme") from None


def _parse_expr(text: str) -> LinTerm:
    """Parse '+2 x_1_1_1 -0.5 v_1_1_1 +7' (writer dialect: every term has an
    explicit sign and coefficient) into a LinTerm."""
    term = LinTerm()
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TERM_RE.match(text, pos)
        if not m:
            raise LpFormatError(f"cannot parse expression near {text[pos:pos + 30]!r}")
        sign, number, name = m.groups()
        value = float(number) * (1.0 if sign == "+" else -1.0)
        if name is None:
            term.constant += value
        else:
            term.add(value, _parse_varkey(name))
        pos = m.end()
    return term


def parse_lp(text: str) -> MilpModel:
    """Rebuild a model from the writer's dialect.

    Variables are registered in Bounds order, so a write/parse round trip
    reproduces the canonical serialization exactly.
    """
    section = None
    obj_lines: list[str] = []
    rows: list[tuple[str, str]] = []
    bounds: list[tuple[str, float, float]] = []
    binaries: list[str] = []

    for raw in text.splitlines():
        line = raw.split("\\")[0].strip()
        if not line:
            continue
        low = line.lower()
        if low in ("minimize", "maximize"):
            if low == "maximize":
                raise LpFormatError("only minimization models are supported")
            section = "obj"
            continue
        if low == "subject to":
            section = "rows"
            continue
        if low == "bounds":
            section = "bounds"
            continue
        if low in ("binaries", "binary"):
            section = "bin"
            continue
        if low == "end":
            section = None
            continue

        if section == "obj":
            if line.startswith("obj:"):
                line = line[4:].strip()
                if not line:
                    continue
            obj_lines.append(line)
        elif section == "rows":
            if ":" not in line:
                raise LpFormatError(f"constraint line without label: {line!r}")
            label, rest = line.split(":", 1)
            rows.append((label.strip(), rest.strip()))
        elif section == "bounds":
            bounds.append(_parse_bound(line))
        elif section == "bin":
            binaries.append(line.strip())
        elif section is None:
            raise LpFormatError(f"unexpected line outside any section: {line!r}")

    model = MilpModel()
    binset = set(binaries)
    for name, lo, hi in bounds:
        model.add_var(_parse_varkey(name), lo, hi, binary=name in binset)

    for label, rest in rows:
        pieces = rest.rsplit(maxsplit=2)
        if len(pieces) != 3 or pieces[1] not in (LEQ, GEQ, EQ):
            raise LpFormatError(f"no sense in constraint {label!r}")
        body_text, sense, rhs_text = pieces
        model.add_constraint(label, _parse_expr(body_text), sense, float(rhs_text))

    objective = _parse_expr(" ".join(obj_lines)) if obj_lines else LinTerm()
    for coef, key in objective.terms:
        model.add_objective_term(coef, key)
    model.add_objective_constant(objective.constant)
    model.finalize_objective()
    return model


def _parse_bound(line: str) -> tuple[str, float, float]:
    inf = float("inf")
    tokens = line.split()
    if len(tokens) == 2 and tokens[1].lower() == "free":
        return tokens[0], -inf, inf
    if len(tokens) == 3 and tokens[1] == "=":
        v = float(tokens[2])
        return tokens[0], v, v
    if len(tokens) == 3 and tokens[1] == LEQ:
        return tokens[0], -inf, float(tokens[2])
    if len(tokens) == 3 and tokens[1] == GEQ:
        return tokens[0], float(tokens[2]), inf
    if len(tokens) == 5 and tokens[1] == LEQ and tokens[3] == LEQ:
        return tokens[2], float(tokens[0]), float(tokens[4])
    raise LpFormatError(f"unrecognized bound line: {line!r}")
