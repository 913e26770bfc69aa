"""Deterministic LP text export and its inverse parser.

The exported file is a CPLEX-style LP subset: one ``Minimize`` section with
a single objective line (a constant term is allowed), ``Subject To`` with
one constraint per line, ``Bounds`` listing every continuous variable,
``Binaries`` listing every binary, and ``End``.  Model constants that the
LP grammar cannot carry (big-M values, tolerance, normalization bounds,
weights, deadline, warnings) are stored in ``\\meta`` comment lines so a
parsed model is structurally identical to the exported one.  Identical
models export to identical bytes.
"""

from __future__ import annotations

import re

from ..model import ObjectiveWeights
from ..objectives import ObjectiveBounds
from .model import BINARY, CONTINUOUS, INF, Constraint, MilpModel, Variable

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_SENSES = ("<=", ">=", "=")


class MalformedLpError(Exception):
    def __init__(self, line_no: int, detail: str):
        super().__init__(f"malformed-lp: line {line_no}: {detail}")
        self.code = "malformed-lp"
        self.line_no = line_no
        self.detail = detail


def _fmt(x: float) -> str:
    return repr(float(x))


def _expr(terms, constant=None) -> str:
    parts: list[str] = []
    for coef, var in terms:
        if not parts:
            parts.append(f"{_fmt(coef)} {var}")
        elif coef < 0:
            parts.append(f"- {_fmt(-coef)} {var}")
        else:
            parts.append(f"+ {_fmt(coef)} {var}")
    if constant is not None and (constant != 0.0 or not parts):
        if not parts:
            parts.append(_fmt(constant))
        elif constant < 0:
            parts.append(f"- {_fmt(-constant)}")
        else:
            parts.append(f"+ {_fmt(constant)}")
    return " ".join(parts) if parts else "0.0"


def export_lp(model: MilpModel) -> str:
    """Serialize a model to LP text; deterministic byte output."""
    for v in model.variables:
        if len(v.name) > 255 or not _NAME_RE.match(v.name):
            raise ValueError(f"unexportable variable name: {v.name!r}")
    lines = ["\\ ehcsched lp format 1"]
    lines.append(f"\\meta omega_time {_fmt(model.omega_time)}")
    lines.append(f"\\meta omega_rel {_fmt(model.omega_rel)}")
    lines.append(f"\\meta omega_tol {_fmt(model.omega_tol)}")
    for name, (lo, hi) in (
        ("latency", model.bounds.latency),
        ("energy", model.bounds.energy),
        ("reliability", model.bounds.reliability),
    ):
        lines.append(f"\\meta bounds_{name} {_fmt(lo)} {_fmt(hi)}")
    w = model.weights
    lines.append(
        f"\\meta weights {_fmt(w.latency)} {_fmt(w.energy)} {_fmt(w.reliability)}"
    )
    lines.append(f"\\meta deadline {_fmt(model.deadline)}")
    for warning in model.warnings:
        lines.append(f"\\meta warning {warning}")
    lines.append("Minimize")
    lines.append(" obj: " + _expr(model.objective, model.objective_constant))
    lines.append("Subject To")
    for c in model.constraints:
        lines.append(f" {c.name}: {_expr(c.terms)} {c.sense} {_fmt(c.rhs)}")
    lines.append("Bounds")
    for v in model.variables:
        if v.kind != CONTINUOUS:
            continue
        if v.ub == INF:
            lines.append(f" {v.name} >= {_fmt(v.lb)}")
        else:
            lines.append(f" {_fmt(v.lb)} <= {v.name} <= {_fmt(v.ub)}")
    lines.append("Binaries")
    for v in model.variables:
        if v.kind == BINARY:
            lines.append(f" {v.name}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def _parse_expr(tokens, line_no, allow_constant):
    terms: list[tuple[float, str]] = []
    constant = 0.0
    i = 0
    while i < len(tokens) and tokens[i] not in _SENSES:
        sign = 1.0
        if tokens[i] == "+":
            i += 1
        elif tokens[i] == "-":
            sign = -1.0
            i += 1
        if i >= len(tokens) or not _is_number(tokens[i]):
            raise MalformedLpError(line_no, f"expected coefficient near {tokens[i:]}")
        coef = sign * float(tokens[i])
        i += 1
        if i < len(tokens) and tokens[i] not in _SENSES and not _is_number(tokens[i]) and tokens[i] not in ("+", "-"):
            terms.append((coef, tokens[i]))
            i += 1
        else:
            if not allow_constant:
                raise MalformedLpError(line_no, "constant term outside objective")
            constant += coef
    return terms, constant, tokens[i:]


_KNOWN_SECTIONS = {"minimize", "subject to", "bounds", "binaries", "end"}
_FOREIGN_SECTIONS = {
    "maximize",
    "maximise",
    "minimise",
    "general",
    "generals",
    "integer",
    "integers",
    "semi-continuous",
    "sos",
    "ranges",
    "free",
}


def parse_lp(text: str) -> MilpModel:
    """Parse LP text produced by export_lp back into a model.

    Files using sections outside the documented subset are rejected with a
    malformed-lp error naming the section.
    """
    meta: dict = {"warnings": []}
    objective: tuple = ()
    obj_constant = 0.0
    constraints: list[Constraint] = []
    continuous: list[Variable] = []
    binaries: list[str] = []
    section = None
    saw_end = False

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            body = line[1:].strip()
            if body.startswith("meta "):
                parts = body.split()
                key = parts[1]
                vals = parts[2:]
                if key == "warning":
                    meta["warnings"].append(" ".join(vals))
                else:
                    meta[key] = [float(v) for v in vals]
            continue
        lowered = line.lower()
        if lowered in _KNOWN_SECTIONS:
            section = lowered
            if section == "end":
                saw_end = True
            continue
        if lowered.split(":")[0] in _FOREIGN_SECTIONS or lowered in _FOREIGN_SECTIONS:
            raise MalformedLpError(line_no, f"unsupported section {line!r}")
        if section is None:
            raise MalformedLpError(line_no, f"content before any section: {line!r}")
        if section == "minimize":
            if ":" not in line:
                raise MalformedLpError(line_no, "objective line missing label")
            _, expr = line.split(":", 1)
            terms, obj_constant, rest = _parse_expr(expr.split(), line_no, True)
            if rest:
                raise MalformedLpError(line_no, f"trailing tokens {rest}")
            objective = tuple(terms)
        elif section == "subject to":
            if ":" not in line:
                raise MalformedLpError(line_no, "constraint missing name")
            name, expr = line.split(":", 1)
            name = name.strip()
            terms, _, rest = _parse_expr(expr.split(), line_no, False)
            if len(rest) != 2 or rest[0] not in _SENSES or not _is_number(rest[1]):
                raise MalformedLpError(line_no, f"bad constraint tail {rest}")
            constraints.append(
                Constraint(name, tuple(terms), rest[0], float(rest[1]))
            )
        elif section == "bounds":
            toks = line.split()
            if len(toks) == 3 and toks[1] == ">=":
                continuous.append(Variable(toks[0], CONTINUOUS, float(toks[2]), INF))
            elif len(toks) == 5 and toks[1] == "<=" and toks[3] == "<=":
                continuous.append(
                    Variable(toks[2], CONTINUOUS, float(toks[0]), float(toks[4]))
                )
            else:
                raise MalformedLpError(line_no, f"bad bounds line {line!r}")
        elif section == "binaries":
            for tok in line.split():
                if not _NAME_RE.match(tok):
                    raise MalformedLpError(line_no, f"bad binary name {tok!r}")
                binaries.append(tok)
        elif section == "end":
            raise MalformedLpError(line_no, f"content after End: {line!r}")

    if not saw_end:
        raise MalformedLpError(len(text.splitlines()) or 1, "missing End section")
    required = ("omega_time", "omega_rel", "omega_tol", "bounds_latency",
                "bounds_energy", "bounds_reliability", "weights", "deadline")
    for key in required:
        if key not in meta:
            raise MalformedLpError(1, f"missing meta entry {key}")

    # reconstruct variables in export order: model order interleaves kinds,
    # so recover it from first appearance across the two kind sections
    variables = _reorder_variables(continuous, binaries, objective, constraints)
    bounds = ObjectiveBounds(
        latency=tuple(meta["bounds_latency"]),
        energy=tuple(meta["bounds_energy"]),
        reliability=tuple(meta["bounds_reliability"]),
    )
    weights = ObjectiveWeights(*meta["weights"])
    return MilpModel(
        variables=variables,
        constraints=constraints,
        objective=objective,
        objective_constant=obj_constant,
        omega_time=meta["omega_time"][0],
        omega_rel=meta["omega_rel"][0],
        omega_tol=meta["omega_tol"][0],
        bounds=bounds,
        weights=weights,
        deadline=meta["deadline"][0],
        warnings=tuple(meta["warnings"]),
    )


def _reorder_variables(continuous, binaries, objective, constraints):
    binary_vars = [Variable(name, BINARY, 0.0, 1.0) for name in binaries]
    return binary_vars + continuous


def structurally_equal(a: MilpModel, b: MilpModel) -> bool:
    """Equality over the LP-representable structure plus carried constants.

    Variable order is compared per kind (the LP sections fix order within a
    kind but not across kinds); constraints, objective, and meta constants
    must match exactly.
    """

    def by_kind(model):
        return (
            [v for v in model.variables if v.kind == BINARY],
            sorted(
                (v for v in model.variables if v.kind == CONTINUOUS),
                key=lambda v: v.name,
            ),
        )

    return (
        by_kind(a) == by_kind(b)
        and a.constraints == b.constraints
        and a.objective == b.objective
        and a.objective_constant == b.objective_constant
        and a.omega_time == b.omega_time
        and a.omega_rel == b.omega_rel
        and a.omega_tol == b.omega_tol
        and a.bounds == b.bounds
        and a.weights == b.weights
        and a.deadline == b.deadline
        and a.warnings == b.warnings
    )
