"""Continuous-time mixed-integer model of the scheduling problem.

Every constraint row is tagged with a family letter for auditability:

  a  one primary candidate node per task
  b  arc selection linked to its endpoint selections
  c  replica count tied to the duplication flag of the chosen primary
  d  duplicated exit tasks keep both copies on one device
  e  pair reliability threshold (big-M form) plus pair-variable linking
  f  precedence with transfer delays
  g  completion time and deadline
  h  same-core non-overlap disjunctions with ordering binaries
  i  execution indicators at start-time events (five inequality forms)
  j  per-event specialized-capability exclusivity
  k  per-event memory and storage budgets
  l  per-device energy budgets

Binary domains and non-negativity (family m in the formulation) are carried
by the variable declarations rather than explicit rows.  Cumulative
constraints are enforced only at task start events; no time discretization
is used anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from ..model import BASIC_CAPABILITY, ObjectiveWeights
from ..objectives import ObjectiveBounds, objective_bounds as _shared_bounds
from ..transform import Etag, arc_device_energy, parse_node_key

__all__ = ["Variable", "Constraint", "MilpModel", "build_model", "objective_bounds"]

BINARY = "B"
CONTINUOUS = "C"
INF = float("inf")


def objective_bounds(etag: Etag, deadline: float) -> ObjectiveBounds:
    """Normalization intervals for the three objectives (shared instance-wide)."""
    return _shared_bounds(etag, deadline)


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # BINARY or CONTINUOUS
    lb: float = 0.0
    ub: float = INF


@dataclass(frozen=True)
class Constraint:
    name: str  # family letter + running index, e.g. "b17"
    terms: tuple[tuple[float, str], ...]
    sense: str  # "<=", ">=", "="
    rhs: float

    @property
    def family(self) -> str:
        return self.name[0]


@dataclass
class MilpModel:
    variables: list[Variable]
    constraints: list[Constraint]
    objective: tuple[tuple[float, str], ...]
    objective_constant: float
    omega_time: float
    omega_rel: float
    omega_tol: float
    bounds: ObjectiveBounds
    weights: ObjectiveWeights
    deadline: float
    warnings: tuple[str, ...] = ()
    # decode tables; derived, excluded from structural equality
    var_meta: dict = field(default_factory=dict, compare=False)

    def variable_names(self) -> list[str]:
        return [v.name for v in self.variables]

    def family_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for c in self.constraints:
            out[c.family] = out.get(c.family, 0) + 1
        return out

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)


# variable naming -----------------------------------------------------------


def _mangle_core(core: str) -> str:
    return core.replace(".", "_")


def _mangle_node(key: str) -> str:
    task, copy, core = parse_node_key(key)
    return f"{task}_{copy}_at_{_mangle_core(core)}"


def node_var(key: str) -> str:
    return "xn_" + _mangle_node(key)


def arc_var(src: str, dst: str) -> str:
    return f"xa_{_mangle_node(src)}__{_mangle_node(dst)}"


def pair_var(primary: str, replica: str) -> str:
    task, _, pcore = parse_node_key(primary)
    _, _, rcore = parse_node_key(replica)
    return f"xp_{task}_{_mangle_core(pcore)}__{_mangle_core(rcore)}"


def order_var(i: int, n: int, j: int, o: int) -> str:
    return f"xo_{i}_{n}__{j}_{o}"


def exec_var(event: int, key: str) -> str:
    return f"xe_{event}__{_mangle_node(key)}"


def exec_hat_var(event: int, key: str) -> str:
    return f"xf_{event}__{_mangle_node(key)}"


def start_var(task: int, copy: int) -> str:
    return f"t_{task}_{copy}"


MAKESPAN_VAR = "T"


def unmangle_node(mangled: str) -> str:
    head, core = mangled.split("_at_")
    task, copy = head.split("_")
    dev, q = core.rsplit("_", 1)
    return f"{task}.{copy}@{dev}.{q}"


# model construction --------------------------------------------------------


def _merge_terms(terms) -> tuple[tuple[float, str], ...]:
    acc: dict[str, float] = {}
    order: list[str] = []
    for coef, var in terms:
        if var not in acc:
            acc[var] = 0.0
            order.append(var)
        acc[var] += coef
    return tuple((acc[v], v) for v in order if acc[v] != 0.0)


def build_model(etag: Etag, weights: ObjectiveWeights, deadline: float) -> MilpModel:
    """Assemble all decision variables and constraint families a-l.

    The objective is the weighted sum of min-max normalized latency and
    energy minus normalized log-reliability; a degenerate normalization
    interval drops that term and is recorded as a warning.
    """
    if deadline <= 0:
        raise ValueError("deadline must be positive")
    tg = etag.workflow
    nodes = etag.all_nodes()
    arcs = etag.all_arcs()
    copy_sets = etag.copy_sets()

    max_L = max(n.exec_time for n in nodes)
    max_CL = max((a.comm_latency for a in arcs), default=0.0)
    durations = [n.exec_time for n in nodes] + [
        a.comm_latency for a in arcs if a.comm_latency > 0
    ]
    omega_time = deadline + max_L + max_CL + 1.0
    omega_rel = 2.0
    omega_tol = 1e-4 * min(durations)

    bounds = objective_bounds(etag, deadline)
    warnings = tuple(
        f"degenerate-normalization:{name}" for name in bounds.degenerate()
    )
    degenerate = set(bounds.degenerate())

    variables: list[Variable] = []
    var_meta: dict = {}

    def add_var(name, kind, lb=0.0, ub=INF, meta=None):
        variables.append(Variable(name, kind, lb, ub))
        if meta is not None:
            var_meta[name] = meta

    # candidate node and arc binaries
    for n in nodes:
        add_var(node_var(n.key), BINARY, 0.0, 1.0, ("node", n.key))
    for a in arcs:
        add_var(arc_var(a.src, a.dst), BINARY, 0.0, 1.0, ("arc", (a.src, a.dst)))

    # start times and completion time; the deadline bound is implied by the
    # completion-time rows and tightens the relaxation
    for task, copy in copy_sets:
        add_var(start_var(task, copy), CONTINUOUS, 0.0, deadline, ("start", (task, copy)))
    add_var(MAKESPAN_VAR, CONTINUOUS, 0.0, deadline, ("makespan",))

    # primary/replica pair auxiliaries, for duplicating primaries only
    pairs: list[tuple] = []  # (primary node, replica node)
    for t in tg.task_ids:
        for p in etag.primary[t]:
            if not p.needs_duplication:
                continue
            for r in etag.replica[t]:
                pairs.append((p, r))
                add_var(pair_var(p.key, r.key), BINARY, 0.0, 1.0, ("pair", (p.key, r.key)))

    # ordering binaries for copy pairs that share at least one core and are
    # not transitively ordered by precedence (such pairs can never overlap)
    desc = tg.descendants()
    cores_of_copy: dict[tuple[int, int], set[str]] = {}
    for t in tg.task_ids:
        cores_of_copy[(t, 1)] = {n.core for n in etag.primary[t]}
        if etag.replica[t]:
            cores_of_copy[(t, 2)] = {n.core for n in etag.replica[t]}
    order_pairs: list[tuple[tuple[int, int], tuple[int, int], list[str]]] = []
    for x in range(len(copy_sets)):
        for y in range(x + 1, len(copy_sets)):
            (i, n), (j, o) = copy_sets[x], copy_sets[y]
            if i != j and (j in desc[i] or i in desc[j]):
                continue
            shared = sorted(cores_of_copy[(i, n)] & cores_of_copy[(j, o)])
            if not shared:
                continue
            order_pairs.append(((i, n), (j, o), shared))
            add_var(order_var(i, n, j, o), BINARY, 0.0, 1.0, ("order", (i, n, j, o)))

    # execution indicators per (event, node)
    events = list(range(len(copy_sets)))
    for h in events:
        for n in nodes:
            add_var(exec_var(h, n.key), BINARY, 0.0, 1.0, ("exec", (h, n.key)))
            add_var(exec_hat_var(h, n.key), BINARY, 0.0, 1.0, ("exec_hat", (h, n.key)))

    constraints: list[Constraint] = []
    counters: dict[str, int] = {}

    def add_con(family, terms, sense, rhs):
        counters[family] = counters.get(family, 0) + 1
        constraints.append(
            Constraint(f"{family}{counters[family]}", _merge_terms(terms), sense, rhs)
        )

    # (a) one primary per task
    for t in tg.task_ids:
        add_con("a", [(1.0, node_var(p.key)) for p in etag.primary[t]], "=", 1.0)

    # (b) arc linking triple
    for a in arcs:
        xa, xs, xd = arc_var(a.src, a.dst), node_var(a.src), node_var(a.dst)
        add_con("b", [(1.0, xa), (-1.0, xs)], "<=", 0.0)
        add_con("b", [(1.0, xa), (-1.0, xd)], "<=", 0.0)
        add_con("b", [(-1.0, xa), (1.0, xs), (1.0, xd)], "<=", 1.0)

    # (c) replica count matches the duplication flag of the selected primary
    for t in tg.task_ids:
        if not etag.replica[t]:
            continue
        terms = [
            (1.0, node_var(p.key)) for p in etag.primary[t] if p.needs_duplication
        ]
        terms += [(-1.0, node_var(r.key)) for r in etag.replica[t]]
        add_con("c", terms, "=", 0.0)

    # (d) duplicated exit task: replica on the primary's device
    for t in tg.task_ids:
        if tg.children(t):
            continue
        for p in etag.primary[t]:
            if not p.needs_duplication:
                continue
            terms = [(1.0, node_var(p.key))]
            terms += [
                (-1.0, node_var(r.key))
                for r in etag.replica[t]
                if r.device == p.device
            ]
            add_con("d", terms, "<=", 0.0)

    # (e) pair threshold in big-M form plus the pair linking triple
    for p, r in pairs:
        xp = pair_var(p.key, r.key)
        pair_rel = etag.total_reliability_of(p.key, r.key)
        thr = tg.task(p.task).reliability_threshold
        add_con("e", [(pair_rel - omega_rel, xp)], ">=", thr - omega_rel)
        add_con("e", [(1.0, xp), (-1.0, node_var(p.key))], "<=", 0.0)
        add_con("e", [(1.0, xp), (-1.0, node_var(r.key))], "<=", 0.0)
        add_con(
            "e",
            [(-1.0, xp), (1.0, node_var(p.key)), (1.0, node_var(r.key))],
            "<=",
            1.0,
        )

    # (f) precedence for every candidate arc
    for a in arcs:
        si, ni, _ = parse_node_key(a.src)
        sj, nj, _ = parse_node_key(a.dst)
        src_node = etag.node(a.src)
        add_con(
            "f",
            [
                (1.0, start_var(si, ni)),
                (src_node.exec_time, node_var(a.src)),
                (a.comm_latency, arc_var(a.src, a.dst)),
                (-1.0, start_var(sj, nj)),
            ],
            "<=",
            0.0,
        )

    # (g) completion time dominates every finish; deadline caps it
    for n in nodes:
        add_con(
            "g",
            [
                (1.0, start_var(n.task, n.copy)),
                (n.exec_time, node_var(n.key)),
                (-1.0, MAKESPAN_VAR),
            ],
            "<=",
            0.0,
        )
    add_con("g", [(1.0, MAKESPAN_VAR)], "<=", deadline)

    # (h) non-overlap disjunction per shared core
    node_on = {
        (t, c, core): nd
        for t in tg.task_ids
        for c in etag.copies(t)
        for core, nd in [
            (n.core, n)
            for n in (etag.primary[t] if c == 1 else etag.replica[t])
        ]
    }
    for (i, n), (j, o), shared in order_pairs:
        xo = order_var(i, n, j, o)
        for core in shared:
            ni_node = node_on[(i, n, core)]
            nj_node = node_on[(j, o, core)]
            xi, xj = node_var(ni_node.key), node_var(nj_node.key)
            add_con(
                "h",
                [
                    (1.0, start_var(i, n)),
                    (ni_node.exec_time, xi),
                    (-1.0, start_var(j, o)),
                    (omega_time, xi),
                    (omega_time, xj),
                    (omega_time, xo),
                ],
                "<=",
                3.0 * omega_time,
            )
            add_con(
                "h",
                [
                    (1.0, start_var(j, o)),
                    (nj_node.exec_time, xj),
                    (-1.0, start_var(i, n)),
                    (omega_time, xi),
                    (omega_time, xj),
                    (-omega_time, xo),
                ],
                "<=",
                2.0 * omega_time,
            )

    # (i) execution indicators: five inequality forms per (event, node)
    for h, (jt, jo) in enumerate(copy_sets):
        th = start_var(jt, jo)
        for nd in nodes:
            xn = node_var(nd.key)
            xe = exec_var(h, nd.key)
            xf = exec_hat_var(h, nd.key)
            tn = start_var(nd.task, nd.copy)
            add_con("i", [(1.0, xe), (-1.0, xn)], "<=", 0.0)
            add_con(
                "i",
                [(1.0, tn), (-1.0, th), (omega_time, xn), (omega_time, xe)],
                "<=",
                2.0 * omega_time,
            )
            add_con(
                "i",
                [
                    (1.0, th),
                    (-1.0, tn),
                    (-nd.exec_time, xn),
                    (omega_time, xn),
                    (omega_time, xe),
                ],
                "<=",
                2.0 * omega_time - omega_tol,
            )
            add_con(
                "i",
                [
                    (1.0, th),
                    (-1.0, tn),
                    (omega_time, xn),
                    (-omega_time, xe),
                    (omega_time, xf),
                ],
                "<=",
                2.0 * omega_time - omega_tol,
            )
            add_con(
                "i",
                [
                    (1.0, tn),
                    (nd.exec_time, xn),
                    (-1.0, th),
                    (omega_time, xn),
                    (-omega_time, xe),
                    (-omega_time, xf),
                ],
                "<=",
                omega_time,
            )

    # (j) per-event specialized-capability exclusivity per device
    nodes_by_device: dict[str, list] = {}
    for n in nodes:
        nodes_by_device.setdefault(n.device, []).append(n)
    for h in events:
        for dev in sorted(nodes_by_device):
            by_cap: dict[int, list] = {}
            for n in nodes_by_device[dev]:
                cap = tg.task(n.task).required_capability
                if cap != BASIC_CAPABILITY:
                    by_cap.setdefault(cap, []).append(n)
            for cap in sorted(by_cap):
                add_con(
                    "j",
                    [(1.0, exec_var(h, n.key)) for n in by_cap[cap]],
                    "<=",
                    1.0,
                )

    # (k) per-event memory and storage budgets per device
    for h in events:
        for dev in sorted(nodes_by_device):
            device = etag.system.device(dev)
            add_con(
                "k",
                [
                    (tg.task(n.task).memory, exec_var(h, n.key))
                    for n in nodes_by_device[dev]
                ],
                "<=",
                device.memory_budget,
            )
            add_con(
                "k",
                [
                    (tg.task(n.task).storage, exec_var(h, n.key))
                    for n in nodes_by_device[dev]
                ],
                "<=",
                device.storage_budget,
            )

    # (l) per-device energy: compute + transmit + receive + relay
    energy_terms: dict[str, list] = {d.id: [] for d in etag.system.devices}
    for n in nodes:
        energy_terms[n.device].append((n.exec_energy, node_var(n.key)))
    for a in arcs:
        xa = arc_var(a.src, a.dst)
        for dev, amount in arc_device_energy(a, etag.system).items():
            energy_terms[dev].append((amount, xa))
    for dev in sorted(energy_terms):
        if not energy_terms[dev]:
            continue
        add_con("l", energy_terms[dev], "<=", etag.system.device(dev).energy_budget)

    # objective: weighted sum of normalized terms
    obj_terms: list[tuple[float, str]] = []
    constant = 0.0
    if weights.latency > 0 and "latency" not in degenerate:
        lo, hi = bounds.latency
        scale = weights.latency / (hi - lo)
        obj_terms.append((scale, MAKESPAN_VAR))
        constant -= scale * lo
    if weights.energy > 0 and "energy" not in degenerate:
        lo, hi = bounds.energy
        scale = weights.energy / (hi - lo)
        for n in nodes:
            obj_terms.append((scale * n.exec_energy, node_var(n.key)))
        for a in arcs:
            if a.comm_energy:
                obj_terms.append((scale * a.comm_energy, arc_var(a.src, a.dst)))
        constant -= scale * lo
    if weights.reliability > 0 and "reliability" not in degenerate:
        lo, hi = bounds.reliability
        scale = weights.reliability / (hi - lo)
        for p, r in pairs:
            term = math.log(etag.total_reliability_of(p.key, r.key))
            obj_terms.append((-scale * term, pair_var(p.key, r.key)))
        for t in tg.task_ids:
            for p in etag.primary[t]:
                if not p.needs_duplication:
                    obj_terms.append(
                        (-scale * math.log(p.reliability), node_var(p.key))
                    )
        constant += scale * lo

    return MilpModel(
        variables=variables,
        constraints=constraints,
        objective=_merge_terms(obj_terms),
        objective_constant=constant,
        omega_time=omega_time,
        omega_rel=omega_rel,
        omega_tol=omega_tol,
        bounds=bounds,
        weights=weights,
        deadline=deadline,
        warnings=warnings,
        var_meta=var_meta,
    )
