"""Independent schedule checker: verifies every constraint family by direct
arithmetic on the schedule and recomputes the objective triple.

This module deliberately shares no machinery with the optimizer beyond the
data model and the transformed graph; it is the referee for all scheduling
methods.  Interval overlap uses half-open [start, start + duration)
semantics, so contact at a boundary is not a conflict.  All comparisons use
an absolute tolerance of 1e-6 in canonical units; reported slack is signed
(negative means violated by that amount).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import BASIC_CAPABILITY, SystemModel
from .objectives import objective_bounds, scalarize
from .schedule import Schedule, selected_arcs
from .transform import Etag, arc_device_energy

TOL = 1e-6


@dataclass(frozen=True)
class ConstraintViolation:
    family: str  # 'a'..'l', matching the optimizer's constraint families
    entities: tuple[str, ...]
    measured: float
    bound: float
    slack: float  # bound - measured for <=; measured - bound for >=

    def __str__(self):
        who = ", ".join(self.entities)
        return f"[{self.family}] {who}: measured={self.measured:.9g} bound={self.bound:.9g}"


@dataclass
class ObjectiveValues:
    f_lat: float
    f_en: float
    f_rel: float  # log-reliability
    reliability: float  # exp(f_rel)
    goal: float


def _runs_at(start: float, duration: float, instant: float) -> bool:
    return start - TOL <= instant < start + duration - TOL


def check_schedule(
    schedule: Schedule, etag: Etag, system: SystemModel, deadline: float
) -> list[ConstraintViolation]:
    """Evaluate every constraint family on a structurally complete schedule."""
    out: list[ConstraintViolation] = []
    tg = etag.workflow

    # (a) exactly one primary per task, known nodes, right copy indices
    placed: list[tuple[str, float]] = []  # (node key, start)
    for t in tg.task_ids:
        a = schedule.assignments.get(t)
        if a is None:
            out.append(ConstraintViolation("a", (f"task {t}",), 0.0, 1.0, -1.0))
            continue
        pnode = etag.node(a.primary)
        if pnode.task != t or pnode.copy != 1:
            out.append(ConstraintViolation("a", (a.primary,), 0.0, 1.0, -1.0))
            continue
        placed.append((a.primary, a.start_primary))

        # (c) replica present iff the chosen primary duplicates
        if pnode.needs_duplication != (a.replica is not None):
            out.append(
                ConstraintViolation(
                    "c",
                    (a.primary, a.replica or "-"),
                    float(a.replica is not None),
                    float(pnode.needs_duplication),
                    -1.0,
                )
            )
        if a.replica is not None:
            rnode = etag.node(a.replica)
            if rnode.task != t or rnode.copy != 2:
                out.append(ConstraintViolation("c", (a.replica,), 0.0, 1.0, -1.0))
                continue
            placed.append((a.replica, a.start_replica))

            # (d) duplicated exit task: both copies on one device
            if not tg.children(t) and rnode.device != pnode.device:
                out.append(
                    ConstraintViolation(
                        "d", (a.primary, a.replica), 0.0, 0.0, -1.0
                    )
                )
            # (e) pair reliability meets the task threshold
            total = etag.total_reliability_of(a.primary, a.replica)
            thr = tg.task(t).reliability_threshold
            if total < thr - TOL:
                out.append(
                    ConstraintViolation(
                        "e", (a.primary, a.replica), total, thr, total - thr
                    )
                )
        else:
            total = etag.total_reliability_table.get((a.primary, None))
            thr = tg.task(t).reliability_threshold
            if total is not None and total < thr - TOL:
                out.append(
                    ConstraintViolation("e", (a.primary,), total, thr, total - thr)
                )

    chosen = {key: start for key, start in placed}

    # (f) precedence with transfer delays, over all selected copy pairs
    for arc in selected_arcs(schedule, etag):
        src = etag.node(arc.src)
        t_src = chosen[arc.src]
        t_dst = chosen[arc.dst]
        lhs = t_src + src.exec_time + arc.comm_latency
        if lhs > t_dst + TOL:
            out.append(
                ConstraintViolation("f", (arc.src, arc.dst), lhs, t_dst, t_dst - lhs)
            )

    # (g) makespan consistency and deadline
    finishes = [chosen[k] + etag.node(k).exec_time for k in chosen]
    max_finish = max(finishes) if finishes else 0.0
    if abs(schedule.makespan - max_finish) > TOL:
        out.append(
            ConstraintViolation(
                "g",
                ("makespan",),
                schedule.makespan,
                max_finish,
                -abs(schedule.makespan - max_finish),
            )
        )
    if max_finish > deadline + TOL:
        out.append(
            ConstraintViolation(
                "g", ("deadline",), max_finish, deadline, deadline - max_finish
            )
        )
    for key, start in chosen.items():
        if start < -TOL:
            out.append(ConstraintViolation("g", (key,), start, 0.0, start))

    # (h) same-core copies may not overlap
    by_core: dict[str, list[str]] = {}
    for key in chosen:
        by_core.setdefault(etag.node(key).core, []).append(key)
    for core, keys in sorted(by_core.items()):
        keys.sort()
        for x in range(len(keys)):
            for y in range(x + 1, len(keys)):
                k1, k2 = keys[x], keys[y]
                s1, d1 = chosen[k1], etag.node(k1).exec_time
                s2, d2 = chosen[k2], etag.node(k2).exec_time
                overlap = min(s1 + d1, s2 + d2) - max(s1, s2)
                if overlap > TOL:
                    out.append(
                        ConstraintViolation("h", (core, k1, k2), overlap, 0.0, -overlap)
                    )

    # events: the start instants of all selected copies
    events = sorted(set(chosen.values()))
    by_device: dict[str, list[str]] = {}
    for key in chosen:
        by_device.setdefault(etag.node(key).device, []).append(key)

    for dev_id in sorted(by_device):
        device = system.device(dev_id)
        keys = sorted(by_device[dev_id])
        for s in events:
            running = [
                k for k in keys if _runs_at(chosen[k], etag.node(k).exec_time, s)
            ]
            if not running:
                continue
            # (j) one concurrent user per specialized capability
            cap_counts: dict[int, int] = {}
            for k in running:
                cap = tg.task(etag.node(k).task).required_capability
                if cap != BASIC_CAPABILITY:
                    cap_counts[cap] = cap_counts.get(cap, 0) + 1
            for cap, count in sorted(cap_counts.items()):
                if count > 1:
                    out.append(
                        ConstraintViolation(
                            "j",
                            (dev_id, f"capability {cap}", f"t={s:.6g}"),
                            float(count),
                            1.0,
                            1.0 - count,
                        )
                    )
            # (k) memory and storage budgets at each event
            mem = sum(tg.task(etag.node(k).task).memory for k in running)
            sto = sum(tg.task(etag.node(k).task).storage for k in running)
            if mem > device.memory_budget + TOL:
                out.append(
                    ConstraintViolation(
                        "k",
                        (dev_id, "memory", f"t={s:.6g}"),
                        mem,
                        device.memory_budget,
                        device.memory_budget - mem,
                    )
                )
            if sto > device.storage_budget + TOL:
                out.append(
                    ConstraintViolation(
                        "k",
                        (dev_id, "storage", f"t={s:.6g}"),
                        sto,
                        device.storage_budget,
                        device.storage_budget - sto,
                    )
                )

    # (l) per-device energy: compute + transmit + receive + relay
    energy = device_energy(schedule, etag, system)
    for dev_id in sorted(energy):
        budget = system.device(dev_id).energy_budget
        if energy[dev_id] > budget + TOL:
            out.append(
                ConstraintViolation(
                    "l", (dev_id,), energy[dev_id], budget, budget - energy[dev_id]
                )
            )
    return out


def device_energy(schedule: Schedule, etag: Etag, system: SystemModel) -> dict[str, float]:
    totals = {d.id: 0.0 for d in system.devices}
    for key in schedule.selected_node_keys():
        node = etag.node(key)
        totals[node.device] += node.exec_energy
    for arc in selected_arcs(schedule, etag):
        for dev, amount in arc_device_energy(arc, system).items():
            totals[dev] += amount
    return totals


def objectives(schedule: Schedule, etag: Etag) -> ObjectiveValues:
    """Recompute the objective triple and the scalarized goal from scratch.

    Latency is the makespan; energy sums execution energies of all selected
    copies plus transfer energies of all realized arcs; log-reliability sums
    one term per task (a pair term when duplicated, a single-copy term
    otherwise).
    """
    f_lat = schedule.makespan
    f_en = 0.0
    for key in schedule.selected_node_keys():
        f_en += etag.node(key).exec_energy
    for arc in selected_arcs(schedule, etag):
        f_en += arc.comm_energy
    f_rel = 0.0
    for t in sorted(schedule.assignments):
        a = schedule.assignments[t]
        f_rel += math.log(etag.total_reliability_of(a.primary, a.replica))
    bounds = objective_bounds(etag, schedule.deadline)
    goal = scalarize(f_lat, f_en, f_rel, schedule.weights, bounds)
    return ObjectiveValues(
        f_lat=f_lat,
        f_en=f_en,
        f_rel=f_rel,
        reliability=math.exp(f_rel),
        goal=goal,
    )


def finalize_schedule(schedule: Schedule, etag: Etag) -> Schedule:
    """Fill the objective fields of a schedule in place and return it."""
    vals = objectives(schedule, etag)
    schedule.f_lat = vals.f_lat
    schedule.f_en = vals.f_en
    schedule.f_rel = vals.f_rel
    schedule.reliability = vals.reliability
    schedule.goal = vals.goal
    schedule.replica_count = sum(
        1 for a in schedule.assignments.values() if a.replica is not None
    )
    return schedule
