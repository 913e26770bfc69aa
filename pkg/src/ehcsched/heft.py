"""Greedy list scheduler extended with duplication, reliability, deadline,
capability, memory, storage, and energy checks.

Priorities are computed once from upward ranks over the expanded graph;
tasks are then committed in rank order, never revisited.  For a duplicating
primary candidate, one candidate set per (primary, replica) combination is
evaluated; each surviving set is scored by a myopic weighted sum of its
normalized latency, energy, and reliability against the current partial
schedule, and the minimizer is committed if it meets the deadline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .model import BASIC_CAPABILITY, ObjectiveWeights
from .schedule import Infeasible, Schedule, TaskAssignment
from .transform import Etag, EtagNode, arc_device_energy
from .validator import finalize_schedule

RankTable = dict


def upward_rank(etag: Etag) -> dict[str, float]:
    """Longest execution-plus-transfer distance from each candidate node to
    an exit; computed in reverse topological task order."""
    ranks: dict[str, float] = {}
    for t in reversed(etag.workflow.topological_order()):
        for node in etag.nodes_of(t):
            tail = 0.0
            for arc in etag.arcs_out(node.key):
                tail = max(tail, arc.comm_latency + ranks[arc.dst])
            ranks[node.key] = node.exec_time + tail
    return ranks


@dataclass(frozen=True)
class LambdaSet:
    """One candidate decision for a task: a primary node and, when that
    primary duplicates, one replica node."""

    primary: EtagNode
    replica: Optional[EtagNode]

    @property
    def task(self) -> int:
        return self.primary.task

    def nodes(self) -> list[EtagNode]:
        return [self.primary] + ([self.replica] if self.replica else [])

    def sort_key(self):
        rep = self.replica.sort_key() if self.replica else ()
        return (self.task,) + self.primary.sort_key() + rep


def build_lambda(etag: Etag, ranks: dict[str, float]) -> list[LambdaSet]:
    """Candidate sets ordered by non-increasing primary rank, ties broken by
    task id then node keys for deterministic output."""
    out: list[LambdaSet] = []
    for t in etag.workflow.task_ids:
        for p in etag.primary[t]:
            if p.needs_duplication:
                out.extend(LambdaSet(p, r) for r in etag.replica[t])
            else:
                out.append(LambdaSet(p, None))
    out.sort(key=lambda s: (-ranks[s.primary.key],) + s.sort_key())
    return out


@dataclass
class PartialSchedule:
    """Committed state of the greedy pass; committed entries never change."""

    etag: Etag
    starts: dict[str, float] = field(default_factory=dict)  # node key -> start
    device_energy: dict[str, float] = field(default_factory=dict)
    selected_arc_keys: set = field(default_factory=set)

    def __post_init__(self):
        for d in self.etag.system.devices:
            self.device_energy.setdefault(d.id, 0.0)

    def committed_keys(self) -> set:
        return set(self.starts)

    def commit(self, node: EtagNode, start: float) -> None:
        self.starts[node.key] = start
        self.device_energy[node.device] += node.exec_energy
        for arc in self.etag.arcs_in(node.key):
            if arc.src in self.starts:
                self.selected_arc_keys.add((arc.src, arc.dst))
                for dev, amount in arc_device_energy(arc, self.etag.system).items():
                    self.device_energy[dev] += amount


def compute_eft(
    node: EtagNode,
    partial: PartialSchedule,
    etag: Etag,
    tentative: Optional[dict[str, float]] = None,
) -> tuple[float, float]:
    """Earliest start and finish of a candidate node against the committed
    schedule plus any tentative placements from the set under evaluation.

    The start honors parent transfers, then a forward scan over same-device
    occupations in non-decreasing finish order pushes it past same-core
    overlaps and past windows where the device's specialized-capability
    exclusivity or its memory or storage budget would be exceeded.
    """
    placed: dict[str, float] = dict(partial.starts)
    if tentative:
        placed.update(tentative)

    start = 0.0
    for arc in etag.arcs_in(node.key):
        if arc.src in partial.starts:
            src = etag.node(arc.src)
            start = max(start, partial.starts[arc.src] + src.exec_time + arc.comm_latency)

    same_device = [
        (key, placed[key], etag.node(key))
        for key in placed
        if etag.node(key).device == node.device
        and placed[key] + etag.node(key).exec_time > start
    ]
    same_device.sort(key=lambda rec: (rec[1] + rec[2].exec_time, rec[0]))

    task = etag.workflow.task(node.task)
    device = etag.system.device(node.device)
    cap = task.required_capability

    for key, s_other, other in same_device:
        end = start + node.exec_time
        blockers = [
            (k2, s2, n2)
            for k2, s2, n2 in same_device
            if n2.core != node.core and start < s2 + n2.exec_time and end > s2
        ]
        same_core_clash = (
            other.core == node.core
            and start < s_other + other.exec_time
            and end > s_other
        )
        cap_clash = False
        if cap != BASIC_CAPABILITY:
            users = 1  # the candidate itself
            for _, _, n2 in blockers:
                if etag.workflow.task(n2.task).required_capability == cap:
                    users += 1
            cap_clash = users > 1
        mem = task.memory + sum(etag.workflow.task(n2.task).memory for _, _, n2 in blockers)
        sto = task.storage + sum(etag.workflow.task(n2.task).storage for _, _, n2 in blockers)
        if (
            same_core_clash
            or cap_clash
            or mem > device.memory_budget
            or sto > device.storage_budget
        ):
            start = s_other + other.exec_time
    return start, start + node.exec_time


def _energy_precheck(
    node: EtagNode,
    partial: PartialSchedule,
    etag: Etag,
    tentative_nodes: list[EtagNode],
) -> bool:
    """True iff adding the node (plus its transfers from committed parents)
    keeps every device inside its energy budget."""
    totals = dict(partial.device_energy)
    for n in tentative_nodes:
        totals[n.device] += n.exec_energy
    totals[node.device] += node.exec_energy
    for arc in etag.arcs_in(node.key):
        if arc.src in partial.starts:
            for dev, amount in arc_device_energy(arc, etag.system).items():
                totals[dev] += amount
    return all(
        totals[d.id] <= d.energy_budget for d in etag.system.devices
    )


def run_heft(
    etag: Etag,
    weights: ObjectiveWeights,
    deadline: float,
    trace: Optional[list] = None,
):
    """Run the full greedy pass; returns a Schedule or an Infeasible marker
    naming the first task with no committable candidate set."""
    tg = etag.workflow
    ranks = upward_rank(etag)
    lam = build_lambda(etag, ranks)
    partial = PartialSchedule(etag)
    scheduled: set[int] = set()
    chosen: dict[tuple[int, int], tuple[str, float]] = {}  # (task, copy) -> (key, start)

    while len(scheduled) < len(tg.tasks):
        task_id = next(s.task for s in lam if s.task not in scheduled)
        task = tg.task(task_id)
        is_exit_task = not tg.children(task_id)

        surviving = []  # (set, L_v, E_v, R_v, placements)
        for cand in (s for s in lam if s.task == task_id):
            total_rel = etag.total_reliability_of(
                cand.primary.key, cand.replica.key if cand.replica else None
            )
            if (
                cand.replica is not None
                and is_exit_task
                and cand.primary.device != cand.replica.device
            ) or total_rel < task.reliability_threshold:
                continue

            skipped = False
            tentative: dict[str, float] = {}
            tentative_nodes: list[EtagNode] = []
            placements: list[tuple[EtagNode, float, float]] = []
            for node in cand.nodes():
                device = etag.system.device(node.device)
                if (
                    not _energy_precheck(node, partial, etag, tentative_nodes)
                    or task.memory > device.memory_budget
                    or task.storage > device.storage_budget
                ):
                    skipped = True
                    break
                start, eft = compute_eft(node, partial, etag, tentative)
                tentative[node.key] = start
                tentative_nodes.append(node)
                placements.append((node, start, eft))
            if skipped:
                continue

            latency = max(eft for _, _, eft in placements)
            energy = sum(n.exec_energy for n, _, _ in placements)
            for node, _, _ in placements:
                for arc in etag.arcs_in(node.key):
                    if arc.src in partial.starts:
                        energy += arc.comm_energy
            surviving.append((cand, latency, energy, total_rel, placements))

        if not surviving:
            return Infeasible(reason="no-candidate-set", blocking_task=task_id)

        lat_lo = min(s[1] for s in surviving)
        lat_hi = max(s[1] for s in surviving)
        en_lo = min(s[2] for s in surviving)
        en_hi = max(s[2] for s in surviving)
        rel_lo = min(s[3] for s in surviving)
        rel_hi = max(s[3] for s in surviving)

        def norm(v, lo, hi):
            return 0.0 if hi - lo <= 1e-15 else (v - lo) / (hi - lo)

        best = None
        best_g = None
        for entry in surviving:
            _, latency, energy, rel, _ = entry
            g_v = (
                weights.latency * norm(latency, lat_lo, lat_hi)
                + weights.energy * norm(energy, en_lo, en_hi)
                - weights.reliability * norm(rel, rel_lo, rel_hi)
            )
            if best_g is None or g_v < best_g:
                best, best_g = entry, g_v

        cand, latency, _, _, placements = best
        if latency > deadline:
            return Infeasible(reason="deadline", blocking_task=task_id)

        for node, start, _ in placements:
            partial.commit(node, start)
            chosen[(node.task, node.copy)] = (node.key, start)
        scheduled.add(task_id)
        if trace is not None:
            trace.append(
                {
                    "task": task_id,
                    "primary": cand.primary.key,
                    "replica": cand.replica.key if cand.replica else None,
                    "starts": {n.key: s for n, s, _ in placements},
                }
            )

    assignments = {}
    for t in tg.task_ids:
        primary_key, primary_start = chosen[(t, 1)]
        replica = chosen.get((t, 2))
        assignments[t] = TaskAssignment(
            primary=primary_key,
            replica=replica[0] if replica else None,
            start_primary=primary_start,
            start_replica=replica[1] if replica else None,
        )
    makespan = max(
        partial.starts[k] + etag.node(k).exec_time for k in partial.starts
    )
    schedule = Schedule(
        assignments=assignments,
        makespan=makespan,
        deadline=deadline,
        weights=weights,
        method="heft",
    )
    return finalize_schedule(schedule, etag)
