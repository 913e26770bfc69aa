"""Exhaustive exact scheduler for desk-size instances.

Correctness argument.  The goal decomposes into an allocation-determined
part (energy and log-reliability depend only on which candidate nodes are
selected) plus a weighted makespan term that is non-decreasing in every
start time.  For a fixed allocation, every feasible schedule induces a
dispatch order of its task copies (sorted by start time), and replaying
that order with each copy placed at its earliest feasible time never
increases any start, hence never increases the makespan and never breaks a
budget or window constraint that the original satisfied at those orders.
Some earliest-feasible replay of some dispatch order therefore attains the
minimum makespan of the allocation, so enumerating all allocations and all
dispatch orders (with pruning that only discards branches whose partial
makespan already meets or exceeds the incumbent) is exhaustive.  Objectives
never reward idling, so nothing better exists outside this family.

Symmetric (primary, replica) core pairs are deduplicated only when the two
placements are provably interchangeable: same device, identical execution
profile, identical failure rate.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Optional

from .model import BASIC_CAPABILITY, ModelError, ObjectiveWeights
from .objectives import objective_bounds, scalarize
from .schedule import Infeasible, Schedule, TaskAssignment
from .transform import Etag, EtagNode, arc_device_energy
from .validator import finalize_schedule


class LimitsExceededError(ModelError):
    def __init__(self, detail: str):
        super().__init__("limits-exceeded", detail)


@dataclass(frozen=True)
class OracleLimits:
    max_tasks: int = 5
    max_candidate_nodes: int = 24
    max_wall_time: float = 120.0

    def __post_init__(self):
        if self.max_tasks <= 0 or self.max_candidate_nodes <= 0 or self.max_wall_time <= 0:
            raise ValueError("oracle limits must be positive")


@dataclass
class AllocationProfile:
    """One allocation choice with its fixed objectives and best makespan."""

    selection: tuple  # ((task, primary key, replica key or None), ...)
    f_en: float
    f_rel: float
    min_makespan: Optional[float]  # None when no ordering fits any window
    starts: dict = field(default_factory=dict)  # node key -> start at best makespan


def _check_limits(etag: Etag, limits: OracleLimits) -> None:
    if len(etag.workflow.tasks) > limits.max_tasks:
        raise LimitsExceededError(
            f"{len(etag.workflow.tasks)} tasks exceed limit {limits.max_tasks}"
        )
    if etag.node_count > limits.max_candidate_nodes:
        raise LimitsExceededError(
            f"{etag.node_count} candidate nodes exceed limit {limits.max_candidate_nodes}"
        )


def _interchangeable(a: EtagNode, b: EtagNode) -> bool:
    return (
        a.device == b.device
        and a.exec_time == b.exec_time
        and a.exec_power == b.exec_power
        and a.reliability == b.reliability
    )


def _options_for_task(etag: Etag, task_id: int) -> list[tuple[str, Optional[str]]]:
    """Admissible (primary, replica) choices after reliability-threshold and
    exit co-location filtering and symmetric-pair deduplication."""
    tg = etag.workflow
    task = tg.task(task_id)
    exit_task = not tg.children(task_id)
    out: list[tuple[str, Optional[str]]] = []
    seen_sym: set = set()
    for p in etag.primary[task_id]:
        if not p.needs_duplication:
            out.append((p.key, None))
            continue
        for r in etag.replica[task_id]:
            if exit_task and r.device != p.device:
                continue
            if etag.total_reliability_of(p.key, r.key) < task.reliability_threshold:
                continue
            if _interchangeable(p, etag.node(f"{task_id}.1@{r.core}")) and p.core != r.core:
                sym = (task_id,) + tuple(sorted((p.core, r.core)))
                if sym in seen_sym:
                    continue
                seen_sym.add(sym)
            out.append((p.key, r.key))
    return out


def _selection_energy_ok(etag: Etag, keys: set) -> bool:
    totals = {d.id: 0.0 for d in etag.system.devices}
    for key in keys:
        node = etag.node(key)
        totals[node.device] += node.exec_energy
    for bundle in etag.arcs.values():
        for arc in bundle:
            if arc.src in keys and arc.dst in keys:
                for dev, amount in arc_device_energy(arc, etag.system).items():
                    totals[dev] += amount
    return all(totals[d.id] <= d.energy_budget for d in etag.system.devices)


def _fixed_objectives(etag: Etag, selection) -> tuple[float, float]:
    keys = set()
    f_rel = 0.0
    for task_id, pkey, rkey in selection:
        keys.add(pkey)
        if rkey:
            keys.add(rkey)
        f_rel += math.log(etag.total_reliability_of(pkey, rkey))
    f_en = sum(etag.node(k).exec_energy for k in keys)
    for bundle in etag.arcs.values():
        for arc in bundle:
            if arc.src in keys and arc.dst in keys:
                f_en += arc.comm_energy
    return f_en, f_rel


class _Simulator:
    """Earliest-feasible placement of copies under a fixed allocation."""

    def __init__(self, etag: Etag, selection):
        self.etag = etag
        tg = etag.workflow
        self.copies: list[str] = []  # node keys, one per selected copy
        for task_id, pkey, rkey in selection:
            self.copies.append(pkey)
            if rkey:
                self.copies.append(rkey)
        self.preds: dict[str, list[str]] = {}
        by_task: dict[int, list[str]] = {}
        for key in self.copies:
            by_task.setdefault(self.etag.node(key).task, []).append(key)
        arc_cl = {}
        for bundle in etag.arcs.values():
            for arc in bundle:
                arc_cl[(arc.src, arc.dst)] = arc.comm_latency
        self.arc_cl = arc_cl
        for key in self.copies:
            t = self.etag.node(key).task
            self.preds[key] = [
                pk for parent in tg.parents(t) for pk in by_task.get(parent, [])
            ]

    def earliest_feasible(self, key: str, placed: dict[str, float]) -> Optional[float]:
        etag = self.etag
        node = etag.node(key)
        tg = etag.workflow
        task = tg.task(node.task)
        device = etag.system.device(node.device)

        ready = 0.0
        for pk in self.preds[key]:
            src = etag.node(pk)
            ready = max(ready, placed[pk] + src.exec_time + self.arc_cl[(pk, key)])

        candidates = {ready}
        for other, start in placed.items():
            onode = etag.node(other)
            if onode.device != node.device:
                continue
            finish = start + onode.exec_time
            if finish > ready:
                candidates.add(finish)

        for s in sorted(candidates):
            end = s + node.exec_time
            core_clash = any(
                etag.node(other).core == node.core
                and placed[other] < end
                and placed[other] + etag.node(other).exec_time > s
                for other in placed
            )
            if core_clash:
                continue
            events = {s}
            running_here = []
            for other, start in placed.items():
                onode = etag.node(other)
                if onode.device != node.device:
                    continue
                if s < start < end:
                    events.add(start)
                running_here.append((other, start, onode))
            ok = True
            for e in sorted(events):
                running = [
                    (o, st, on)
                    for o, st, on in running_here
                    if st <= e < st + on.exec_time
                ]
                mem = task.memory + sum(tg.task(on.task).memory for _, _, on in running)
                sto = task.storage + sum(tg.task(on.task).storage for _, _, on in running)
                if mem > device.memory_budget or sto > device.storage_budget:
                    ok = False
                    break
                # mutual feasibility among already-placed copies is invariant,
                # so only conflicts involving the new copy need checking
                if task.required_capability != BASIC_CAPABILITY:
                    users = 1 + sum(
                        1
                        for _, _, on in running
                        if tg.task(on.task).required_capability == task.required_capability
                    )
                    if users > 1:
                        ok = False
                        break
            if ok:
                return s
        return None

    def min_makespan(self, deadline_hint: float, t_stop: float):
        """Branch over dispatch orders; earliest-feasible placement per step.

        Returns (best makespan, starts) or (None, {}) if no order admits a
        placement.  Branches whose partial makespan already reaches the
        incumbent are pruned; the makespan of an extension never decreases.
        """
        best: list = [math.inf, {}]

        def dfs(placed: dict[str, float], makespan: float):
            if time.monotonic() > t_stop:
                raise LimitsExceededError("wall-time budget exhausted")
            if makespan >= best[0]:
                return
            if len(placed) == len(self.copies):
                best[0] = makespan
                best[1] = dict(placed)
                return
            for key in self.copies:
                if key in placed:
                    continue
                if any(pk not in placed for pk in self.preds[key]):
                    continue
                s = self.earliest_feasible(key, placed)
                if s is None:
                    continue
                placed[key] = s
                finish = s + self.etag.node(key).exec_time
                dfs(placed, max(makespan, finish))
                del placed[key]

        dfs({}, 0.0)
        if best[0] is math.inf:
            return None, {}
        return best[0], best[1]


def allocation_profiles(
    etag: Etag, deadline: float, limits: Optional[OracleLimits] = None
) -> list[AllocationProfile]:
    """Evaluate every admissible allocation once: fixed objectives plus the
    minimum makespan over all dispatch orders (weight-independent)."""
    limits = limits or OracleLimits()
    _check_limits(etag, limits)
    t_stop = time.monotonic() + limits.max_wall_time

    per_task = []
    for t in etag.workflow.task_ids:
        options = _options_for_task(etag, t)
        if not options:
            return []
        per_task.append([(t, p, r) for p, r in options])

    profiles: list[AllocationProfile] = []
    for combo in itertools.product(*per_task):
        if time.monotonic() > t_stop:
            raise LimitsExceededError("wall-time budget exhausted")
        keys = set()
        for _, p, r in combo:
            keys.add(p)
            if r:
                keys.add(r)
        if not _selection_energy_ok(etag, keys):
            continue
        f_en, f_rel = _fixed_objectives(etag, combo)
        sim = _Simulator(etag, combo)
        makespan, starts = sim.min_makespan(deadline, t_stop)
        profiles.append(
            AllocationProfile(
                selection=combo,
                f_en=f_en,
                f_rel=f_rel,
                min_makespan=makespan,
                starts=starts,
            )
        )
    return profiles


def optimal_from_profiles(
    profiles: list[AllocationProfile],
    etag: Etag,
    weights: ObjectiveWeights,
    deadline: float,
):
    """Pick the goal-minimizing feasible profile for one weight triple."""
    bounds = objective_bounds(etag, deadline)
    best = None
    best_g = math.inf
    for prof in profiles:
        if prof.min_makespan is None or prof.min_makespan > deadline:
            continue
        g = scalarize(prof.min_makespan, prof.f_en, prof.f_rel, weights, bounds)
        if g < best_g - 1e-15:
            best, best_g = prof, g
    if best is None:
        return Infeasible(reason="no-feasible-allocation")

    assignments = {}
    for task_id, pkey, rkey in best.selection:
        assignments[task_id] = TaskAssignment(
            primary=pkey,
            replica=rkey,
            start_primary=best.starts[pkey],
            start_replica=best.starts[rkey] if rkey else None,
        )
    schedule = Schedule(
        assignments=assignments,
        makespan=best.min_makespan,
        deadline=deadline,
        weights=weights,
        method="oracle",
    )
    return finalize_schedule(schedule, etag)


def enumerate_optimal(
    etag: Etag,
    weights: ObjectiveWeights,
    deadline: float,
    limits: Optional[OracleLimits] = None,
):
    """Exact optimum by exhaustive enumeration; Schedule or Infeasible."""
    profiles = allocation_profiles(etag, deadline, limits)
    if not profiles:
        return Infeasible(reason="no-admissible-allocation")
    return optimal_from_profiles(profiles, etag, weights, deadline)
