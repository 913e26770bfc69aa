"""Schedule container shared by every scheduling method, plus its JSON form.

All three schedulers emit this structure, so downstream validation and
reporting treat them interchangeably.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .model import ObjectiveWeights
from .transform import Etag, EtagArc


@dataclass
class TaskAssignment:
    primary: str  # candidate node key
    replica: Optional[str]
    start_primary: float
    start_replica: Optional[float]


@dataclass
class Schedule:
    assignments: dict[int, TaskAssignment]
    makespan: float
    deadline: float
    weights: ObjectiveWeights
    method: str = ""
    f_lat: float = 0.0
    f_en: float = 0.0
    f_rel: float = 0.0  # log-reliability sum
    reliability: float = 1.0  # exp(f_rel)
    goal: float = 0.0
    replica_count: int = 0

    def selected_node_keys(self) -> list[str]:
        out = []
        for t in sorted(self.assignments):
            a = self.assignments[t]
            out.append(a.primary)
            if a.replica is not None:
                out.append(a.replica)
        return out

    def start_of(self, node_key: str) -> float:
        task = int(node_key.split(".")[0])
        a = self.assignments[task]
        if node_key == a.primary:
            return a.start_primary
        if node_key == a.replica:
            return a.start_replica
        raise KeyError(node_key)


@dataclass(frozen=True)
class Infeasible:
    """Marker result when a method proves or declares infeasibility."""

    reason: str = ""
    blocking_task: Optional[int] = None


def selected_arcs(schedule: Schedule, etag: Etag) -> Iterator[EtagArc]:
    """Arcs realized by a schedule: every candidate-arc whose endpoints are
    both selected copies (up to 2x2 per workflow arc under duplication)."""
    chosen = set(schedule.selected_node_keys())
    for (i, j) in sorted(etag.arcs):
        for arc in etag.arcs[(i, j)]:
            if arc.src in chosen and arc.dst in chosen:
                yield arc


def schedule_to_json(schedule: Schedule) -> dict:
    tasks = {}
    for t in sorted(schedule.assignments):
        a = schedule.assignments[t]
        tasks[str(t)] = {
            "primary": a.primary,
            "replica": a.replica,
            "start_primary_s": a.start_primary,
            "start_replica_s": a.start_replica,
        }
    return {
        "method": schedule.method,
        "tasks": tasks,
        "makespan_s": schedule.makespan,
        "deadline_s": schedule.deadline,
        "weights": {
            "latency": schedule.weights.latency,
            "energy": schedule.weights.energy,
            "reliability": schedule.weights.reliability,
        },
        "objectives": {
            "latency_s": schedule.f_lat,
            "energy_j": schedule.f_en,
            "log_reliability": schedule.f_rel,
            "reliability": schedule.reliability,
            "goal": schedule.goal,
        },
        "replica_count": schedule.replica_count,
    }


def schedule_from_json(obj: dict) -> Schedule:
    assignments = {}
    for t, rec in obj["tasks"].items():
        assignments[int(t)] = TaskAssignment(
            primary=rec["primary"],
            replica=rec["replica"],
            start_primary=rec["start_primary_s"],
            start_replica=rec["start_replica_s"],
        )
    w = obj["weights"]
    o = obj["objectives"]
    return Schedule(
        assignments=assignments,
        makespan=obj["makespan_s"],
        deadline=obj["deadline_s"],
        weights=ObjectiveWeights(w["latency"], w["energy"], w["reliability"]),
        method=obj.get("method", ""),
        f_lat=o["latency_s"],
        f_en=o["energy_j"],
        f_rel=o["log_reliability"],
        reliability=o["reliability"],
        goal=o["goal"],
        replica_count=obj.get("replica_count", 0),
    )


def dump_schedule(schedule: Schedule, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schedule_to_json(schedule), fh, indent=1, sort_keys=True)
        fh.write("\n")


def dumps_schedule(schedule: Schedule) -> str:
    return json.dumps(schedule_to_json(schedule), indent=1, sort_keys=True) + "\n"


def load_schedule(path) -> Schedule:
    with open(path, "r", encoding="utf-8") as fh:
        return schedule_from_json(json.load(fh))
