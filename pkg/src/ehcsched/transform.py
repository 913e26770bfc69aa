"""Two-phase task-graph transformation and derived node/arc parameters.

Phase 1 expands every workflow task into the set of capability-feasible
(task, core) allocations; phase 2 adds replica candidate nodes for tasks
with at least one allocation whose reliability falls below the task's
threshold.  Node and arc ordering is fixed so identical inputs produce
byte-identical graphs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

from .model import (
    Channel,
    ModelError,
    SystemModel,
    TaskGraph,
    channel_between,
    core_sort_key,
    device_of_core,
)


class UnallocatableTaskError(ModelError):
    def __init__(self, task_id: int):
        super().__init__("unallocatable-task", f"task {task_id} has no compatible core")
        self.task_id = task_id


class MissingReplicaError(ModelError):
    def __init__(self, node_key: str):
        super().__init__("missing-replica", f"duplicating node {node_key} needs a replica")


def is_exit(tg: TaskGraph, task_id: int) -> bool:
    """True iff the task has no children."""
    return len(tg.children(task_id)) == 0


def exec_energy(exec_time: float, exec_power: float) -> float:
    """Energy drawn by one execution: power times duration."""
    return exec_power * exec_time


def task_reliability(failure_rate: float, exec_time: float) -> float:
    """Probability of a failure-free run under Poisson transient faults."""
    return math.exp(-failure_rate * exec_time)


def needs_duplication(reliability: float, threshold: float) -> bool:
    """Strict comparison: an allocation exactly at threshold needs no replica."""
    return reliability < threshold


def duplication_reliability(r1: float, r2: float) -> float:
    """Probability that at least one of two independent copies succeeds."""
    return 1.0 - (1.0 - r1) * (1.0 - r2)


def comm_latency(data_bits: float, channel: Optional[Channel]) -> float:
    """Transfer time of ``data_bits`` over ``channel``; 0 for intra-device.

    Relayed channels carry harmonically composed bandwidth, so the direct
    and relayed cases collapse to one division.
    """
    if channel is None:
        return 0.0
    return data_bits / channel.bandwidth


def comm_energy(data_bits: float, channel: Optional[Channel]) -> float:
    """Transfer energy; tx/rx coefficients of relayed channels are per-leg sums."""
    if channel is None:
        return 0.0
    return data_bits * (channel.tx_energy + channel.rx_energy)


@dataclass(frozen=True)
class TagNode:
    """Feasible allocation of one task on one core, with derived parameters."""

    task: int
    core: str
    exec_time: float
    exec_power: float
    exec_energy: float
    reliability: float
    needs_duplication: bool

    @property
    def device(self) -> str:
        return device_of_core(self.core)


@dataclass(frozen=True)
class TagArc:
    src_task: int
    dst_task: int
    src_core: str
    dst_core: str
    indirect: bool
    intermediate: Optional[str]
    comm_latency: float
    comm_energy: float


@dataclass
class Tag:
    """Intermediate allocation graph: one node set per task, one arc set per arc."""

    system: SystemModel
    workflow: TaskGraph
    nodes: dict[int, tuple[TagNode, ...]]
    arcs: dict[tuple[int, int], tuple[TagArc, ...]]


def _compatible_cores(sys: SystemModel, capability: int) -> list[str]:
    cores = [
        c.id
        for d in sys.devices
        if capability in d.capabilities
        for c in d.cores
    ]
    return sorted(cores, key=core_sort_key)


def build_tag(tg: TaskGraph, sys: SystemModel) -> Tag:
    """Phase 1: expand tasks into capability-feasible allocations.

    Raises UnallocatableTaskError when a task has no core on any device
    featuring its required capability (or no execution profile for one).
    """
    nodes: dict[int, tuple[TagNode, ...]] = {}
    for task in tg.tasks:
        cand = []
        for core_id in _compatible_cores(sys, task.required_capability):
            if core_id not in task.exec_time:
                continue
            L = task.exec_time[core_id]
            P = task.exec_power[core_id]
            R = task_reliability(sys.core(core_id).failure_rate, L)
            cand.append(
                TagNode(
                    task=task.id,
                    core=core_id,
                    exec_time=L,
                    exec_power=P,
                    exec_energy=exec_energy(L, P),
                    reliability=R,
                    needs_duplication=needs_duplication(R, task.reliability_threshold),
                )
            )
        if not cand:
            raise UnallocatableTaskError(task.id)
        nodes[task.id] = tuple(cand)

    arcs: dict[tuple[int, int], tuple[TagArc, ...]] = {}
    for i, j in sorted(tg.arcs):
        data = tg.task(i).output_data
        bundle = []
        for src in nodes[i]:
            for dst in nodes[j]:
                ch = None
                if src.device != dst.device:
                    ch = channel_between(sys, src.device, dst.device)
                bundle.append(
                    TagArc(
                        src_task=i,
                        dst_task=j,
                        src_core=src.core,
                        dst_core=dst.core,
                        indirect=ch is not None and ch.intermediate is not None,
                        intermediate=None if ch is None else ch.intermediate,
                        comm_latency=comm_latency(data, ch),
                        comm_energy=comm_energy(data, ch),
                    )
                )
        arcs[(i, j)] = tuple(bundle)
    return Tag(system=sys, workflow=tg, nodes=nodes, arcs=arcs)


PRIMARY = 1
REPLICA = 2


def node_key(task: int, copy: int, core: str) -> str:
    return f"{task}.{copy}@{core}"


def parse_node_key(key: str) -> tuple[int, int, str]:
    head, core = key.split("@")
    task, copy = head.split(".")
    return int(task), int(copy), core


@dataclass(frozen=True)
class EtagNode:
    """Primary (copy 1) or replica (copy 2) candidate node."""

    task: int
    copy: int
    core: str
    exec_time: float
    exec_power: float
    exec_energy: float
    reliability: float
    needs_duplication: bool

    @property
    def key(self) -> str:
        return node_key(self.task, self.copy, self.core)

    @property
    def device(self) -> str:
        return device_of_core(self.core)

    def sort_key(self):
        return (self.task, self.copy) + core_sort_key(self.core)


@dataclass(frozen=True)
class EtagArc:
    src: str  # node key
    dst: str  # node key
    src_task: int
    dst_task: int
    data_bits: float
    indirect: bool
    intermediate: Optional[str]
    comm_latency: float
    comm_energy: float


@dataclass
class Etag:
    """Extended allocation graph with selective duplication applied."""

    system: SystemModel
    workflow: TaskGraph
    primary: dict[int, tuple[EtagNode, ...]]
    replica: dict[int, tuple[EtagNode, ...]]  # empty tuple when no allocation duplicates
    arcs: dict[tuple[int, int], tuple[EtagArc, ...]]
    total_reliability_table: dict[tuple[str, Optional[str]], float]

    def __post_init__(self):
        self._by_key = {n.key: n for ns in self.primary.values() for n in ns}
        self._by_key.update({n.key: n for ns in self.replica.values() for n in ns})
        self._arcs_out: dict[str, list[EtagArc]] = {k: [] for k in self._by_key}
        self._arcs_in: dict[str, list[EtagArc]] = {k: [] for k in self._by_key}
        for bundle in self.arcs.values():
            for a in bundle:
                self._arcs_out[a.src].append(a)
                self._arcs_in[a.dst].append(a)

    def node(self, key: str) -> EtagNode:
        return self._by_key[key]

    def nodes_of(self, task_id: int) -> list[EtagNode]:
        return list(self.primary[task_id]) + list(self.replica[task_id])

    def all_nodes(self) -> list[EtagNode]:
        out = []
        for t in self.workflow.task_ids:
            out.extend(self.nodes_of(t))
        return out

    def all_arcs(self) -> list[EtagArc]:
        return [a for k in sorted(self.arcs) for a in self.arcs[k]]

    def arcs_out(self, key: str) -> list[EtagArc]:
        return self._arcs_out[key]

    def arcs_in(self, key: str) -> list[EtagArc]:
        return self._arcs_in[key]

    def copies(self, task_id: int) -> list[int]:
        return [PRIMARY, REPLICA] if self.replica[task_id] else [PRIMARY]

    def copy_sets(self) -> list[tuple[int, int]]:
        """All (task, copy) pairs, in deterministic order."""
        return [(t, n) for t in self.workflow.task_ids for n in self.copies(t)]

    @property
    def node_count(self) -> int:
        return len(self._by_key)

    @property
    def arc_count(self) -> int:
        return sum(len(b) for b in self.arcs.values())

    def total_reliability_of(self, primary_key: str, replica_key: Optional[str]) -> float:
        return self.total_reliability_table[(primary_key, replica_key)]


def total_reliability(primary: EtagNode, replica: Optional[EtagNode]) -> float:
    """Overall success probability of a task given its selected allocation(s)."""
    if primary.needs_duplication:
        if replica is None:
            raise MissingReplicaError(primary.key)
        return duplication_reliability(primary.reliability, replica.reliability)
    return primary.reliability


def build_etag(tag: Tag) -> Etag:
    """Phase 2: add replica candidates wherever some allocation duplicates.

    The replica node set of a task mirrors its primary set core-for-core;
    arcs connect every candidate-node pair of each workflow arc.
    """
    tg = tag.workflow
    primary: dict[int, tuple[EtagNode, ...]] = {}
    replica: dict[int, tuple[EtagNode, ...]] = {}
    for t in tg.task_ids:
        prim = tuple(
            EtagNode(
                task=n.task,
                copy=PRIMARY,
                core=n.core,
                exec_time=n.exec_time,
                exec_power=n.exec_power,
                exec_energy=n.exec_energy,
                reliability=n.reliability,
                needs_duplication=n.needs_duplication,
            )
            for n in sorted(tag.nodes[t], key=lambda n: core_sort_key(n.core))
        )
        primary[t] = prim
        if any(n.needs_duplication for n in tag.nodes[t]):
            replica[t] = tuple(
                EtagNode(
                    task=n.task,
                    copy=REPLICA,
                    core=n.core,
                    exec_time=n.exec_time,
                    exec_power=n.exec_power,
                    exec_energy=n.exec_energy,
                    reliability=n.reliability,
                    needs_duplication=n.needs_duplication,
                )
                for n in prim
            )
        else:
            replica[t] = ()

    arcs: dict[tuple[int, int], tuple[EtagArc, ...]] = {}
    for (i, j), bundle in tag.arcs.items():
        params = {(a.src_core, a.dst_core): a for a in bundle}
        expanded = []
        for src in list(primary[i]) + list(replica[i]):
            for dst in list(primary[j]) + list(replica[j]):
                p = params[(src.core, dst.core)]
                expanded.append(
                    EtagArc(
                        src=src.key,
                        dst=dst.key,
                        src_task=i,
                        dst_task=j,
                        data_bits=tg.task(i).output_data,
                        indirect=p.indirect,
                        intermediate=p.intermediate,
                        comm_latency=p.comm_latency,
                        comm_energy=p.comm_energy,
                    )
                )
        expanded.sort(key=lambda a: (parse_node_key_sort(a.src), parse_node_key_sort(a.dst)))
        arcs[(i, j)] = tuple(expanded)

    table: dict[tuple[str, Optional[str]], float] = {}
    for t in tg.task_ids:
        for p in primary[t]:
            if p.needs_duplication:
                for r in replica[t]:
                    table[(p.key, r.key)] = total_reliability(p, r)
            else:
                table[(p.key, None)] = total_reliability(p, None)
    return Etag(
        system=tag.system,
        workflow=tg,
        primary=primary,
        replica=replica,
        arcs=arcs,
        total_reliability_table=table,
    )


def parse_node_key_sort(key: str):
    task, copy, core = parse_node_key(key)
    return (task, copy) + core_sort_key(core)


def build_etag_from_instance(tg: TaskGraph, sys: SystemModel) -> Etag:
    return build_etag(build_tag(tg, sys))


def etag_size_bounds(task_count: int, arc_count: int, core_count: int) -> tuple[int, int]:
    """Worst-case candidate node and arc counts after both phases."""
    return (2 * core_count * task_count, 4 * core_count**2 * arc_count)


def arc_device_energy(arc: EtagArc, system: SystemModel) -> dict[str, float]:
    """Per-device energy contributions of one realized transfer.

    The sender pays the transmit coefficient of its outgoing leg, the
    receiver the receive coefficient of its incoming leg, and a relay device
    pays receive on the first leg plus transmit on the second.  Intra-device
    transfers cost nothing.
    """
    src_dev = device_of_core(arc.src.split("@")[1])
    dst_dev = device_of_core(arc.dst.split("@")[1])
    if src_dev == dst_dev:
        return {}
    data = arc.data_bits
    if arc.intermediate is None:
        ch = channel_between(system, src_dev, dst_dev)
        return {src_dev: data * ch.tx_energy, dst_dev: data * ch.rx_energy}
    mid = arc.intermediate
    leg1 = channel_between(system, src_dev, mid)
    leg2 = channel_between(system, mid, dst_dev)
    return {
        src_dev: data * leg1.tx_energy,
        mid: data * (leg1.rx_energy + leg2.tx_energy),
        dst_dev: data * leg2.rx_energy,
    }


def critical_path_length(etag: Etag) -> float:
    """Longest entry-to-exit path over all candidate node and arc choices.

    Path length sums candidate-node execution times and candidate-arc
    transfer times; a dynamic program over the (acyclic) expanded graph
    yields the maximum over all realizations.
    """
    best: dict[str, float] = {}
    order = etag.workflow.topological_order()
    for t in reversed(order):
        for n in etag.nodes_of(t):
            tail = 0.0
            for a in etag.arcs_out(n.key):
                tail = max(tail, a.comm_latency + best[a.dst])
            best[n.key] = n.exec_time + tail
    entries = etag.workflow.entry_tasks()
    return max(best[n.key] for t in entries for n in etag.nodes_of(t))


def critical_path_deadline(etag: Etag, factor: float = 1.5) -> float:
    """Deadline as a multiple of the longest candidate path."""
    if factor <= 0:
        raise ValueError("factor must be positive")
    return factor * critical_path_length(etag)


def etag_to_json(etag: Etag) -> dict:
    """Stable dump with node keys ``{task}.{copy}@{tier}{k}.{q}``."""
    nodes = [
        {
            "key": n.key,
            "task": n.task,
            "copy": n.copy,
            "core": n.core,
            "exec_time_s": n.exec_time,
            "exec_power_w": n.exec_power,
            "exec_energy_j": n.exec_energy,
            "reliability": n.reliability,
            "needs_duplication": n.needs_duplication,
        }
        for n in etag.all_nodes()
    ]
    arcs = [
        {
            "src": a.src,
            "dst": a.dst,
            "data_bits": a.data_bits,
            "indirect": a.indirect,
            "intermediate": a.intermediate,
            "comm_latency_s": a.comm_latency,
            "comm_energy_j": a.comm_energy,
        }
        for a in etag.all_arcs()
    ]
    reliability = [
        {"primary": p, "replica": r, "value": v}
        for (p, r), v in sorted(
            etag.total_reliability_table.items(),
            key=lambda kv: (parse_node_key_sort(kv[0][0]), kv[0][1] or ""),
        )
    ]
    return {
        "tasks": etag.workflow.task_ids,
        "nodes": nodes,
        "arcs": arcs,
        "total_reliability": reliability,
    }


def dump_etag(etag: Etag, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(etag_to_json(etag), fh, indent=1, sort_keys=True)
        fh.write("\n")
