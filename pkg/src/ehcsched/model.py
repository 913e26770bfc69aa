"""System and application data model for edge-hub-cloud workflow scheduling.

All quantities are stored in canonical units: seconds, joules, bytes
(memory/storage), bits (transferred data), bits/s (bandwidth) and J/bit
(link energy).  Instance files use unit-suffixed field names (``_mib``,
``_wh``, ``_mbit_s``, ...) and are converted once at ingestion, so every
downstream formula operates on consistent units.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

TIERS = ("edge", "hub", "cloud")
TIER_LETTER = {"edge": "e", "hub": "h", "cloud": "c"}
LETTER_TIER = {v: k for k, v in TIER_LETTER.items()}
TIER_RANK = {"e": 0, "h": 1, "c": 2}

BASIC_CAPABILITY = 0

# unit conversions applied at ingestion
WH_TO_J = 3600.0
GIB_TO_BYTES = float(2**30)
MIB_TO_BYTES = float(2**20)
MIB_TO_BITS = float(8 * 2**20)  # 8_388_608
MBIT_S_TO_BIT_S = 1e6
UJ_TO_J = 1e-6
MS_TO_S = 1e-3


class ModelError(Exception):
    """Error with a machine-readable ``code`` attribute."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


class NoRouteError(ModelError):
    def __init__(self, a: str, b: str):
        super().__init__("no-route", f"no channel between {a} and {b}")


def tier_of(device_id: str) -> str:
    return LETTER_TIER[device_id[0]]


def device_sort_key(device_id: str):
    return (TIER_RANK[device_id[0]], int(device_id[1:]))


def core_sort_key(core_id: str):
    dev, q = core_id.split(".")
    return device_sort_key(dev) + (int(q),)


def device_of_core(core_id: str) -> str:
    return core_id.split(".")[0]


@dataclass(frozen=True)
class Core:
    """A reserved processing core; executes one task copy at a time."""

    id: str  # "<device>.<q>", e.g. "e1.1"
    failure_rate: float  # failures per second

    @property
    def device(self) -> str:
        return device_of_core(self.id)


@dataclass(frozen=True)
class Device:
    id: str  # tier letter + index, e.g. "e1"
    cores: tuple[Core, ...]
    memory_budget: float  # bytes
    storage_budget: float  # bytes
    energy_budget: float  # joules
    capabilities: frozenset[int]

    @property
    def tier(self) -> str:
        return tier_of(self.id)


@dataclass(frozen=True)
class Channel:
    """Directed communication channel.

    Synthetic relayed channels (edge<->cloud) store the relay device in
    ``intermediate`` and carry end-to-end effective parameters: bandwidth is
    the harmonic composition of the two legs and tx/rx energies are the sums
    of the per-leg coefficients, so transfer-time and transfer-energy
    formulas need no special casing.  Per-leg accounting (device energy
    budgets) resolves the legs through the system model.
    """

    src: str
    dst: str
    bandwidth: float  # bits/s
    tx_energy: float  # J/bit
    rx_energy: float  # J/bit
    intermediate: Optional[str] = None


@dataclass
class SystemModel:
    devices: tuple[Device, ...]
    channels: tuple[Channel, ...]
    capability_universe: frozenset[int]

    def __post_init__(self):
        self._by_id = {d.id: d for d in self.devices}
        self._chan = {(c.src, c.dst): c for c in self.channels}

    def device(self, device_id: str) -> Device:
        return self._by_id[device_id]

    @property
    def device_ids(self) -> list[str]:
        return [d.id for d in self.devices]

    def all_cores(self) -> list[Core]:
        return [c for d in self.devices for c in d.cores]

    def core(self, core_id: str) -> Core:
        dev = self._by_id[device_of_core(core_id)]
        for c in dev.cores:
            if c.id == core_id:
                return c
        raise KeyError(core_id)

    def has_capability(self, device_id: str, capability: int) -> bool:
        return capability in self._by_id[device_id].capabilities


def channel_between(sys: SystemModel, a: str, b: str) -> Channel:
    """Directed channel from device ``a`` to device ``b`` (``a != b``).

    Relayed pairs are looked up from the synthetic entries created at
    construction time; a missing entry in a valid system model cannot occur.
    """
    if a == b:
        raise ValueError("channel_between requires distinct devices")
    ch = sys._chan.get((a, b))
    if ch is None:
        raise NoRouteError(a, b)
    return ch


def build_system(
    devices: Iterable[Device],
    channels: Iterable[Channel],
    capability_universe: Optional[Iterable[int]] = None,
) -> SystemModel:
    """Assemble a SystemModel, expanding relayed edge<->cloud channels.

    Every ordered device pair without a direct channel but with a two-hop
    route through a hub gains a synthetic directed channel whose effective
    bandwidth is ``1/(1/e1 + 1/e2)`` and whose tx/rx energies are the per-leg
    sums, with ``intermediate`` naming the hub.
    """
    devices = tuple(sorted(devices, key=lambda d: device_sort_key(d.id)))
    chan_map: dict[tuple[str, str], Channel] = {}
    for ch in channels:
        chan_map[(ch.src, ch.dst)] = ch
    hubs = [d.id for d in devices if d.tier == "hub"]
    for a in devices:
        for b in devices:
            if a.id == b.id or (a.id, b.id) in chan_map:
                continue
            for h in hubs:
                leg1 = chan_map.get((a.id, h))
                leg2 = chan_map.get((h, b.id))
                if leg1 is None or leg2 is None or leg1.intermediate or leg2.intermediate:
                    continue
                eff_bw = 1.0 / (1.0 / leg1.bandwidth + 1.0 / leg2.bandwidth)
                chan_map[(a.id, b.id)] = Channel(
                    src=a.id,
                    dst=b.id,
                    bandwidth=eff_bw,
                    tx_energy=leg1.tx_energy + leg2.tx_energy,
                    rx_energy=leg1.rx_energy + leg2.rx_energy,
                    intermediate=h,
                )
                break
    if capability_universe is None:
        capability_universe = set().union(*(d.capabilities for d in devices))
    ordered = tuple(chan_map[k] for k in sorted(chan_map))
    return SystemModel(devices, ordered, frozenset(capability_universe))


@dataclass(frozen=True)
class Task:
    id: int
    memory: float  # bytes
    storage: float  # bytes
    output_data: float  # bits
    required_capability: int
    reliability_threshold: float
    exec_time: dict[str, float] = field(default_factory=dict)  # core id -> s
    exec_power: dict[str, float] = field(default_factory=dict)  # core id -> W


@dataclass
class TaskGraph:
    tasks: tuple[Task, ...]
    arcs: tuple[tuple[int, int], ...]
    deadline: Optional[float] = None  # seconds, may be derived later

    def __post_init__(self):
        self._by_id = {t.id: t for t in self.tasks}
        self._children: dict[int, list[int]] = {t.id: [] for t in self.tasks}
        self._parents: dict[int, list[int]] = {t.id: [] for t in self.tasks}
        for i, j in self.arcs:
            if i in self._children and j in self._parents:
                self._children[i].append(j)
                self._parents[j].append(i)

    def task(self, task_id: int) -> Task:
        return self._by_id[task_id]

    def children(self, task_id: int) -> list[int]:
        return self._children[task_id]

    def parents(self, task_id: int) -> list[int]:
        return self._parents[task_id]

    @property
    def task_ids(self) -> list[int]:
        return [t.id for t in self.tasks]

    def entry_tasks(self) -> list[int]:
        return [t for t in self.task_ids if not self._parents[t]]

    def exit_tasks(self) -> list[int]:
        return [t for t in self.task_ids if not self._children[t]]

    def topological_order(self) -> list[int]:
        indeg = {t: len(self._parents[t]) for t in self.task_ids}
        frontier = [t for t in self.task_ids if indeg[t] == 0]
        order: list[int] = []
        while frontier:
            t = frontier.pop(0)
            order.append(t)
            for c in self._children[t]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    frontier.append(c)
        return order

    def is_acyclic(self) -> bool:
        return len(self.topological_order()) == len(self.tasks)

    def descendants(self) -> dict[int, set[int]]:
        """Transitive child sets, one entry per task."""
        desc: dict[int, set[int]] = {t: set() for t in self.task_ids}
        for t in reversed(self.topological_order()):
            for c in self._children[t]:
                desc[t].add(c)
                desc[t].update(desc[c])
        return desc


@dataclass(frozen=True)
class ObjectiveWeights:
    latency: float
    energy: float
    reliability: float

    def __post_init__(self):
        total = self.latency + self.energy + self.reliability
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1 (got {total!r})")
        for w in (self.latency, self.energy, self.reliability):
            if not (0.0 <= w <= 1.0):
                raise ValueError(f"weight {w!r} outside [0, 1]")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.latency, self.energy, self.reliability)


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    detail: str = ""

    def __str__(self):
        return f"{self.code} [{self.subject}] {self.detail}".rstrip()


def validate_system(sys: SystemModel) -> list[Violation]:
    """Structural validation; returns an empty list iff all invariants hold."""
    out: list[Violation] = []
    seen: set[str] = set()
    for d in sys.devices:
        if d.id in seen:
            out.append(Violation("duplicate-device-id", d.id))
        seen.add(d.id)
        if d.id[0] not in LETTER_TIER:
            out.append(Violation("unknown-tier", d.id))
            continue
        if BASIC_CAPABILITY not in d.capabilities:
            out.append(Violation("missing-basic-capability", d.id))
        if not d.cores:
            out.append(Violation("no-cores", d.id))
        for label, budget in (
            ("memory", d.memory_budget),
            ("storage", d.storage_budget),
            ("energy", d.energy_budget),
        ):
            if budget < 0:
                out.append(Violation("negative-budget", d.id, label))
        for c in d.cores:
            if c.failure_rate <= 0:
                out.append(Violation("nonpositive-failure-rate", c.id))
            if c.device != d.id:
                out.append(Violation("core-device-mismatch", c.id))
        unknown = d.capabilities - sys.capability_universe
        if unknown:
            out.append(Violation("unknown-capability", d.id, str(sorted(unknown))))

    ids = {d.id for d in sys.devices}
    for ch in sys.channels:
        key = f"{ch.src}->{ch.dst}"
        if ch.src not in ids or ch.dst not in ids:
            out.append(Violation("unknown-endpoint", key))
            continue
        if ch.bandwidth <= 0:
            out.append(Violation("nonpositive-bandwidth", key))
        if ch.tx_energy < 0 or ch.rx_energy < 0:
            out.append(Violation("negative-link-energy", key))
        if ch.intermediate is not None:
            if (ch.src, ch.intermediate) not in sys._chan or (
                ch.intermediate,
                ch.dst,
            ) not in sys._chan:
                out.append(Violation("broken-relay", key, ch.intermediate))

    # topology: edge<->edge and edge<->hub fully connected (directed both
    # ways), hub<->cloud connected, edge<->cloud relayed through a hub
    edges = [d.id for d in sys.devices if d.tier == "edge"]
    hubs = [d.id for d in sys.devices if d.tier == "hub"]
    clouds = [d.id for d in sys.devices if d.tier == "cloud"]

    def need(a, b, relayed=False):
        ch = sys._chan.get((a, b))
        if ch is None:
            out.append(Violation("missing-channel", f"{a}->{b}"))
        elif relayed and ch.intermediate is None:
            out.append(Violation("missing-relay", f"{a}->{b}"))

    for a in edges:
        for b in edges:
            if a != b:
                need(a, b)
        for h in hubs:
            need(a, h)
            need(h, a)
        for c in clouds:
            need(a, c, relayed=True)
            need(c, a, relayed=True)
    for h in hubs:
        for c in clouds:
            need(h, c)
            need(c, h)
    return out


def validate_workflow(tg: TaskGraph) -> list[Violation]:
    out: list[Violation] = []
    seen: set[int] = set()
    for t in tg.tasks:
        name = f"task {t.id}"
        if t.id in seen:
            out.append(Violation("duplicate-task-id", name))
        seen.add(t.id)
        cap = t.required_capability
        if isinstance(cap, (tuple, list, set, frozenset)):
            out.append(Violation("multi-capability-task", name, str(sorted(cap))))
        if not (0.0 < t.reliability_threshold < 1.0):
            out.append(Violation("bad-threshold", name, repr(t.reliability_threshold)))
        for v, code in (
            (t.memory, "negative-memory"),
            (t.storage, "negative-storage"),
            (t.output_data, "negative-output-data"),
        ):
            if v < 0:
                out.append(Violation(code, name))
        if set(t.exec_time) != set(t.exec_power):
            out.append(Violation("exec-tables-mismatch", name))
        for core, L in t.exec_time.items():
            if L <= 0:
                out.append(Violation("nonpositive-exec-time", name, core))
        for core, P in t.exec_power.items():
            if P <= 0:
                out.append(Violation("nonpositive-exec-power", name, core))
    for i, j in tg.arcs:
        if i not in seen or j not in seen:
            out.append(Violation("unknown-arc-endpoint", f"arc {i}->{j}"))
        elif i == j:
            out.append(Violation("self-arc", f"arc {i}->{j}"))
    if not tg.is_acyclic():
        out.append(Violation("cycle", "workflow"))
    else:
        if not tg.entry_tasks():
            out.append(Violation("no-entry", "workflow"))
        if not tg.exit_tasks():
            out.append(Violation("no-exit", "workflow"))
    if tg.deadline is not None and tg.deadline <= 0:
        out.append(Violation("nonpositive-deadline", "workflow"))
    return out


# ---------------------------------------------------------------------------
# JSON instance ingestion


def _device_from_json(obj: dict) -> Device:
    dev_id = obj["id"]
    cores = tuple(
        Core(id=f"{dev_id}.{q + 1}", failure_rate=float(c["failure_rate_per_s"]))
        for q, c in enumerate(obj["cores"])
    )
    return Device(
        id=dev_id,
        cores=cores,
        memory_budget=float(obj["memory_budget_gib"]) * GIB_TO_BYTES,
        storage_budget=float(obj["storage_budget_gib"]) * GIB_TO_BYTES,
        energy_budget=float(obj["energy_budget_wh"]) * WH_TO_J,
        capabilities=frozenset(int(c) for c in obj["capabilities"]),
    )


def _task_from_json(obj: dict) -> Task:
    cap = obj["capability"]
    if isinstance(cap, list) and len(cap) == 1:
        cap = cap[0]
    elif isinstance(cap, list):
        cap = tuple(cap)  # flagged by validate_workflow as multi-capability-task
    return Task(
        id=int(obj["id"]),
        memory=float(obj["memory_mib"]) * MIB_TO_BYTES,
        storage=float(obj["storage_mib"]) * MIB_TO_BYTES,
        output_data=float(obj["output_data_mib"]) * MIB_TO_BITS,
        required_capability=cap,
        reliability_threshold=float(obj["reliability_threshold"]),
        exec_time={k: float(v) * MS_TO_S for k, v in obj["exec_time_ms"].items()},
        exec_power={k: float(v) for k, v in obj["exec_power_w"].items()},
    )


def system_from_json(obj: dict) -> SystemModel:
    devices = [_device_from_json(d) for d in obj["devices"]]
    channels = []
    for ch in obj["channels"]:
        entry = Channel(
            src=ch["src"],
            dst=ch["dst"],
            bandwidth=float(ch["bandwidth_mbit_s"]) * MBIT_S_TO_BIT_S,
            tx_energy=float(ch["tx_energy_uj_bit"]) * UJ_TO_J,
            rx_energy=float(ch["rx_energy_uj_bit"]) * UJ_TO_J,
        )
        channels.append(entry)
        if ch.get("symmetric"):
            channels.append(
                Channel(
                    src=entry.dst,
                    dst=entry.src,
                    bandwidth=entry.bandwidth,
                    tx_energy=entry.tx_energy,
                    rx_energy=entry.rx_energy,
                )
            )
    universe = obj.get("capability_universe")
    return build_system(devices, channels, universe)


def workflow_from_json(obj: dict) -> TaskGraph:
    tasks = tuple(_task_from_json(t) for t in obj["tasks"])
    arcs = tuple((int(i), int(j)) for i, j in obj["arcs"])
    deadline = obj.get("deadline_s")
    return TaskGraph(tasks, arcs, None if deadline is None else float(deadline))


def load_instance(source) -> tuple[SystemModel, TaskGraph, Optional[ObjectiveWeights]]:
    """Load an instance from a path, file object, or already-parsed dict."""
    if isinstance(source, dict):
        obj = source
    elif hasattr(source, "read"):
        obj = json.load(source)
    else:
        with open(source, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    system = system_from_json(obj["system"])
    workflow = workflow_from_json(obj["workflow"])
    weights = None
    if "weights" in obj and obj["weights"] is not None:
        w = obj["weights"]
        weights = ObjectiveWeights(
            latency=float(w["latency"]),
            energy=float(w["energy"]),
            reliability=float(w["reliability"]),
        )
    return system, workflow, weights


def instance_to_json(
    system: SystemModel,
    workflow: TaskGraph,
    weights: Optional[ObjectiveWeights] = None,
) -> dict:
    """Inverse of load_instance for generator output (canonical -> file units)."""
    devices = []
    for d in system.devices:
        devices.append(
            {
                "id": d.id,
                "cores": [{"failure_rate_per_s": c.failure_rate} for c in d.cores],
                "memory_budget_gib": d.memory_budget / GIB_TO_BYTES,
                "storage_budget_gib": d.storage_budget / GIB_TO_BYTES,
                "energy_budget_wh": d.energy_budget / WH_TO_J,
                "capabilities": sorted(d.capabilities),
            }
        )
    channels = [
        {
            "src": ch.src,
            "dst": ch.dst,
            "bandwidth_mbit_s": ch.bandwidth / MBIT_S_TO_BIT_S,
            "tx_energy_uj_bit": ch.tx_energy / UJ_TO_J,
            "rx_energy_uj_bit": ch.rx_energy / UJ_TO_J,
        }
        for ch in system.channels
        if ch.intermediate is None  # synthetic entries are re-derived at load
    ]
    tasks = []
    for t in workflow.tasks:
        tasks.append(
            {
                "id": t.id,
                "memory_mib": t.memory / MIB_TO_BYTES,
                "storage_mib": t.storage / MIB_TO_BYTES,
                "output_data_mib": t.output_data / MIB_TO_BITS,
                "capability": t.required_capability,
                "reliability_threshold": t.reliability_threshold,
                "exec_time_ms": {k: v / MS_TO_S for k, v in sorted(t.exec_time.items())},
                "exec_power_w": dict(sorted(t.exec_power.items())),
            }
        )
    obj = {
        "system": {
            "devices": devices,
            "channels": channels,
            "capability_universe": sorted(system.capability_universe),
        },
        "workflow": {
            "deadline_s": workflow.deadline,
            "tasks": tasks,
            "arcs": [list(a) for a in workflow.arcs],
        },
    }
    if weights is not None:
        obj["weights"] = {
            "latency": weights.latency,
            "energy": weights.energy,
            "reliability": weights.reliability,
        }
    return obj
