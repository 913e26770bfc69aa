"""Instance fixtures and the seeded synthetic workflow generator.

The six-device reference system, its three capability-provisioning
configurations (C1 moderately, C2 minimally, C3 over-provisioned), the
published parameter ranges, and the device performance ratios are encoded
here as constants.  The 16-task inspection workflow ships with its exact
per-task capabilities and reliability thresholds; its arc set is a
documented reconstruction from the task semantics (three preprocessing
chains converging into a fusion task, then fan-out to storage, display,
and tag deployment), and its resource parameters are seeded samples from
the published ranges, since the original profiling data is not available.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .model import (
    Channel,
    Core,
    Device,
    GIB_TO_BYTES,
    MBIT_S_TO_BIT_S,
    MIB_TO_BITS,
    MIB_TO_BYTES,
    ModelError,
    MS_TO_S,
    ObjectiveWeights,
    SystemModel,
    Task,
    TaskGraph,
    UJ_TO_J,
    WH_TO_J,
    build_system,
)


class UnsatisfiableSpecError(ModelError):
    def __init__(self, detail: str):
        super().__init__("unsatisfiable-spec", detail)


# capability ids: 0 basic, 1 thermal camera, 2 LiDAR, 3 multispectral camera,
# 4 GNSS module, 5 tag release (edge); 6 coordination, 7 display (hub);
# 8 GPU, 9 high-availability storage (cloud)
CAPABILITY_UNIVERSE = frozenset(range(10))
ENTRY_CAPABILITIES = (1, 2, 3)
INTERMEDIATE_CAPABILITIES = (4, 6, 8)
EXIT_CAPABILITIES = (5, 7, 9)

# (device id, cores, memory GiB, storage GiB, energy Wh, caps per config)
DEVICE_TABLE = (
    ("e1", 2, 0.95, 1.0, 1.0, {"C1": (0, 1, 5), "C2": (0, 5), "C3": (0, 1, 2, 3, 4, 5)}),
    ("e2", 2, 1.00, 1.5, 1.0, {"C1": (0, 1, 5), "C2": (0, 1), "C3": (0, 1, 2, 3, 4, 5)}),
    ("e3", 2, 2.00, 2.0, 1.0, {"C1": (0, 2, 3, 4), "C2": (0, 3), "C3": (0, 1, 2, 3, 4, 5)}),
    ("e4", 2, 2.00, 2.5, 1.0, {"C1": (0, 2, 3, 4), "C2": (0, 2, 4), "C3": (0, 1, 2, 3, 4, 5)}),
    ("h1", 4, 3.00, 5.0, 2.0, {"C1": (0, 6, 7), "C2": (0, 6, 7), "C3": (0, 6, 7)}),
    ("c1", 6, 4.00, 10.0, 10.0, {"C1": (0, 8, 9), "C2": (0, 8, 9), "C3": (0, 8, 9)}),
)

FAILURE_RATE_RANGES = {"e": (6e-4, 8e-4), "h": (4e-4, 6e-4), "c": (2e-4, 4e-4)}

# (kind, bandwidth Mbit/s, tx uJ/bit, rx uJ/bit); edge<->edge entries are
# undirected in the source table and expand to both directions
CHANNEL_RANGES = {
    "ee": ((6.0, 9.0), (0.6, 1.0), (0.4, 0.6)),
    "eh": ((9.0, 13.0), (0.8, 1.2), (0.6, 0.8)),
    "he": ((7.0, 10.0), (0.7, 1.1), (0.5, 0.7)),
    "hc": ((10.0, 15.0), (1.8, 2.7), (0.8, 1.2)),
    "ch": ((16.0, 24.0), (2.0, 3.0), (1.0, 1.5)),
}

PARAMETER_RANGES = {
    "memory_mib": (12.4, 453.0),
    "storage_mib": (29.3, 448.9),
    "output_mib": (0.4, 18.1),
    "exec_ms": (2.6, 12648.4),
    "power_w": (0.3, 23.7),
    "threshold": (0.9990, 0.9999),
}

# single-core benchmark-derived speedups relative to the slowest device
PERFORMANCE_RATIOS = {
    "e1": 1.00,
    "e2": 1.20,
    "e3": 2.80,
    "e4": 5.74,
    "h1": 15.23,
    "c1": 21.70,
}

REAL_WORLD_TASKS = (
    # (id, capability, reliability threshold)
    (1, 3, 0.9999),
    (2, 0, 0.9996),
    (3, 0, 0.9994),
    (4, 0, 0.9994),
    (5, 2, 0.9998),
    (6, 4, 0.9997),
    (7, 0, 0.9996),
    (8, 0, 0.9997),
    (9, 1, 0.9999),
    (10, 0, 0.9995),
    (11, 0, 0.9993),
    (12, 8, 0.9999),
    (13, 9, 0.9995),
    (14, 6, 0.9998),
    (15, 7, 0.9993),
    (16, 5, 0.9998),
)

# reconstruction: three sensing/preprocessing chains fuse in task 12, which
# feeds storage (13) and planning (14); planning feeds display (15) and tag
# deployment (16)
REAL_WORLD_ARCS = (
    (1, 2), (2, 3), (3, 4),
    (5, 6), (6, 7), (7, 8),
    (9, 10), (10, 11),
    (4, 12), (8, 12), (11, 12),
    (12, 13), (12, 14),
    (14, 15), (14, 16),
)

_REAL_WORLD_SEED = 52406


def _mid(rng_pair):
    return 0.5 * (rng_pair[0] + rng_pair[1])


def _channel_kind(src: str, dst: str) -> str:
    return src[0] + dst[0]


def build_paper_system(config: str = "C1", rng: random.Random | None = None) -> SystemModel:
    """The six-device reference system under one capability configuration.

    Without an rng, failure rates and channel parameters sit at the
    midpoints of their published ranges; with one, they are sampled
    uniformly inside those ranges.
    """
    if config not in ("C1", "C2", "C3"):
        raise ValueError(f"unknown configuration {config!r}")

    def draw(lo_hi):
        return rng.uniform(*lo_hi) if rng is not None else _mid(lo_hi)

    devices = []
    for dev_id, n_cores, mem, sto, wh, caps in DEVICE_TABLE:
        rate_range = FAILURE_RATE_RANGES[dev_id[0]]
        cores = tuple(
            Core(id=f"{dev_id}.{q + 1}", failure_rate=draw(rate_range))
            for q in range(n_cores)
        )
        devices.append(
            Device(
                id=dev_id,
                cores=cores,
                memory_budget=mem * GIB_TO_BYTES,
                storage_budget=sto * GIB_TO_BYTES,
                energy_budget=wh * WH_TO_J,
                capabilities=frozenset(caps[config]),
            )
        )

    channels = []
    edge_ids = [d.id for d in devices if d.id.startswith("e")]

    def make(src, dst):
        bw, tx, rx = CHANNEL_RANGES[_channel_kind(src, dst)]
        channels.append(
            Channel(
                src=src,
                dst=dst,
                bandwidth=draw(bw) * MBIT_S_TO_BIT_S,
                tx_energy=draw(tx) * UJ_TO_J,
                rx_energy=draw(rx) * UJ_TO_J,
            )
        )

    for k, a in enumerate(edge_ids):
        for b in edge_ids[k + 1:]:
            bw, tx, rx = CHANNEL_RANGES["ee"]
            params = (draw(bw) * MBIT_S_TO_BIT_S, draw(tx) * UJ_TO_J, draw(rx) * UJ_TO_J)
            channels.append(Channel(a, b, *params))
            channels.append(Channel(b, a, *params))
    for a in edge_ids:
        make(a, "h1")
        make("h1", a)
    make("h1", "c1")
    make("c1", "h1")
    return build_system(devices, channels, CAPABILITY_UNIVERSE)


def _sample_exec_tables(system: SystemModel, rng: random.Random, exec_ms, power_w):
    """Reference execution time scaled down by each device's speedup; power
    drawn per device from the published range."""
    ref_ms = rng.uniform(*exec_ms)
    exec_time = {}
    exec_power = {}
    for device in system.devices:
        ratio = PERFORMANCE_RATIOS[device.id]
        power = rng.uniform(*power_w)
        for core in device.cores:
            exec_time[core.id] = (ref_ms / ratio) * MS_TO_S
            exec_power[core.id] = power
    return exec_time, exec_power


def real_world_workflow(system: SystemModel | None = None) -> TaskGraph:
    """The 16-task inspection workflow with published capabilities and
    thresholds; resource parameters are fixed-seed samples from the
    published ranges."""
    system = system or build_paper_system("C1")
    rng = random.Random(_REAL_WORLD_SEED)
    ranges = PARAMETER_RANGES
    tasks = []
    for task_id, cap, threshold in REAL_WORLD_TASKS:
        exec_time, exec_power = _sample_exec_tables(
            system, rng, ranges["exec_ms"], ranges["power_w"]
        )
        tasks.append(
            Task(
                id=task_id,
                memory=rng.uniform(*ranges["memory_mib"]) * MIB_TO_BYTES,
                storage=rng.uniform(*ranges["storage_mib"]) * MIB_TO_BYTES,
                output_data=rng.uniform(*ranges["output_mib"]) * MIB_TO_BITS,
                required_capability=cap,
                reliability_threshold=threshold,
                exec_time=exec_time,
                exec_power=exec_power,
            )
        )
    return TaskGraph(tuple(tasks), REAL_WORLD_ARCS)


def fig2_system() -> SystemModel:
    """Four-device system of the worked transformation example: two edge
    devices carrying capability 1, a hub, and a cloud server."""
    mids = {k: tuple(_mid(r) for r in v) for k, v in CHANNEL_RANGES.items()}
    lam = {tier: _mid(r) for tier, r in FAILURE_RATE_RANGES.items()}
    devices = [
        Device(
            "e1",
            (Core("e1.1", lam["e"]),),
            0.95 * GIB_TO_BYTES,
            1.0 * GIB_TO_BYTES,
            1.0 * WH_TO_J,
            frozenset({0, 1}),
        ),
        Device(
            "e2",
            (Core("e2.1", lam["e"]), Core("e2.2", lam["e"])),
            1.0 * GIB_TO_BYTES,
            1.5 * GIB_TO_BYTES,
            1.0 * WH_TO_J,
            frozenset({0, 1}),
        ),
        Device(
            "h1",
            (Core("h1.1", lam["h"]),),
            3.0 * GIB_TO_BYTES,
            5.0 * GIB_TO_BYTES,
            2.0 * WH_TO_J,
            frozenset({0, 6, 7}),
        ),
        Device(
            "c1",
            (Core("c1.1", lam["c"]),),
            4.0 * GIB_TO_BYTES,
            10.0 * GIB_TO_BYTES,
            10.0 * WH_TO_J,
            frozenset({0, 8, 9}),
        ),
    ]

    def chan(src, dst, kind):
        bw, tx, rx = mids[kind]
        return Channel(src, dst, bw * MBIT_S_TO_BIT_S, tx * UJ_TO_J, rx * UJ_TO_J)

    channels = [
        chan("e1", "e2", "ee"),
        chan("e2", "e1", "ee"),
        chan("e1", "h1", "eh"),
        chan("e2", "h1", "eh"),
        chan("h1", "e1", "he"),
        chan("h1", "e2", "he"),
        chan("h1", "c1", "hc"),
        chan("c1", "h1", "ch"),
    ]
    return build_system(devices, channels, CAPABILITY_UNIVERSE)


def fig2_workflow() -> TaskGraph:
    """Diamond of four tasks; only the entry task's slow allocation on the
    second edge device falls below its threshold, so exactly that task gains
    replica candidates."""
    mib = MIB_TO_BYTES

    def task(task_id, cap, threshold, exec_ms_by_core, power=2.0):
        return Task(
            id=task_id,
            memory=64.0 * mib,
            storage=64.0 * mib,
            output_data=2.0 * MIB_TO_BITS,
            required_capability=cap,
            reliability_threshold=threshold,
            exec_time={k: v * MS_TO_S for k, v in exec_ms_by_core.items()},
            exec_power={k: power for k in exec_ms_by_core},
        )

    all_cores = ("e1.1", "e2.1", "e2.2", "h1.1", "c1.1")
    tasks = (
        task(1, 1, 0.9999, {"e1.1": 100.0, "e2.1": 2000.0, "e2.2": 100.0}),
        task(2, 0, 0.99, {c: 1500.0 for c in all_cores}),
        task(3, 0, 0.99, {c: 2500.0 for c in all_cores}),
        task(4, 7, 0.999, {"h1.1": 500.0}),
    )
    return TaskGraph(tasks, ((1, 2), (1, 3), (2, 4), (3, 4)))


def fixtures() -> dict:
    """All encoded fixtures: the real-world workflow with its three system
    configurations, and the four-task worked example."""
    systems = {c: build_paper_system(c) for c in ("C1", "C2", "C3")}
    return {
        "real_world": {
            "workflow": real_world_workflow(systems["C1"]),
            "systems": systems,
        },
        "fig2": {"workflow": fig2_workflow(), "system": fig2_system()},
    }


@dataclass
class GenSpec:
    """Knobs for the synthetic workflow generator."""

    tasks: int
    degree: float = 1.45  # target average in/out arcs per node
    seed: int = 0
    config: str = "C1"
    root_probability: float = 0.1
    specialized_probability: float = 0.4  # intermediate tasks needing 4/6/8
    ranges: dict = field(default_factory=lambda: dict(PARAMETER_RANGES))

    def __post_init__(self):
        if self.tasks < 1:
            raise ValueError("task count must be >= 1")
        if self.degree <= 0:
            raise ValueError("degree must be positive")


def generate_instance(spec: GenSpec) -> tuple[SystemModel, TaskGraph]:
    """Seed-reproducible random instance under the reference system.

    The DAG is a rooted spine (guaranteeing acyclicity and entries/exits)
    plus uniformly drawn forward arcs until the arc target is met.  Entry
    tasks draw a sensor capability, exit tasks an actuator one, and
    intermediate tasks mostly need only basic computation.
    """
    rng = random.Random(spec.seed)
    system = build_paper_system(spec.config, rng)
    n = spec.tasks
    target_arcs = round(spec.degree * n)
    if target_arcs > n * (n - 1) // 2:
        raise UnsatisfiableSpecError(
            f"degree {spec.degree} needs {target_arcs} arcs; "
            f"a {n}-task DAG holds at most {n * (n - 1) // 2}"
        )

    arcs: set[tuple[int, int]] = set()
    for i in range(2, n + 1):
        if rng.random() < spec.root_probability:
            continue
        arcs.add((rng.randrange(1, i), i))
    attempts = 0
    while len(arcs) < target_arcs and attempts < 200 * max(target_arcs, 1):
        attempts += 1
        a = rng.randrange(1, n + 1)
        b = rng.randrange(1, n + 1)
        if a == b:
            continue
        arcs.add((min(a, b), max(a, b)))
    ordered_arcs = tuple(sorted(arcs))

    children: dict[int, int] = {i: 0 for i in range(1, n + 1)}
    parents: dict[int, int] = {i: 0 for i in range(1, n + 1)}
    for a, b in ordered_arcs:
        children[a] += 1
        parents[b] += 1

    ranges = spec.ranges
    tasks = []
    for i in range(1, n + 1):
        if children[i] == 0:
            cap = rng.choice(EXIT_CAPABILITIES)
        elif parents[i] == 0:
            cap = rng.choice(ENTRY_CAPABILITIES)
        elif rng.random() < spec.specialized_probability:
            cap = rng.choice(INTERMEDIATE_CAPABILITIES)
        else:
            cap = 0
        exec_time, exec_power = _sample_exec_tables(
            system, rng, ranges["exec_ms"], ranges["power_w"]
        )
        tasks.append(
            Task(
                id=i,
                memory=rng.uniform(*ranges["memory_mib"]) * MIB_TO_BYTES,
                storage=rng.uniform(*ranges["storage_mib"]) * MIB_TO_BYTES,
                output_data=rng.uniform(*ranges["output_mib"]) * MIB_TO_BITS,
                required_capability=cap,
                reliability_threshold=rng.uniform(*ranges["threshold"]),
                exec_time=exec_time,
                exec_power=exec_power,
            )
        )
    return system, TaskGraph(tuple(tasks), ordered_arcs)


def generate_tg(spec: GenSpec) -> TaskGraph:
    """Workflow half of generate_instance (same seed, same graph)."""
    return generate_instance(spec)[1]


def sweep_weights(step: float = 1.0 / 3.0) -> list[ObjectiveWeights]:
    """All weight triples on the simplex grid with the given spacing."""
    k = round(1.0 / step)
    if abs(k * step - 1.0) > 1e-9:
        raise ValueError(f"step {step!r} does not divide 1 evenly")
    out = []
    for a in range(k, -1, -1):
        for b in range(k - a, -1, -1):
            c = k - a - b
            out.append(ObjectiveWeights(a / k, b / k, c / k))
    return out
