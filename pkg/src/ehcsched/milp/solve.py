"""External solver driver and solution decoding.

The solver is any executable reachable through a command template with
``{lp}``, ``{sol}``, and ``{timelimit}`` placeholders; the default template
points at the bundled runner.  Solutions are exchanged through files in
either ``name value`` line format (with ``# status`` / ``# objective``
headers) or an equivalent JSON object.
"""

from __future__ import annotations

import json
import os
import shlex
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from typing import Optional

from ..schedule import Schedule, TaskAssignment
from ..transform import Etag
from ..validator import finalize_schedule
from .lpformat import export_lp
from .model import BINARY, MilpModel, unmangle_node

SOLVER_CMD_ENV = "EHCSCHED_SOLVER_CMD"
BINARY_INTEGRALITY_TOL = 1e-5


class SolverNotFoundError(Exception):
    def __init__(self, command: str):
        super().__init__(f"solver-not-found: {command}")
        self.code = "solver-not-found"


class SolverCrashedError(Exception):
    def __init__(self, command: str, output: str):
        super().__init__(f"solver-crashed: {command}\n{output}")
        self.code = "solver-crashed"
        self.output = output


class InconsistentSolutionError(Exception):
    def __init__(self, detail: str):
        super().__init__(f"inconsistent-solution: {detail}")
        self.code = "inconsistent-solution"


@dataclass
class Solution:
    status: str  # optimal | feasible | infeasible | timeout | unbounded | error
    assignment: dict[str, float] = field(default_factory=dict)
    objective: Optional[float] = None
    wall_time: float = 0.0


def default_command(feasibility_focus: bool = False) -> str:
    template = os.environ.get(SOLVER_CMD_ENV)
    if template:
        return template
    cmd = f"{sys.executable} -m ehcsched.milp.runner {{lp}} {{sol}} {{timelimit}}"
    if feasibility_focus:
        cmd += " --feasibility-focus"
    return cmd


@dataclass
class SolverConfig:
    command: Optional[str] = None  # template with {lp} {sol} {timelimit}
    time_limit: float = 300.0
    feasibility_focus: bool = False
    keep_files: Optional[str] = None  # directory to keep lp/sol artifacts in

    def resolved_command(self) -> str:
        return self.command or default_command(self.feasibility_focus)


def parse_solution_text(text: str) -> Solution:
    """Accepts the line format written by the bundled runner or a JSON
    object {"status": ..., "objective": ..., "variables": {...}}."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        obj = json.loads(stripped)
        return Solution(
            status=obj["status"],
            assignment={k: float(v) for k, v in obj.get("variables", {}).items()},
            objective=None if obj.get("objective") is None else float(obj["objective"]),
        )
    status = "error"
    objective = None
    assignment: dict[str, float] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) >= 2 and parts[0] == "status":
                status = parts[1]
            elif len(parts) >= 2 and parts[0] == "objective":
                objective = float(parts[1])
            continue
        parts = line.split()
        if len(parts) == 2:
            assignment[parts[0]] = float(parts[1])
    return Solution(status=status, assignment=assignment, objective=objective)


def solve(model: MilpModel, config: Optional[SolverConfig] = None) -> Solution:
    """Export the model, invoke the external solver, parse its solution.

    The subprocess gets the configured wall-clock limit plus a grace period;
    an expired grace period yields a timeout status rather than an error.
    """
    config = config or SolverConfig()
    template = config.resolved_command()
    workdir = config.keep_files
    ctx = tempfile.TemporaryDirectory() if workdir is None else None
    base = workdir if workdir is not None else ctx.name
    try:
        os.makedirs(base, exist_ok=True)
        lp_path = os.path.join(base, "model.lp")
        sol_path = os.path.join(base, "model.sol")
        with open(lp_path, "w", encoding="utf-8") as fh:
            fh.write(export_lp(model))
        argv = [
            tok.format(lp=lp_path, sol=sol_path, timelimit=config.time_limit)
            for tok in shlex.split(template)
        ]
        started = time.monotonic()
        try:
            proc = subprocess.run(
                argv,
                capture_output=True,
                text=True,
                timeout=config.time_limit + 60.0,
            )
        except FileNotFoundError:
            raise SolverNotFoundError(argv[0])
        except subprocess.TimeoutExpired:
            return Solution(status="timeout", wall_time=time.monotonic() - started)
        elapsed = time.monotonic() - started
        if proc.returncode != 0:
            raise SolverCrashedError(
                " ".join(argv), (proc.stdout or "") + (proc.stderr or "")
            )
        if not os.path.exists(sol_path):
            raise SolverCrashedError(" ".join(argv), "no solution file produced")
        with open(sol_path, "r", encoding="utf-8") as fh:
            solution = parse_solution_text(fh.read())
        solution.wall_time = elapsed
        return solution
    finally:
        if ctx is not None:
            ctx.cleanup()


def extract_schedule(solution: Solution, etag: Etag, model: MilpModel) -> Schedule:
    """Decode a feasible solution into a schedule and cross-check it.

    Binaries are rounded at 0.5 after an integrality sanity check; the
    selection structure is verified against the one-primary and
    replica-count rules; the makespan snaps to the latest finish time; and
    the goal recomputed from the schedule must match the solver objective
    to 1e-6, else the solution is declared inconsistent.
    """
    if solution.status not in ("optimal", "feasible"):
        raise ValueError(f"cannot extract schedule from status {solution.status!r}")
    values = solution.assignment
    for v in model.variables:
        if v.kind != BINARY:
            continue
        x = values.get(v.name, 0.0)
        if min(abs(x), abs(x - 1.0)) > BINARY_INTEGRALITY_TOL:
            raise InconsistentSolutionError(f"{v.name} = {x} is not integral")

    selected: dict[int, dict[int, list[str]]] = {}
    for name, meta in model.var_meta.items():
        if meta[0] != "node":
            continue
        if values.get(name, 0.0) > 0.5:
            key = meta[1]
            task, copy, _ = _parse_key(key)
            selected.setdefault(task, {1: [], 2: []})[copy].append(key)

    tg = etag.workflow
    assignments: dict[int, TaskAssignment] = {}
    for t in tg.task_ids:
        picks = selected.get(t, {1: [], 2: []})
        if len(picks[1]) != 1:
            raise InconsistentSolutionError(
                f"task {t} has {len(picks[1])} selected primaries"
            )
        primary = picks[1][0]
        dup = etag.node(primary).needs_duplication
        if dup and len(picks[2]) != 1:
            raise InconsistentSolutionError(
                f"task {t} duplicates but has {len(picks[2])} replicas"
            )
        if not dup and picks[2]:
            raise InconsistentSolutionError(
                f"task {t} does not duplicate but selects a replica"
            )
        replica = picks[2][0] if dup else None
        t_primary = values.get(f"t_{t}_1", 0.0)
        t_replica = values.get(f"t_{t}_2", 0.0) if replica else None
        assignments[t] = TaskAssignment(primary, replica, t_primary, t_replica)

    makespan = 0.0
    for t, a in assignments.items():
        makespan = max(makespan, a.start_primary + etag.node(a.primary).exec_time)
        if a.replica:
            makespan = max(makespan, a.start_replica + etag.node(a.replica).exec_time)

    schedule = Schedule(
        assignments=assignments,
        makespan=makespan,
        deadline=model.deadline,
        weights=model.weights,
        method="milp",
    )
    finalize_schedule(schedule, etag)
    if solution.objective is not None and abs(schedule.goal - solution.objective) > 1e-6:
        raise InconsistentSolutionError(
            f"recomputed goal {schedule.goal!r} != solver objective {solution.objective!r}"
        )
    return schedule


def _parse_key(key: str) -> tuple[int, int, str]:
    head, core = key.split("@")
    task, copy = head.split(".")
    return int(task), int(copy), core
