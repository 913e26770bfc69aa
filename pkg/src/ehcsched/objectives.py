"""Objective normalization bounds shared by the exact, heuristic, and
brute-force schedulers and by the independent schedule checker.

Using one set of bounds everywhere keeps weighted-sum goal values directly
comparable across methods.  The bounds are structural: cheap to compute,
valid for every feasible schedule, and monotone, which preserves the argmin
of the scalarized goal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import ObjectiveWeights
from .transform import Etag

DEGENERATE_EPS = 1e-12


@dataclass(frozen=True)
class ObjectiveBounds:
    latency: tuple[float, float]
    energy: tuple[float, float]
    reliability: tuple[float, float]  # bounds on the log-reliability sum

    def degenerate(self) -> tuple[str, ...]:
        out = []
        for name, (lo, hi) in (
            ("latency", self.latency),
            ("energy", self.energy),
            ("reliability", self.reliability),
        ):
            if hi - lo <= DEGENERATE_EPS:
                out.append(name)
        return tuple(out)


def _min_exec_critical_path(etag: Etag) -> float:
    """Longest workflow path using per-task minimum execution times and
    per-arc minimum transfer times; a valid lower bound on any makespan."""
    tg = etag.workflow
    min_L = {t: min(n.exec_time for n in etag.primary[t]) for t in tg.task_ids}
    min_CL = {
        key: min(a.comm_latency for a in bundle) for key, bundle in etag.arcs.items()
    }
    best: dict[int, float] = {}
    for t in reversed(tg.topological_order()):
        tail = 0.0
        for c in tg.children(t):
            tail = max(tail, min_CL[(t, c)] + best[c])
        best[t] = min_L[t] + tail
    return max(best[t] for t in tg.entry_tasks())


def objective_bounds(etag: Etag, deadline: float) -> ObjectiveBounds:
    """Structural (min, max) intervals for the three objectives.

    Latency: [minimum-execution critical path, deadline] (the completion-time
    variable never exceeds the deadline).  Energy: node terms range between
    the per-task cheapest primary and the per-task dearest primary plus
    dearest replica where replicas exist; arc terms account for the up-to
    2x2 selected copy pairs per workflow arc.  Log-reliability: per-task
    extremes over all admissible allocation contributions.
    """
    tg = etag.workflow
    lat_lo = _min_exec_critical_path(etag)
    lat_hi = deadline

    en_lo = 0.0
    en_hi = 0.0
    for t in tg.task_ids:
        prim = etag.primary[t]
        en_lo += min(n.exec_energy for n in prim)
        en_hi += max(n.exec_energy for n in prim)
        if etag.replica[t]:
            en_hi += max(n.exec_energy for n in etag.replica[t])
    for (i, j), bundle in etag.arcs.items():
        copies_i = 2 if etag.replica[i] else 1
        copies_j = 2 if etag.replica[j] else 1
        en_hi += copies_i * copies_j * max(a.comm_energy for a in bundle)

    rel_lo = 0.0
    rel_hi = 0.0
    for t in tg.task_ids:
        terms = []
        for p in etag.primary[t]:
            if p.needs_duplication:
                terms.extend(
                    math.log(etag.total_reliability_of(p.key, r.key))
                    for r in etag.replica[t]
                )
            else:
                terms.append(math.log(p.reliability))
        rel_lo += min(terms)
        rel_hi += max(terms)

    return ObjectiveBounds(
        latency=(lat_lo, lat_hi), energy=(en_lo, en_hi), reliability=(rel_lo, rel_hi)
    )


def normalize(value: float, bounds: tuple[float, float]) -> float:
    """Min-max rescaling; a degenerate interval maps to 0."""
    lo, hi = bounds
    if hi - lo <= DEGENERATE_EPS:
        return 0.0
    return (value - lo) / (hi - lo)


def scalarize(
    f_lat: float,
    f_en: float,
    f_rel: float,
    weights: ObjectiveWeights,
    bounds: ObjectiveBounds,
) -> float:
    """Weighted sum of normalized latency and energy minus normalized
    log-reliability (reliability is maximized)."""
    return (
        weights.latency * normalize(f_lat, bounds.latency)
        + weights.energy * normalize(f_en, bounds.energy)
        - weights.reliability * normalize(f_rel, bounds.reliability)
    )
