"""Invariant checks over a Scenario. Violations are data, not exceptions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import geometry
from .model import Junction, LaneType, Road, Scenario


@dataclass
class Violation:
    element: str  # e.g. "lane 7", "agent 3"
    rule: str
    detail: str = ""

    def __str__(self) -> str:
        msg = f"{self.element}: {self.rule}"
        return f"{msg} ({self.detail})" if self.detail else msg


def validate(scenario: Scenario) -> list[Violation]:
    out: list[Violation] = []
    m = scenario.map
    lane_ids = {lane.id for lane in m.lanes}
    container_ids = {r.id for r in m.roads} | {j.id for j in m.junctions}

    if scenario.tick <= 0:
        out.append(Violation("scenario", "nonpositive-tick", f"tick={scenario.tick}"))

    for lane in m.lanes:
        el = f"lane {lane.id}"
        if len(lane.centerline) < 2:
            out.append(Violation(el, "short-centerline", f"{len(lane.centerline)} points"))
        else:
            for a, b in zip(lane.centerline, lane.centerline[1:]):
                if a == b:
                    out.append(Violation(el, "repeated-centerline-point", f"at {a}"))
                    break
        for ref in lane.predecessors:
            if ref not in lane_ids:
                out.append(Violation(el, "dangling-predecessor", f"id {ref}"))
        for ref in lane.successors:
            if ref not in lane_ids:
                out.append(Violation(el, "dangling-successor", f"id {ref}"))
        for ref in (lane.left_neighbor, lane.right_neighbor):
            if ref is not None and ref not in lane_ids:
                out.append(Violation(el, "dangling-neighbor", f"id {ref}"))
        if lane.parent not in container_ids:
            out.append(Violation(el, "dangling-parent", f"id {lane.parent}"))
        if lane.max_speed <= 0:
            out.append(Violation(el, "nonpositive-speed-limit", f"{lane.max_speed}"))

    # parent uniqueness: each lane listed by exactly the container it names
    listed_in: dict[int, list[int]] = {}
    for container in [*m.roads, *m.junctions]:
        for lid in container.lane_ids:
            listed_in.setdefault(lid, []).append(container.id)
    for lid, owners in sorted(listed_in.items()):
        if len(owners) > 1:
            out.append(Violation(f"lane {lid}", "multiple-parents", f"roads/junctions {owners}"))
        if lid not in lane_ids:
            out.append(Violation(f"lane {lid}", "unknown-listed-lane", f"listed by {owners}"))
    lane_map = {lane.id: lane for lane in m.lanes}
    for container in [*m.roads, *m.junctions]:
        kind = "road" if isinstance(container, Road) else "junction"
        el = f"{kind} {container.id}"
        for lid in container.lane_ids:
            lane = lane_map.get(lid)
            if lane is not None and lane.parent != container.id:
                out.append(
                    Violation(el, "parent-mismatch", f"lane {lid} names parent {lane.parent}")
                )
        if len(container.boundary) < 3 or not geometry.polygon_is_simple(
            np.asarray(container.boundary)
        ):
            out.append(Violation(el, "nonsimple-boundary"))

    for junction in m.junctions:
        el = f"junction {junction.id}"
        inside = set(junction.lane_ids)
        for prog in junction.traffic_lights:
            for lid in prog.controlled_lane_ids:
                if lid not in inside:
                    out.append(Violation(el, "signal-foreign-lane", f"lane {lid}"))
            for k, phase in enumerate(prog.phases):
                if phase.duration <= 0:
                    out.append(Violation(el, "signal-bad-duration", f"phase {k}"))
                if len(phase.states) != len(prog.controlled_lane_ids):
                    out.append(Violation(el, "signal-state-length", f"phase {k}"))

    seen_agents: set[int] = set()
    for agent in scenario.agents:
        el = f"agent {agent.id}"
        if agent.id in seen_agents:
            out.append(Violation(el, "duplicate-agent-id"))
        seen_agents.add(agent.id)
        if agent.attributes.length <= 0 or agent.attributes.width <= 0:
            out.append(Violation(el, "nonpositive-shape"))
        for schedule in agent.schedules:
            for i, st in enumerate(schedule.reference_route):
                if st.speed < 0:
                    out.append(Violation(el, "negative-speed", f"route step {i}"))
                    break
            for i, st in enumerate(schedule.reference_route):
                if not (-math.pi < st.heading <= math.pi):
                    out.append(Violation(el, "unnormalized-heading", f"route step {i}"))
                    break
            times = [w.arrival_time for w in schedule.waypoints]
            if any(b < a for a, b in zip(times, times[1:])):
                out.append(Violation(el, "nonmonotonic-waypoints"))

    return out


def is_driving(lane) -> bool:
    return lane.lane_type == LaneType.DRIVING


__all__ = ["Violation", "validate", "is_driving"]
