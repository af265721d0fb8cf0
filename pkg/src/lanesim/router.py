"""Directed lane graph, A* routing, and OD-to-reference-route completion.

Edge costs are traversal times: entering a lane costs its length divided by
its speed limit; hopping to a lateral neighbor costs a fixed lane-change
penalty. Equal-cost routes tie-break to the lexicographically smallest lane
id sequence.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Polyline
from .scenario.model import AgentState, LaneType, MapData, Scenario, Waypoint

LANE_CHANGE_PENALTY = 5.0  # seconds of equivalent cost per lateral hop
REF_ACCEL = 2.0  # m/s^2, reference-route speed profile
LANE_CHANGE_RAMP = 30.0  # m, diagonal blend length for lateral hops


class NoPath(Exception):
    """Destination unreachable from origin in the lane graph."""


@dataclass
class LaneGraph:
    nodes: list[int]
    edges: dict[int, list[tuple[int, float, bool]]]  # lane -> [(to, cost, lateral)]
    geoms: dict[int, Polyline]
    max_speeds: dict[int, float]
    effective_max_speed: float = field(default=1.0)

    def neighbors(self, lane_id: int):
        return self.edges.get(lane_id, ())


def build_graph(map_data: MapData, lane_change_penalty: float = LANE_CHANGE_PENALTY) -> LaneGraph:
    lanes = [ln for ln in map_data.lanes if ln.lane_type == LaneType.DRIVING]
    lanes.sort(key=lambda ln: ln.id)
    ids = {ln.id for ln in lanes}
    geoms = {ln.id: Polyline(ln.centerline) for ln in lanes}
    max_speeds = {ln.id: ln.max_speed for ln in lanes}
    edges: dict[int, list[tuple[int, float, bool]]] = {ln.id: [] for ln in lanes}
    max_gap = 0.0
    for ln in lanes:
        for succ in sorted(ln.successors):
            if succ in ids:
                edges[ln.id].append((succ, geoms[succ].length / max_speeds[succ], False))
        for nb in (ln.left_neighbor, ln.right_neighbor):
            if nb is not None and nb in ids:
                edges[ln.id].append((nb, lane_change_penalty, True))
                gap = float(
                    np.hypot(*(geoms[nb].pts[0] - geoms[ln.id].pts[0]))
                )
                max_gap = max(max_gap, gap)
    # admissible heuristic speed: covers both driving and lateral hops
    top_speed = max(max_speeds.values(), default=1.0)
    effective = max(top_speed, max_gap / lane_change_penalty if lane_change_penalty > 0 else 0.0)
    return LaneGraph(
        nodes=[ln.id for ln in lanes],
        edges=edges,
        geoms=geoms,
        max_speeds=max_speeds,
        effective_max_speed=effective,
    )


def route(
    graph: LaneGraph,
    origin: tuple[int, float],
    dest: tuple[int, float],
) -> list[int]:
    """Minimal-cost lane sequence from origin (lane, s) to dest (lane, s)."""
    o_lane, _ = origin
    d_lane, d_s = dest
    for lid in (o_lane, d_lane):
        if lid not in graph.geoms:
            raise NoPath(f"lane {lid} not in graph")
    if o_lane == d_lane:
        return [o_lane]

    goal = np.array(graph.geoms[d_lane].point_at(graph.geoms[d_lane].length))
    v_eff = graph.effective_max_speed

    def h(lane_id: int) -> float:
        end = graph.geoms[lane_id].pts[-1]
        return float(np.hypot(*(end - goal))) / v_eff

    # heap entries: (f, path, g, node); equal-f ties pop the smaller lane
    # id sequence first, which settles each node with its lexicographic
    # minimum among minimum-cost paths
    start = (h(o_lane), (o_lane,), 0.0, o_lane)
    heap = [start]
    settled: set[int] = set()
    best: dict[int, tuple[float, tuple[int, ...]]] = {o_lane: (0.0, (o_lane,))}
    while heap:
        f, path, g, node = heapq.heappop(heap)
        if node in settled:
            continue
        settled.add(node)
        if node == d_lane:
            return list(path)
        for nxt, cost, _lateral in graph.neighbors(node):
            if nxt in settled:
                continue
            g2 = g + cost
            path2 = path + (nxt,)
            known = best.get(nxt)
            if known is not None and (known[0] < g2 or (known[0] == g2 and known[1] <= path2)):
                continue
            best[nxt] = (g2, path2)
            heapq.heappush(heap, (g2 + h(nxt), path2, g2, nxt))
    raise NoPath(f"no route from lane {o_lane} to lane {d_lane}")


# ---------------------------------------------------------------------------
# route expansion


def route_geometry(
    graph: LaneGraph,
    lane_seq: list[int],
    origin_s: float = 0.0,
    dest_s: float | None = None,
) -> tuple[Polyline, list[tuple[int, float]]]:
    """Concatenate lane centerlines into one polyline.

    Returns the composite polyline and (lane_id, start_arc_length) entries.
    Lateral (neighbor) hops become a diagonal ramp onto the target
    centerline. Raises ValueError when consecutive lanes are unconnected.
    """
    if not lane_seq:
        raise ValueError("empty route")
    pts: list[tuple[float, float]] = []
    entries: list[tuple[int, float]] = []

    def append(points) -> None:
        for p in points:
            tp = (float(p[0]), float(p[1]))
            if not pts or (abs(tp[0] - pts[-1][0]) > 1e-9 or abs(tp[1] - pts[-1][1]) > 1e-9):
                pts.append(tp)

    def arc_so_far() -> float:
        total = 0.0
        for a, b in zip(pts, pts[1:]):
            total += math.hypot(b[0] - a[0], b[1] - a[1])
        return total

    first_geom = graph.geoms[lane_seq[0]]
    cursor_s = min(max(origin_s, 0.0), first_geom.length)
    entries.append((lane_seq[0], 0.0))
    if len(lane_seq) == 1:
        end_s = first_geom.length if dest_s is None else min(max(dest_s, cursor_s), first_geom.length)
        append(_slice_polyline(first_geom, cursor_s, end_s))
        return _compose(pts, first_geom, cursor_s), entries

    append(_slice_polyline(first_geom, cursor_s, first_geom.length))
    prev = lane_seq[0]
    for idx, lid in enumerate(lane_seq[1:], start=1):
        edge = next((e for e in graph.neighbors(prev) if e[0] == lid), None)
        if edge is None:
            raise ValueError(f"route lanes {prev} -> {lid} are not connected")
        geom = graph.geoms[lid]
        last_lane = idx == len(lane_seq) - 1
        end_s = geom.length if not last_lane or dest_s is None else min(max(dest_s, 0.0), geom.length)
        if edge[2]:  # lateral hop: ramp diagonally onto the neighbor
            here = pts[-1] if pts else tuple(first_geom.pts[0])
            s_here, _ = geom.project(here)
            s_join = min(s_here + LANE_CHANGE_RAMP, geom.length, end_s if last_lane else geom.length)
            entries.append((lid, arc_so_far()))
            append(_slice_polyline(geom, s_join, end_s))
        else:
            entries.append((lid, arc_so_far()))
            append(_slice_polyline(geom, 0.0, end_s))
        prev = lid
    return _compose(pts, first_geom, cursor_s), entries


def _compose(pts, first_geom, cursor_s) -> Polyline:
    if len(pts) >= 2:
        return Polyline(pts)
    # zero-length route: synthesize a stub segment along the lane tangent
    x, y, heading = first_geom.pose_at(cursor_s)
    return Polyline([(x, y), (x + 1e-9 * math.cos(heading), y + 1e-9 * math.sin(heading))])


def _slice_polyline(geom: Polyline, s0: float, s1: float):
    if s1 - s0 < 1e-12:
        return [geom.point_at(s0)]
    i0 = int(np.searchsorted(geom.cum_s, s0, side="right"))
    i1 = int(np.searchsorted(geom.cum_s, s1, side="left"))
    out = [geom.point_at(s0)]
    out.extend(tuple(p) for p in geom.pts[i0:i1])
    out.append(geom.point_at(s1))
    return out


@dataclass
class ExpandedRoute:
    states: list[AgentState]
    lane_entry_times: list[tuple[int, float]]  # (lane_id, absolute entry time)
    lane_speed_profile: list[tuple[float, float]]  # (start s, cap) per lane


def expand_route(
    graph: LaneGraph,
    lane_seq: list[int],
    depart_time: float,
    target_speed: float,
    tick: float,
    origin_s: float = 0.0,
    dest_s: float | None = None,
    accel: float = REF_ACCEL,
) -> list[AgentState]:
    return expand_route_full(
        graph, lane_seq, depart_time, target_speed, tick, origin_s, dest_s, accel
    ).states


def expand_route_full(
    graph: LaneGraph,
    lane_seq: list[int],
    depart_time: float,
    target_speed: float,
    tick: float,
    origin_s: float = 0.0,
    dest_s: float | None = None,
    accel: float = REF_ACCEL,
) -> ExpandedRoute:
    """Trapezoidal speed profile along the route, sampled at the tick.

    Accelerates at `accel` toward min(target_speed, lane cap), brakes at the
    same rate to stop exactly at the route end; headings follow the tangent.
    """
    composite, entries = route_geometry(graph, lane_seq, origin_s, dest_s)
    total = composite.length
    caps = [(s_off, min(target_speed, graph.max_speeds[lid])) for lid, s_off in entries]

    def cap_at(s: float) -> float:
        cap = caps[0][1]
        for s_off, c in caps:
            if s >= s_off - 1e-9:
                cap = c
        return cap

    if total <= 1e-6:
        x, y, heading = composite.pose_at(0.0)
        return ExpandedRoute(
            states=[AgentState(x, y, 0.0, _norm(heading))],
            lane_entry_times=[(lane_seq[0], depart_time)],
            lane_speed_profile=caps,
        )

    states: list[AgentState] = []
    entry_times: dict[int, float] = {}
    s, v, t = 0.0, 0.0, depart_time
    entry_idx = 0
    while True:
        x, y, heading = composite.pose_at(s)
        states.append(AgentState(x, y, v, _norm(heading)))
        while entry_idx < len(entries) and s >= entries[entry_idx][1] - 1e-9:
            entry_times.setdefault(entries[entry_idx][0], t)
            entry_idx += 1
        if s >= total - 1e-9:
            break
        # braking cap solved against the end-of-interval position so the
        # discrete profile tracks v(s) = sqrt(2 a (L - s)) without overshoot
        adt = accel * tick
        rhs = 2.0 * accel * (total - s) - adt * v
        v_brake = 0.0 if rhs <= 0.0 else 0.5 * (-adt + math.sqrt(adt * adt + 4.0 * rhs))
        v_next = min(v + adt, cap_at(s), v_brake)
        s = min(s + 0.5 * (v + v_next) * tick, total)
        v = v_next if s < total - 1e-9 else 0.0
        t += tick
        if len(states) > 500000:
            raise RuntimeError("route expansion did not terminate")
    if states[-1].speed != 0.0:
        states[-1] = AgentState(states[-1].x, states[-1].y, 0.0, states[-1].heading)
    ordered = [(lid, entry_times.get(lid, t)) for lid, _ in entries]
    return ExpandedRoute(states=states, lane_entry_times=ordered, lane_speed_profile=caps)


def _norm(theta: float) -> float:
    theta = math.remainder(theta, math.tau)
    if theta <= -math.pi:
        theta += math.tau
    return theta


# ---------------------------------------------------------------------------
# scenario completion


def nearest_driving_lane(
    map_data: MapData, point: tuple[float, float], road_only: bool = False
) -> tuple[int, float]:
    """(lane_id, s) of the closest driving-lane centerline point."""
    road_ids = {lid for r in map_data.roads for lid in r.lane_ids}
    best: tuple[float, int, float] | None = None
    for lane in map_data.lanes:
        if lane.lane_type != LaneType.DRIVING:
            continue
        if road_only and lane.id not in road_ids:
            continue
        s, d = Polyline(lane.centerline).project(point)
        key = (abs(d), lane.id, s)
        if best is None or key < (best[0], best[1], best[2]):
            best = (abs(d), lane.id, s)
    if best is None:
        raise ValueError("map has no driving lanes")
    return best[1], best[2]


def complete_routes(
    scenario: Scenario,
    target_speed: float = 15.0,
    agent_ids: list[int] | None = None,
    graph: LaneGraph | None = None,
) -> list[int]:
    """Fill empty reference routes from OD waypoints; returns completed agent ids.

    Waypoints are rewritten to ground truth: departure point, one waypoint per
    junction-connector entry, and the destination with its reference arrival
    time (the series-of-trips form the arrival metrics consume).
    """
    graph = graph or build_graph(scenario.map)
    junction_lane_ids = {lid for j in scenario.map.junctions for lid in j.lane_ids}
    done = []
    wanted = set(agent_ids) if agent_ids is not None else None
    for agent in scenario.agents:
        if wanted is not None and agent.id not in wanted:
            continue
        sched = agent.schedule
        if sched.reference_route or len(sched.waypoints) < 2:
            continue
        o_lane, o_s = nearest_driving_lane(scenario.map, sched.waypoints[0].position)
        d_lane, d_s = nearest_driving_lane(scenario.map, sched.waypoints[-1].position)
        lane_seq = route(graph, (o_lane, o_s), (d_lane, d_s))
        expanded = expand_route_full(
            graph, lane_seq, sched.departure_time, target_speed, scenario.tick, o_s, d_s
        )
        sched.reference_route = expanded.states
        end_time = sched.departure_time + (len(expanded.states) - 1) * scenario.tick
        waypoints = [Waypoint(expanded.states[0].position, sched.departure_time)]
        for lid, t_entry in expanded.lane_entry_times:
            if lid in junction_lane_ids:
                pose = graph.geoms[lid].pts[0]
                waypoints.append(Waypoint((float(pose[0]), float(pose[1])), t_entry))
        waypoints.append(Waypoint(expanded.states[-1].position, end_time))
        sched.waypoints = waypoints
        done.append(agent.id)
    return done
