"""Synthetic scenario generators: signalized Manhattan grids and straight roads.

Junction grids are rows x cols signalized intersections joined by two-way
roads, with stub approaches on the outer boundary so every junction has four
approaches. Agents receive origin/destination waypoints only; reference
routes are completed by the lane router.
"""

from __future__ import annotations

import math
import random

from .model import (
    Agent,
    AgentAttributes,
    AgentType,
    Junction,
    Lane,
    LaneType,
    MapData,
    Road,
    Scenario,
    Schedule,
    SignalPhase,
    SignalProgram,
    SignalState,
    Waypoint,
)

LANE_WIDTH = 3.5
ROAD_SPEED = 60.0 / 3.6  # m/s
CONNECTOR_SPEED = 30.0 / 3.6
GREEN_TIME = 25.0
LEFT_GREEN_TIME = 8.0
YELLOW_TIME = 3.0
MIN_ROAD_LEN = 20.0
LEFT_ARC_BIAS = 2.0  # m, keeps simultaneous opposing left turns clear of each other

# unit vectors for the four approach headings
_DIRS = {"E": (1.0, 0.0), "N": (0.0, 1.0), "W": (-1.0, 0.0), "S": (0.0, -1.0)}
_LEFT_OF = {"E": "N", "N": "W", "W": "S", "S": "E"}
_RIGHT_OF = {"E": "S", "S": "W", "W": "N", "N": "E"}
_OPPOSITE = {"E": "W", "W": "E", "N": "S", "S": "N"}


def _right_vec(d: str) -> tuple[float, float]:
    ux, uy = _DIRS[d]
    return (uy, -ux)


class _Bundle:
    """Directed group of parallel lanes on one road, innermost first."""

    def __init__(self, lane_ids: list[int]):
        self.lane_ids = lane_ids


def _bezier_turn(start, control, end, n: int = 9) -> list[tuple[float, float]]:
    pts = []
    for i in range(n):
        t = i / (n - 1)
        x = (1 - t) ** 2 * start[0] + 2 * (1 - t) * t * control[0] + t**2 * end[0]
        y = (1 - t) ** 2 * start[1] + 2 * (1 - t) * t * control[1] + t**2 * end[1]
        pts.append((x, y))
    return pts


def _semicircle_turn(start, end, toward, n: int = 9) -> list[tuple[float, float]]:
    """Half-circle from start to end bulging toward the given point (U-turns)."""
    cx, cy = 0.5 * (start[0] + end[0]), 0.5 * (start[1] + end[1])
    radius = 0.5 * math.hypot(end[0] - start[0], end[1] - start[1])
    a0 = math.atan2(start[1] - cy, start[0] - cx)
    pts_by_sign = {}
    for sign in (1.0, -1.0):
        mid = (cx + radius * math.cos(a0 + sign * 0.5 * math.pi),
               cy + radius * math.sin(a0 + sign * 0.5 * math.pi))
        d2 = (mid[0] - toward[0]) ** 2 + (mid[1] - toward[1]) ** 2
        pts_by_sign[sign] = d2
    sign = min(pts_by_sign, key=pts_by_sign.get)
    return [
        (cx + radius * math.cos(a0 + sign * math.pi * i / (n - 1)),
         cy + radius * math.sin(a0 + sign * math.pi * i / (n - 1)))
        for i in range(n)
    ]


def generate_grid(
    rows: int,
    cols: int,
    block_len: float,
    lanes_per_road: int,
    n_agents: int,
    seed: int,
) -> Scenario:
    """Build a rows x cols signalized junction grid with n_agents OD trips."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    if n_agents < 0:
        raise ValueError("n_agents must be >= 0")
    if lanes_per_road < 1:
        raise ValueError("lanes_per_road must be >= 1")
    w = LANE_WIDTH
    half = lanes_per_road * w + 1.0  # junction half-extent
    if block_len - 2 * half < MIN_ROAD_LEN:
        raise ValueError(
            f"block_len {block_len} too small for {lanes_per_road} lanes per road"
            f" (junction extent {2 * half:.1f} m)"
        )

    rng = random.Random(seed)
    next_id = [1]

    def new_id() -> int:
        next_id[0] += 1
        return next_id[0] - 1

    lanes: dict[int, Lane] = {}
    roads: list[Road] = []
    junctions: list[Junction] = []

    junction_ids: dict[tuple[int, int], int] = {}
    centers: dict[tuple[int, int], tuple[float, float]] = {}
    for r in range(rows):
        for c in range(cols):
            junction_ids[(r, c)] = new_id()
            centers[(r, c)] = (c * block_len, r * block_len)

    # per junction, per heading: the incoming / outgoing lane bundles
    incoming: dict[tuple[int, str], _Bundle] = {}
    outgoing: dict[tuple[int, str], _Bundle] = {}

    def add_bundle(road_id: int, a, b, d: str) -> _Bundle:
        """Lanes from a to b travelling along heading d, offset to the right."""
        rx, ry = _right_vec(d)
        ids = []
        for k in range(lanes_per_road):
            off = 0.5 * w + k * w
            lid = new_id()
            lanes[lid] = Lane(
                id=lid,
                lane_type=LaneType.DRIVING,
                centerline=[(a[0] + off * rx, a[1] + off * ry), (b[0] + off * rx, b[1] + off * ry)],
                parent=road_id,
                max_speed=ROAD_SPEED,
            )
            ids.append(lid)
        for i, lid in enumerate(ids):
            if i > 0:
                lanes[lid].left_neighbor = ids[i - 1]
            if i + 1 < len(ids):
                lanes[lid].right_neighbor = ids[i + 1]
        return _Bundle(ids)

    def add_road(a, b, axis_dir: str, j_a: int | None, j_b: int | None) -> None:
        """Two-way road from a to b (b is toward axis_dir); j_a/j_b are end junctions."""
        road_id = new_id()
        fwd = add_bundle(road_id, a, b, axis_dir)
        rev = add_bundle(road_id, b, a, _OPPOSITE[axis_dir])
        if j_b is not None:
            incoming[(j_b, axis_dir)] = fwd
        if j_a is not None:
            outgoing[(j_a, axis_dir)] = fwd
        if j_a is not None:
            incoming[(j_a, _OPPOSITE[axis_dir])] = rev
        if j_b is not None:
            outgoing[(j_b, _OPPOSITE[axis_dir])] = rev
        hw = lanes_per_road * w
        rx, ry = _right_vec(axis_dir)
        boundary = [
            (a[0] + hw * rx, a[1] + hw * ry),
            (b[0] + hw * rx, b[1] + hw * ry),
            (b[0] - hw * rx, b[1] - hw * ry),
            (a[0] - hw * rx, a[1] - hw * ry),
        ]
        roads.append(
            Road(
                id=road_id,
                lane_ids=fwd.lane_ids + rev.lane_ids,
                boundary=boundary,
            )
        )

    # internal roads between adjacent junctions
    for r in range(rows):
        for c in range(cols):
            cx, cy = centers[(r, c)]
            if c + 1 < cols:
                add_road(
                    (cx + half, cy),
                    (cx + block_len - half, cy),
                    "E",
                    junction_ids[(r, c)],
                    junction_ids[(r, c + 1)],
                )
            if r + 1 < rows:
                add_road(
                    (cx, cy + half),
                    (cx, cy + block_len - half),
                    "N",
                    junction_ids[(r, c)],
                    junction_ids[(r + 1, c)],
                )

    # boundary stubs so every junction has four approaches; outbound stub
    # lanes are graph sinks and inbound stub lanes are sources, so track them
    # to keep generated OD pairs routable
    outbound_stub: set[int] = set()
    inbound_stub: set[int] = set()
    for r in range(rows):
        for c in range(cols):
            jid = junction_ids[(r, c)]
            cx, cy = centers[(r, c)]
            for d in ("E", "N", "W", "S"):
                if (jid, d) in outgoing:  # a road already occupies this side
                    continue
                ux, uy = _DIRS[d]
                edge = (cx + half * ux, cy + half * uy)
                outer = (cx + block_len * ux, cy + block_len * uy)
                # the stub's forward bundle travels outward (direction d)
                add_road(edge, outer, d, jid, None)
                outbound_stub.update(outgoing[(jid, d)].lane_ids)
                inbound_stub.update(incoming[(jid, _OPPOSITE[d])].lane_ids)

    # junction connectors and signals
    for r in range(rows):
        for c in range(cols):
            jid = junction_ids[(r, c)]
            cx, cy = centers[(r, c)]
            all_connector_ids: list[int] = []
            connector_ids: list[int] = []  # signal-controlled subset
            connector_group: list[str] = []  # NS / NSL / EW / EWL movement group
            for d in ("E", "N", "W", "S"):
                inc = incoming.get((jid, d))
                if inc is None:
                    continue
                moves: list[tuple[int, str]] = []  # (incoming lane index, turn)
                last = lanes_per_road - 1
                for k in range(lanes_per_road):
                    moves.append((k, "straight"))
                moves.append((0, "left"))
                moves.append((last, "right"))
                moves.append((0, "uturn"))  # keeps every OD pair routable
                for k, turn in moves:
                    if turn == "straight":
                        out_dir, out_k = d, k
                    elif turn == "left":
                        out_dir, out_k = _LEFT_OF[d], 0
                    elif turn == "uturn":
                        out_dir, out_k = _OPPOSITE[d], 0
                    else:
                        out_dir, out_k = _RIGHT_OF[d], lanes_per_road - 1
                    outb = outgoing.get((jid, out_dir))
                    if outb is None:
                        continue
                    in_lane = lanes[inc.lane_ids[k]]
                    out_lane = lanes[outb.lane_ids[out_k]]
                    start = in_lane.centerline[-1]
                    end = out_lane.centerline[0]
                    if turn == "straight":
                        pts = [start, end]
                    elif turn == "uturn":
                        pts = _semicircle_turn(start, end, (cx, cy))
                    else:
                        dx_in = _DIRS[d]
                        control = (
                            (end[0], start[1]) if abs(dx_in[0]) > 0 else (start[0], end[1])
                        )
                        if turn == "left":
                            # bias the apex outward so opposing protected
                            # lefts pass with body-width clearance
                            control = (
                                control[0] + math.copysign(LEFT_ARC_BIAS, control[0] - cx),
                                control[1] + math.copysign(LEFT_ARC_BIAS, control[1] - cy),
                            )
                        pts = _bezier_turn(start, control, end)
                    lid = new_id()
                    lanes[lid] = Lane(
                        id=lid,
                        lane_type=LaneType.DRIVING,
                        centerline=pts,
                        predecessors=[in_lane.id],
                        successors=[out_lane.id],
                        parent=jid,
                        max_speed=CONNECTOR_SPEED,
                    )
                    in_lane.successors.append(lid)
                    out_lane.predecessors.append(lid)
                    all_connector_ids.append(lid)
                    if turn != "uturn":  # U-turns are uncontrolled yield moves
                        axis = "EW" if d in ("E", "W") else "NS"
                        connector_ids.append(lid)
                        connector_group.append(axis + ("L" if turn == "left" else ""))

            # protected-left cycle: NS through, NS left, EW through, EW left
            phases = []
            for green_group, duration in (
                ("NS", GREEN_TIME),
                ("NSL", LEFT_GREEN_TIME),
                ("EW", GREEN_TIME),
                ("EWL", LEFT_GREEN_TIME),
            ):
                phases.append(
                    SignalPhase(
                        duration=duration,
                        states=[
                            SignalState.GREEN if g == green_group else SignalState.RED
                            for g in connector_group
                        ],
                    )
                )
                phases.append(
                    SignalPhase(
                        duration=YELLOW_TIME,
                        states=[
                            SignalState.YELLOW if g == green_group else SignalState.RED
                            for g in connector_group
                        ],
                    )
                )
            programs = (
                [SignalProgram(controlled_lane_ids=connector_ids, phases=phases)]
                if connector_ids
                else []
            )
            junctions.append(
                Junction(
                    id=jid,
                    lane_ids=all_connector_ids,
                    boundary=[
                        (cx - half, cy - half),
                        (cx + half, cy - half),
                        (cx + half, cy + half),
                        (cx - half, cy + half),
                    ],
                    traffic_lights=programs,
                )
            )

    scenario = Scenario(
        map=MapData(lanes=sorted(lanes.values(), key=lambda x: x.id), roads=roads, junctions=junctions)
    )
    _populate_agents(scenario, n_agents, rng, outbound_stub, inbound_stub)
    return scenario


def _populate_agents(
    scenario: Scenario,
    n_agents: int,
    rng: random.Random,
    outbound_stub: set[int],
    inbound_stub: set[int],
) -> None:
    road_lane_ids = sorted(lid for road in scenario.map.roads for lid in road.lane_ids)
    origin_pool = [lid for lid in road_lane_ids if lid not in outbound_stub]
    dest_pool = [lid for lid in road_lane_ids if lid not in inbound_stub]
    lane_map = scenario.map.lane_by_id()
    parent_of = {lid: lane_map[lid].parent for lid in road_lane_ids}

    def lane_point(lid: int, frac: float) -> tuple[float, float]:
        a, b = lane_map[lid].centerline[0], lane_map[lid].centerline[-1]
        return (a[0] + frac * (b[0] - a[0]), a[1] + frac * (b[1] - a[1]))

    for i in range(n_agents):
        origin = rng.choice(origin_pool)
        dest = rng.choice(dest_pool)
        tries = 0
        while parent_of[dest] == parent_of[origin] and tries < 32:
            dest = rng.choice(dest_pool)
            tries += 1
        o_pos = lane_point(origin, rng.uniform(0.1, 0.5))
        d_pos = lane_point(dest, rng.uniform(0.5, 0.9))
        depart = 0.1 * rng.randrange(0, 100)
        crow = math.hypot(d_pos[0] - o_pos[0], d_pos[1] - o_pos[1])
        eta = depart + max(10.0, 2.0 * crow / ROAD_SPEED)
        scenario.agents.append(
            Agent(
                id=i,
                attributes=AgentAttributes(
                    agent_type=AgentType.VEHICLE,
                    length=round(rng.uniform(4.2, 5.2), 2),
                    width=round(rng.uniform(1.8, 2.1), 2),
                ),
                schedules=[
                    Schedule(
                        departure_time=depart,
                        reference_route=[],
                        waypoints=[Waypoint(o_pos, depart), Waypoint(d_pos, eta)],
                    )
                ],
            )
        )


def generate_straight(
    length: float = 500.0,
    lanes: int = 1,
    max_speed: float = ROAD_SPEED,
    two_way: bool = False,
) -> Scenario:
    """Single straight road along +x starting at the origin; no agents."""
    w = LANE_WIDTH
    lane_objs: list[Lane] = []
    next_id = 2
    fwd_ids = []
    for k in range(lanes):
        # lanes stacked southward of the road axis (right-hand travel along +x)
        y = -(0.5 * w + k * w)
        lane_objs.append(
            Lane(
                id=next_id,
                lane_type=LaneType.DRIVING,
                centerline=[(0.0, y), (length, y)],
                parent=1,
                max_speed=max_speed,
            )
        )
        fwd_ids.append(next_id)
        next_id += 1
    for i, lid in enumerate(fwd_ids):
        if i > 0:
            lane_objs[i].left_neighbor = fwd_ids[i - 1]
        if i + 1 < len(fwd_ids):
            lane_objs[i].right_neighbor = fwd_ids[i + 1]
    if two_way:
        rev_ids = []
        for k in range(lanes):
            y = 0.5 * w + k * w
            lane_objs.append(
                Lane(
                    id=next_id,
                    lane_type=LaneType.DRIVING,
                    centerline=[(length, y), (0.0, y)],
                    parent=1,
                    max_speed=max_speed,
                )
            )
            rev_ids.append(next_id)
            next_id += 1
        for i, lid in enumerate(rev_ids):
            if i > 0:
                lane_objs[lanes + i].left_neighbor = rev_ids[i - 1]
            if i + 1 < len(rev_ids):
                lane_objs[lanes + i].right_neighbor = rev_ids[i + 1]
    lo = -lanes * w
    hi = lanes * w if two_way else 0.0
    road = Road(
        id=1,
        lane_ids=[ln.id for ln in lane_objs],
        boundary=[(0.0, lo), (length, lo), (length, hi), (0.0, hi)],
    )
    return Scenario(map=MapData(lanes=lane_objs, roads=[road], junctions=[]))
