"""Canonical scenario serialization: `.lcs.json` (lane-centric scenario JSON).

The encoding is deterministic: object keys are emitted sorted, floats use the
shortest round-trip decimal form, and the layout is fixed, so two saves of an
equal scenario are byte-identical.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .model import (
    Agent,
    AgentAttributes,
    AgentState,
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
from .validate import validate

FORMAT_VERSION = 1
FILE_SUFFIX = ".lcs.json"


class ParseError(ValueError):
    """Malformed input; carries the byte offset / path where decoding failed."""

    def __init__(self, message: str, *, offset: int | None = None, path: str = ""):
        loc = []
        if path:
            loc.append(f"at {path}")
        if offset is not None:
            loc.append(f"offset {offset}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.offset = offset
        self.path = path


class SchemaVersionError(ParseError):
    """Input parses as JSON but declares an unsupported format_version."""


def save(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_bytes(saves(scenario))


def saves(scenario: Scenario) -> bytes:
    violations = validate(scenario)
    if violations:
        raise ValueError(
            "refusing to save invalid scenario: " + "; ".join(str(v) for v in violations[:5])
        )
    doc = _scenario_to_dict(scenario)
    return (json.dumps(doc, sort_keys=True, indent=1) + "\n").encode("utf-8")


def load(path: str | Path) -> Scenario:
    return loads(Path(path).read_bytes())


def loads(data: bytes | str) -> Scenario:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, offset=e.pos) from e
    return _scenario_from_dict(doc)


# ---------------------------------------------------------------------------
# encoding


def _state_row(st: AgentState) -> list[float]:
    return [st.x, st.y, st.speed, st.heading]


def _scenario_to_dict(s: Scenario) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "current_time": s.current_time,
        "tick": s.tick,
        "map": {
            "lanes": [
                {
                    "id": ln.id,
                    "lane_type": ln.lane_type.value,
                    "centerline": [list(p) for p in ln.centerline],
                    "predecessors": ln.predecessors,
                    "successors": ln.successors,
                    "left_neighbor": ln.left_neighbor,
                    "right_neighbor": ln.right_neighbor,
                    "parent": ln.parent,
                    "max_speed": ln.max_speed,
                }
                for ln in sorted(s.map.lanes, key=lambda x: x.id)
            ],
            "roads": [
                {
                    "id": r.id,
                    "lane_ids": r.lane_ids,
                    "boundary": [list(p) for p in r.boundary],
                }
                for r in sorted(s.map.roads, key=lambda x: x.id)
            ],
            "junctions": [
                {
                    "id": j.id,
                    "lane_ids": j.lane_ids,
                    "boundary": [list(p) for p in j.boundary],
                    "traffic_lights": [
                        {
                            "controlled_lane_ids": prog.controlled_lane_ids,
                            "phases": [
                                {
                                    "duration": ph.duration,
                                    "states": [st.value for st in ph.states],
                                }
                                for ph in prog.phases
                            ],
                        }
                        for prog in j.traffic_lights
                    ],
                }
                for j in sorted(s.map.junctions, key=lambda x: x.id)
            ],
        },
        "agents": [
            {
                "id": a.id,
                "attributes": {
                    "agent_type": a.attributes.agent_type.value,
                    "length": a.attributes.length,
                    "width": a.attributes.width,
                },
                "schedules": [
                    {
                        "departure_time": sc.departure_time,
                        "reference_route": [_state_row(st) for st in sc.reference_route],
                        "waypoints": [
                            {"position": list(w.position), "arrival_time": w.arrival_time}
                            for w in sc.waypoints
                        ],
                    }
                    for sc in a.schedules
                ],
            }
            for a in sorted(s.agents, key=lambda x: x.id)
        ],
    }


# ---------------------------------------------------------------------------
# decoding (hand-rolled so errors report the JSON path of the offending field)


def _expect(doc, key, kind, path):
    if not isinstance(doc, dict):
        raise ParseError(f"expected object, got {type(doc).__name__}", path=path)
    if key not in doc:
        raise ParseError(f"missing key '{key}'", path=path)
    val = doc[key]
    if kind is float:
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise ParseError(f"'{key}' must be a number", path=path)
        return float(val)
    if not isinstance(val, kind):
        raise ParseError(f"'{key}' must be {kind.__name__}", path=path)
    return val


def _opt_int(doc, key, path):
    val = doc.get(key)
    if val is None:
        return None
    if not isinstance(val, int):
        raise ParseError(f"'{key}' must be an integer or null", path=path)
    return val


def _point(val, path) -> tuple[float, float]:
    if not isinstance(val, list) or len(val) != 2:
        raise ParseError("point must be [x, y]", path=path)
    return (float(val[0]), float(val[1]))


def _enum(cls, val, path):
    try:
        return cls(val)
    except ValueError:
        raise ParseError(f"invalid {cls.__name__} value {val!r}", path=path) from None


def _scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ParseError("top-level document must be an object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise SchemaVersionError(
            f"unsupported format_version {version!r} (expected {FORMAT_VERSION})"
        )
    tick = _expect(doc, "tick", float, "$")
    mp = _expect(doc, "map", dict, "$")

    lanes = []
    for i, lo in enumerate(_expect(mp, "lanes", list, "$.map")):
        p = f"$.map.lanes[{i}]"
        lanes.append(
            Lane(
                id=_expect(lo, "id", int, p),
                lane_type=_enum(LaneType, _expect(lo, "lane_type", str, p), p),
                centerline=[_point(v, p) for v in _expect(lo, "centerline", list, p)],
                predecessors=list(_expect(lo, "predecessors", list, p)),
                successors=list(_expect(lo, "successors", list, p)),
                left_neighbor=_opt_int(lo, "left_neighbor", p),
                right_neighbor=_opt_int(lo, "right_neighbor", p),
                parent=_expect(lo, "parent", int, p),
                max_speed=_expect(lo, "max_speed", float, p),
            )
        )
    roads = []
    for i, ro in enumerate(_expect(mp, "roads", list, "$.map")):
        p = f"$.map.roads[{i}]"
        roads.append(
            Road(
                id=_expect(ro, "id", int, p),
                lane_ids=list(_expect(ro, "lane_ids", list, p)),
                boundary=[_point(v, p) for v in _expect(ro, "boundary", list, p)],
            )
        )
    junctions = []
    for i, jo in enumerate(_expect(mp, "junctions", list, "$.map")):
        p = f"$.map.junctions[{i}]"
        programs = []
        for k, po in enumerate(_expect(jo, "traffic_lights", list, p)):
            pp = f"{p}.traffic_lights[{k}]"
            phases = [
                SignalPhase(
                    duration=_expect(ph, "duration", float, pp),
                    states=[_enum(SignalState, sv, pp) for sv in _expect(ph, "states", list, pp)],
                )
                for ph in _expect(po, "phases", list, pp)
            ]
            programs.append(
                SignalProgram(
                    controlled_lane_ids=list(_expect(po, "controlled_lane_ids", list, pp)),
                    phases=phases,
                )
            )
        junctions.append(
            Junction(
                id=_expect(jo, "id", int, p),
                lane_ids=list(_expect(jo, "lane_ids", list, p)),
                boundary=[_point(v, p) for v in _expect(jo, "boundary", list, p)],
                traffic_lights=programs,
            )
        )

    agents = []
    for i, ao in enumerate(doc.get("agents", [])):
        p = f"$.agents[{i}]"
        attrs = _expect(ao, "attributes", dict, p)
        schedules = []
        for k, so in enumerate(_expect(ao, "schedules", list, p)):
            sp = f"{p}.schedules[{k}]"
            route = []
            for r, row in enumerate(_expect(so, "reference_route", list, sp)):
                if not isinstance(row, list) or len(row) != 4:
                    raise ParseError(
                        "route state must be [x, y, speed, heading]", path=f"{sp}[{r}]"
                    )
                route.append(
                    AgentState(float(row[0]), float(row[1]), float(row[2]), float(row[3]))
                )
            waypoints = [
                Waypoint(
                    position=_point(_expect(w, "position", list, sp), sp),
                    arrival_time=_expect(w, "arrival_time", float, sp),
                )
                for w in _expect(so, "waypoints", list, sp)
            ]
            interval = so.get("sample_interval")
            if interval is not None and not math.isclose(float(interval), tick):
                route = _resample_route(route, float(interval), tick)
            schedules.append(
                Schedule(
                    departure_time=_expect(so, "departure_time", float, sp),
                    reference_route=route,
                    waypoints=waypoints,
                )
            )
        agents.append(
            Agent(
                id=_expect(ao, "id", int, p),
                attributes=AgentAttributes(
                    agent_type=_enum(AgentType, _expect(attrs, "agent_type", str, p), p),
                    length=_expect(attrs, "length", float, p),
                    width=_expect(attrs, "width", float, p),
                ),
                schedules=schedules,
            )
        )

    return Scenario(
        map=MapData(lanes=lanes, roads=roads, junctions=junctions),
        agents=agents,
        current_time=_expect(doc, "current_time", float, "$"),
        tick=tick,
    )


def _resample_route(route: list[AgentState], interval: float, tick: float) -> list[AgentState]:
    """Linear resampling of a route recorded at a foreign interval onto the tick grid."""
    if len(route) < 2:
        return list(route)
    duration = (len(route) - 1) * interval
    n = int(math.floor(duration / tick + 1e-9))
    out = []
    for k in range(n + 1):
        t = k * tick
        j = min(int(t / interval), len(route) - 2)
        frac = (t - j * interval) / interval
        a, b = route[j], route[j + 1]
        dh = math.remainder(b.heading - a.heading, math.tau)
        heading = math.remainder(a.heading + frac * dh, math.tau)
        if heading <= -math.pi:
            heading += math.tau
        out.append(
            AgentState(
                x=a.x + frac * (b.x - a.x),
                y=a.y + frac * (b.y - a.y),
                speed=a.speed + frac * (b.speed - a.speed),
                heading=heading,
            )
        )
    return out
