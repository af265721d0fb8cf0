"""Canonical scenario data model: map elements, agents and their schedules.

The model is plain Python data (lists/tuples/floats) so that structural
equality and canonical serialization are exact; numpy-backed geometry caches
live in the engine's MapIndex, not here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

Point = tuple[float, float]

DEFAULT_TICK = 0.1  # 10 Hz, the rate reference routes are sampled at


class LaneType(str, Enum):
    DRIVING = "driving"
    BIKING = "biking"
    WALKING = "walking"


class AgentType(str, Enum):
    VEHICLE = "vehicle"
    PEDESTRIAN = "pedestrian"
    CYCLIST = "cyclist"


class SignalState(str, Enum):
    GREEN = "green"
    YELLOW = "yellow"
    RED = "red"


@dataclass
class Lane:
    """A lane centerline plus its connectivity links.

    `parent` is the id of the single road or junction that owns the lane.
    Neighbor links are lateral (same parent, adjacent centerline); the
    predecessor/successor links are longitudinal and directed.
    """

    id: int
    lane_type: LaneType
    centerline: list[Point]
    predecessors: list[int] = field(default_factory=list)
    successors: list[int] = field(default_factory=list)
    left_neighbor: int | None = None
    right_neighbor: int | None = None
    parent: int = -1
    max_speed: float = 16.7


@dataclass
class Road:
    id: int
    lane_ids: list[int]
    boundary: list[Point]  # simple polygon, implicitly closed


@dataclass
class SignalPhase:
    duration: float
    states: list[SignalState]  # one entry per controlled lane


@dataclass
class SignalProgram:
    controlled_lane_ids: list[int]
    phases: list[SignalPhase]

    def cycle_time(self) -> float:
        return sum(p.duration for p in self.phases)

    def state_at(self, lane_id: int, t: float) -> SignalState:
        idx = self.controlled_lane_ids.index(lane_id)
        cycle = self.cycle_time()
        t = t % cycle if cycle > 0 else 0.0
        for phase in self.phases:
            if t < phase.duration:
                return phase.states[idx]
            t -= phase.duration
        return self.phases[-1].states[idx]


@dataclass
class Junction:
    id: int
    lane_ids: list[int]
    boundary: list[Point]
    traffic_lights: list[SignalProgram] = field(default_factory=list)


@dataclass
class AgentAttributes:
    agent_type: AgentType
    length: float
    width: float


@dataclass
class AgentState:
    x: float
    y: float
    speed: float
    heading: float  # radians in (-pi, pi], CCW positive, 0 = +x

    @property
    def position(self) -> Point:
        return (self.x, self.y)


@dataclass
class Waypoint:
    position: Point
    arrival_time: float


@dataclass
class Schedule:
    """One trip: departure plus either a tick-sampled route, OD waypoints, or both.

    `reference_route[i]` is the state at `departure_time + i * tick`; the
    sampling tick is the owning scenario's tick.
    """

    departure_time: float
    reference_route: list[AgentState] = field(default_factory=list)
    waypoints: list[Waypoint] = field(default_factory=list)


@dataclass
class Agent:
    id: int
    attributes: AgentAttributes
    schedules: list[Schedule]

    @property
    def schedule(self) -> Schedule:
        return self.schedules[0]


@dataclass
class MapData:
    lanes: list[Lane] = field(default_factory=list)
    roads: list[Road] = field(default_factory=list)
    junctions: list[Junction] = field(default_factory=list)

    def lane_by_id(self) -> dict[int, Lane]:
        return {lane.id: lane for lane in self.lanes}

    def parent_by_id(self) -> dict[int, Road | Junction]:
        out: dict[int, Road | Junction] = {r.id: r for r in self.roads}
        out.update({j.id: j for j in self.junctions})
        return out


@dataclass
class Scenario:
    map: MapData
    agents: list[Agent] = field(default_factory=list)
    current_time: float = 0.0
    tick: float = DEFAULT_TICK

    def agent_by_id(self) -> dict[int, Agent]:
        return {a.id: a for a in self.agents}
