"""Mutable per-rollout state: agent runtimes, events, plan/route caches."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..geometry import Polyline
from ..scenario.model import AgentAttributes, AgentState, Scenario, SignalState


@dataclass(slots=True)
class AgentAction:
    acceleration: float
    steering: float

    def validate(self) -> None:
        if not (math.isfinite(self.acceleration) and math.isfinite(self.steering)):
            raise ValueError(f"non-finite action {self}")


@dataclass(slots=True)
class Event:
    time: float
    kind: str  # collision | offroad | arrival | departure
    agents: tuple[int, ...]

    def to_json(self) -> str:
        return json.dumps(
            {"time": round(self.time, 6), "type": self.kind, "agents": list(self.agents)},
            sort_keys=True,
        )


class RouteCache:
    """Reference route as flat arrays with exact-sample lookup.

    state_at(t) returns the stored row verbatim when t falls on the sample
    grid (replay must be bit-exact) and interpolates linearly otherwise.
    """

    __slots__ = ("depart", "tick", "xs", "ys", "speeds", "headings", "n", "_path")

    def __init__(self, states: list[AgentState], depart: float, tick: float):
        self.depart = depart
        self.tick = tick
        self.n = len(states)
        self.xs = np.array([s.x for s in states])
        self.ys = np.array([s.y for s in states])
        self.speeds = np.array([s.speed for s in states])
        self.headings = np.array([s.heading for s in states])
        self._path: Polyline | None = None

    @property
    def end_time(self) -> float:
        return self.depart + (self.n - 1) * self.tick

    @property
    def endpoint(self) -> tuple[float, float]:
        return float(self.xs[-1]), float(self.ys[-1])

    def covers(self, t: float) -> bool:
        return t <= self.end_time + 1e-9

    def state_at(self, t: float) -> AgentState:
        idx = (t - self.depart) / self.tick
        k = int(round(idx))
        if abs(idx - k) < 1e-6:
            k = min(max(k, 0), self.n - 1)
            return AgentState(
                float(self.xs[k]), float(self.ys[k]), float(self.speeds[k]), float(self.headings[k])
            )
        lo = min(max(int(math.floor(idx)), 0), self.n - 1)
        hi = min(lo + 1, self.n - 1)
        f = min(max(idx - lo, 0.0), 1.0)
        dh = math.remainder(self.headings[hi] - self.headings[lo], math.tau)
        heading = math.remainder(self.headings[lo] + f * dh, math.tau)
        if heading <= -math.pi:
            heading += math.tau
        return AgentState(
            float(self.xs[lo] + f * (self.xs[hi] - self.xs[lo])),
            float(self.ys[lo] + f * (self.ys[hi] - self.ys[lo])),
            float(self.speeds[lo] + f * (self.speeds[hi] - self.speeds[lo])),
            float(heading),
        )

    def path(self) -> Polyline | None:
        """Deduplicated position polyline (None when the route never moves)."""
        if self._path is None:
            pts = [(float(self.xs[0]), float(self.ys[0]))]
            for x, y in zip(self.xs[1:], self.ys[1:]):
                if abs(x - pts[-1][0]) > 1e-9 or abs(y - pts[-1][1]) > 1e-9:
                    pts.append((float(x), float(y)))
            self._path = Polyline(pts) if len(pts) >= 2 else None
        return self._path


class MotionPlanCache:
    """A generated motion plan plus its integrated path, consumed by policies."""

    __slots__ = ("speeds", "headings", "start_time", "tick", "path", "path_speeds", "arc")

    def __init__(self, plan: np.ndarray, initial: AgentState, start_time: float, tick: float):
        # plan: [T, 2] = (speed, heading) per future tick, world units
        self.speeds = plan[:, 0].astype(np.float64)
        self.headings = plan[:, 1].astype(np.float64)
        self.start_time = start_time
        self.tick = tick
        xs = [initial.x]
        ys = [initial.y]
        for v, h in zip(self.speeds, self.headings):
            xs.append(xs[-1] + v * math.cos(h) * tick)
            ys.append(ys[-1] + v * math.sin(h) * tick)
        pts = [(xs[0], ys[0])]
        arc = [0.0]
        speeds_on_path = [max(float(self.speeds[0]), 0.0)]
        for k in range(1, len(xs)):
            dx, dy = xs[k] - pts[-1][0], ys[k] - pts[-1][1]
            step = math.hypot(dx, dy)
            if step > 1e-9:
                pts.append((xs[k], ys[k]))
                arc.append(arc[-1] + step)
                speeds_on_path.append(
                    max(float(self.speeds[min(k, len(self.speeds) - 1)]), 0.0)
                )
        self.path = Polyline(pts) if len(pts) >= 2 else None
        self.arc = np.array(arc)
        self.path_speeds = np.array(speeds_on_path)

    def speed_at_arc(self, s: float) -> float:
        if self.path is None:
            return 0.0
        return float(np.interp(s, self.arc, self.path_speeds))

    @property
    def end_time(self) -> float:
        return self.start_time + len(self.speeds) * self.tick


@dataclass(slots=True)
class AgentRuntime:
    id: int
    attributes: AgentAttributes
    state: AgentState
    depart_time: float
    spawned: bool = False
    active: bool = False
    arrived: bool = False
    collided: bool = False
    offroad: bool = False
    route: RouteCache | None = None
    plan: MotionPlanCache | None = None
    dest: tuple[float, float] | None = None
    lane_id: int | None = None
    lane_s: float = 0.0
    lane_offset: float = 0.0
    lane_valid_step: int = -1  # step_count whose occupancy may trust lane_s
    lane_change: tuple[int, float] | None = None  # (target lane, seconds left)
    path_s: float = 0.0  # progress along the motion-plan path
    history: deque = field(default_factory=lambda: deque(maxlen=16))

    def record_history(self, t: float) -> None:
        self.history.append((t, self.state))


class WorldState:
    """Single-writer world advanced one tick at a time by the engine."""

    def __init__(self, scenario: Scenario, seed: int = 0):
        self.time = scenario.current_time
        self.tick = scenario.tick
        self.step_count = 0
        self.events: list[Event] = []
        self.signal_states: dict[int, SignalState] = {}
        self.pending_actions: dict[int, AgentAction] = {}
        self.rng = np.random.default_rng(seed)
        self.agents: dict[int, AgentRuntime] = {}
        for agent in scenario.agents:
            sched = agent.schedule
            route = (
                RouteCache(sched.reference_route, sched.departure_time, scenario.tick)
                if sched.reference_route
                else None
            )
            if route is not None:
                initial = route.state_at(sched.departure_time)
                dest = route.endpoint if route.n >= 2 else None
            elif sched.waypoints:
                pos = sched.waypoints[0].position
                initial = AgentState(pos[0], pos[1], 0.0, 0.0)
                # a trip goal needs a waypoint beyond the origin
                dest = sched.waypoints[-1].position if len(sched.waypoints) >= 2 else None
            else:
                initial = AgentState(0.0, 0.0, 0.0, 0.0)
                dest = None
            self.agents[agent.id] = AgentRuntime(
                id=agent.id,
                attributes=agent.attributes,
                state=initial,
                depart_time=sched.departure_time,
                route=route,
                dest=dest,
            )
        self.agent_order = sorted(self.agents)

    def active_ids(self) -> list[int]:
        return [i for i in self.agent_order if self.agents[i].active]

    def log(self, kind: str, agents: tuple[int, ...]) -> None:
        self.events.append(Event(self.time, kind, agents))

    def inject_action(self, agent_id: int, action: AgentAction) -> None:
        action.validate()
        agent = self.agents.get(agent_id)
        if agent is None or not agent.active:
            raise ValueError(f"agent {agent_id} is not active")
        self.pending_actions[agent_id] = action

    def events_ndjson(self) -> str:
        return "\n".join(e.to_json() for e in self.events) + ("\n" if self.events else "")
