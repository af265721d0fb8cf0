"""The discrete-time engine: prepare observations, apply policies, log events."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..policies.bicycle import bicycle_step
from ..policies.control import make_policy
from ..policies.params import BicycleParams
from ..scenario.model import AgentState, Scenario
from .collision import detect_collisions
from .map_index import MapIndex
from .observation import Observation, build_observations
from .world import AgentAction, MotionPlanCache, WorldState


class ConfigurationError(ValueError):
    pass


@dataclass
class EngineConfig:
    neighbor_radius: float = 50.0
    arrival_radius: float = 2.5
    collision_mode: str = "continue"  # or "freeze"
    check_collisions: bool = True
    check_offroad: bool = True
    deactivate_on_arrival: bool = True
    # defer a departure while its spawn point is blocked by an active agent
    # (closed-loop mode; replay keeps exact departure times)
    spawn_gating: bool = False
    bicycle: BicycleParams | None = None


class Engine:
    """Advances one world, one tick per step (single-writer).

    `assignment` maps agent id to a policy name or policy object; unassigned
    agents use `default_policy`. Unknown names fail here, before any
    simulation state exists.
    """

    def __init__(
        self,
        scenario: Scenario,
        assignment: dict[int, object] | None = None,
        default_policy: str = "expert",
        config: EngineConfig | None = None,
        seed: int = 0,
        map_index: MapIndex | None = None,
    ):
        self.scenario = scenario
        self.config = config or EngineConfig()
        self.index = map_index or MapIndex(scenario.map)
        self.world = WorldState(scenario, seed=seed)
        self.embeddings: dict[int, np.ndarray] | None = None
        self._bicycle = self.config.bicycle or BicycleParams()
        self.policies: dict[int, object] = {}
        shared: dict[str, object] = {}

        def resolve(spec):
            if isinstance(spec, str):
                if spec not in shared:
                    try:
                        shared[spec] = make_policy(spec)
                    except ValueError as e:
                        raise ConfigurationError(str(e)) from None
                return shared[spec]
            if not hasattr(spec, "act") or not hasattr(spec, "kind"):
                raise ConfigurationError(f"not a policy: {spec!r}")
            return spec

        assignment = assignment or {}
        known = {a.id for a in scenario.agents}
        for aid in assignment:
            if aid not in known:
                raise ConfigurationError(f"policy assigned to unknown agent {aid}")
        for agent in scenario.agents:
            self.policies[agent.id] = resolve(assignment.get(agent.id, default_policy))

        self._recording: list | None = None
        self._record_lanes: list | None = None

    def _spawn_blocked(self, rt) -> bool:
        x, y = rt.state.x, rt.state.y
        for aid in self.world.agent_order:
            other = self.world.agents[aid]
            if not other.active or aid == rt.id:
                continue
            ost = other.state
            dx, dy = x - ost.x, y - ost.y
            half = 0.5 * (rt.attributes.length + other.attributes.length)
            if dx * dx + dy * dy < (half + 1.0) ** 2:
                return True
            # don't drop a stopped vehicle inside someone's braking envelope
            ahead = dx * math.cos(ost.heading) + dy * math.sin(ost.heading)
            lateral = abs(-dx * math.sin(ost.heading) + dy * math.cos(ost.heading))
            if 0.0 <= ahead and lateral < 2.5:
                if ahead < ost.speed**2 / 7.0 + half + 3.0:
                    return True
        return False

    # -- plan / action injection --------------------------------------------

    def assign_plan(self, agent_id: int, plan: np.ndarray) -> None:
        rt = self.world.agents[agent_id]
        rt.plan = MotionPlanCache(np.asarray(plan, dtype=np.float64), rt.state, self.world.time, self.world.tick)
        rt.path_s = 0.0

    def inject_action(self, agent_id: int, accel: float, steer: float) -> None:
        self.world.inject_action(agent_id, AgentAction(accel, steer))

    # -- stepping -------------------------------------------------------------

    def activate_departures(self) -> None:
        """Spawn agents whose departure time has arrived (idempotent)."""
        world = self.world
        t = world.time
        for aid in world.agent_order:
            rt = world.agents[aid]
            if not rt.spawned and rt.depart_time <= t + 1e-9:
                if self.config.spawn_gating and self._spawn_blocked(rt):
                    continue
                rt.spawned = True
                rt.active = True
                rt.record_history(t)
                world.log("departure", (aid,))

    def step(self) -> WorldState:
        world = self.world
        cfg = self.config
        t = world.time
        tick = world.tick

        self.activate_departures()

        world.signal_states = self.index.signal_states_at(t)

        # prepare stage
        observations = build_observations(world, self.index, cfg.neighbor_radius, self.embeddings)

        # update stage
        active = world.active_ids()
        for aid in active:
            rt = world.agents[aid]
            if rt.collided and cfg.collision_mode == "freeze":
                rt.state = AgentState(rt.state.x, rt.state.y, 0.0, rt.state.heading)
                rt.record_history(t + tick)
                continue
            policy = self.policies[aid]
            result = policy.act(observations[aid])
            if result is None:
                if not getattr(policy, "proximity_arrival", True):
                    rt.arrived = True  # input exhausted == trip complete
                rt.state = AgentState(rt.state.x, rt.state.y, 0.0, rt.state.heading)
            elif policy.kind == "state":
                rt.state = result
            else:
                result.validate()
                rt.state = bicycle_step(
                    rt.state,
                    result.acceleration,
                    result.steering,
                    self._bicycle,
                    tick,
                    rt.attributes.length,
                )
                rt.lane_id = None  # cache invalid after free-form motion
            rt.record_history(t + tick)

        # post-update bookkeeping happens at the new time
        world.time = t + tick

        # arrivals
        r2 = cfg.arrival_radius**2
        for aid in active:
            rt = world.agents[aid]
            if not rt.active:
                continue
            proximity_ok = getattr(self.policies[aid], "proximity_arrival", True)
            if not rt.arrived and proximity_ok and rt.dest is not None:
                dx = rt.state.x - rt.dest[0]
                dy = rt.state.y - rt.dest[1]
                if dx * dx + dy * dy <= r2:
                    rt.arrived = True
            if rt.arrived:
                world.log("arrival", (aid,))
                if cfg.deactivate_on_arrival:
                    rt.active = False

        # events: collisions then off-road, over post-update states
        active = world.active_ids()
        if cfg.check_collisions and len(active) > 1:
            states = [world.agents[a].state for a in active]
            attrs = [world.agents[a].attributes for a in active]
            for i, j in detect_collisions(states, attrs):
                a, b = active[i], active[j]
                world.log("collision", (a, b))
                world.agents[a].collided = True
                world.agents[b].collided = True
                if cfg.collision_mode == "freeze":
                    for k in (a, b):
                        st = world.agents[k].state
                        world.agents[k].state = AgentState(st.x, st.y, 0.0, st.heading)
        if cfg.check_offroad:
            for aid in active:
                rt = world.agents[aid]
                if not self.index.contains(rt.state.x, rt.state.y):
                    rt.offroad = True
                    world.log("offroad", (aid,))

        world.step_count += 1
        if self._recording is not None:
            self._capture()
        return world

    def run(self, duration: float) -> WorldState:
        steps = int(round(duration / self.world.tick))
        for _ in range(steps):
            self.step()
        return self.world

    # -- recording ------------------------------------------------------------

    def start_recording(self) -> None:
        self._recording = []
        self._record_lanes = []
        self._capture()

    def _capture(self) -> None:
        row = []
        lanes = []
        for aid in self.world.agent_order:
            rt = self.world.agents[aid]
            st = rt.state
            row.append((st.x, st.y, st.speed, st.heading, 1.0 if rt.active else 0.0))
            lanes.append(rt.lane_id if rt.lane_id is not None else -1)
        self._recording.append(row)
        self._record_lanes.append(lanes)

    def finish_recording(self):
        from ..records import RolloutRecord

        agent_ids = list(self.world.agent_order)
        data = np.array(self._recording, dtype=np.float64).reshape(
            len(self._recording), len(agent_ids), 5
        )
        refs = {}
        departs = {}
        for agent in self.scenario.agents:
            sched = agent.schedule
            if sched.reference_route:
                refs[agent.id] = np.array(
                    [(s.x, s.y, s.speed, s.heading) for s in sched.reference_route]
                )
                departs[agent.id] = sched.departure_time
        record = RolloutRecord(
            tick=self.world.tick,
            start_time=self.scenario.current_time,
            agent_ids=agent_ids,
            states=data[:, :, :4],
            active=data[:, :, 4] > 0.5,
            lane_ids=np.array(self._record_lanes, dtype=np.int64).reshape(
                len(self._record_lanes), len(agent_ids)
            ),
            lengths=np.array([self.world.agents[a].attributes.length for a in agent_ids]),
            widths=np.array([self.world.agents[a].attributes.width for a in agent_ids]),
            events=list(self.world.events),
            references=refs,
            ref_departs=departs,
            waypoints={
                a.id: [(w.position[0], w.position[1], w.arrival_time) for w in a.schedule.waypoints]
                for a in self.scenario.agents
                if a.schedule.waypoints
            },
        )
        self._recording = None
        self._record_lanes = None
        return record


def step(world_engine: Engine) -> WorldState:
    """Functional alias: advance the engine's world by one tick."""
    return world_engine.step()


__all__ = ["Engine", "EngineConfig", "ConfigurationError", "Observation", "step"]
