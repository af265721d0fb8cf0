"""Per-step observation assembly (the prepare stage of a tick)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..scenario.model import SignalState
from .map_index import MapIndex
from .world import AgentRuntime, WorldState


class SceneView:
    """Read-only slice of one step, shared by all observations of that step.

    Lane occupancy is built lazily on first access: replay-style policies
    never pay for it.
    """

    __slots__ = ("world", "map", "time", "tick", "_occupancy", "_active_ids")

    def __init__(self, world: WorldState, map_index: MapIndex, active_ids: list[int]):
        self.world = world
        self.map = map_index
        self.time = world.time
        self.tick = world.tick
        self._occupancy: dict[int, list[tuple[float, int]]] | None = None
        self._active_ids = active_ids

    def runtime(self, agent_id: int) -> AgentRuntime:
        return self.world.agents[agent_id]

    def signal(self, lane_id: int) -> SignalState | None:
        return self.world.signal_states.get(lane_id)

    @property
    def occupancy(self) -> dict[int, list[tuple[float, int]]]:
        """lane id -> [(s, agent id)] sorted by s, for all active agents."""
        if self._occupancy is None:
            occ: dict[int, list[tuple[float, int]]] = {}
            step = self.world.step_count
            for aid in self._active_ids:
                rt = self.world.agents[aid]
                lid = rt.lane_id
                if lid is None or lid not in self.map.lanes or rt.lane_valid_step != step:
                    st = rt.state
                    lid = self.map.current_lane(st.x, st.y, st.heading)
                    if lid is None:
                        rt.lane_id = None
                        continue
                    rt.lane_id = lid
                    rt.lane_s = self.map.lanes[lid].geom.project((st.x, st.y))[0]
                    rt.lane_valid_step = step
                occ.setdefault(lid, []).append((rt.lane_s, aid))
            for rows in occ.values():
                rows.sort()
            self._occupancy = occ
        return self._occupancy


@dataclass(slots=True)
class Observation:
    """What one agent sees during the prepare stage."""

    agent: AgentRuntime
    neighbors: list[int]  # active agent ids within the neighbor radius
    view: SceneView
    embedding: np.ndarray | None = None

    @property
    def state(self):
        return self.agent.state

    @property
    def route(self):
        return self.agent.route

    @property
    def plan(self):
        return self.agent.plan


def build_observations(
    world: WorldState,
    map_index: MapIndex,
    neighbor_radius: float,
    embeddings: dict[int, np.ndarray] | None = None,
) -> dict[int, Observation]:
    active = world.active_ids()
    view = SceneView(world, map_index, active)
    out: dict[int, Observation] = {}
    if not active:
        return out
    pos = np.array([(world.agents[a].state.x, world.agents[a].state.y) for a in active])
    diff = pos[:, None, :] - pos[None, :, :]
    within = (diff[..., 0] ** 2 + diff[..., 1] ** 2) <= neighbor_radius**2
    for i, aid in enumerate(active):
        neigh = [active[j] for j in np.nonzero(within[i])[0].tolist() if active[j] != aid]
        out[aid] = Observation(
            agent=world.agents[aid],
            neighbors=neigh,
            view=view,
            embedding=None if embeddings is None else embeddings.get(aid),
        )
    return out
