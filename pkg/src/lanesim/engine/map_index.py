"""Numpy-backed map caches: lane geometry, drivable-area polygons, signals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import GridIndex, Polyline, polygon_bbox, point_in_polygon, wrap_angle
from ..scenario.model import LaneType, MapData, SignalProgram, SignalState

LANE_WIDTH = 3.5
LANE_TOLERANCE = 0.5  # extra lateral slack when associating a lane


@dataclass(slots=True)
class LaneInfo:
    id: int
    geom: Polyline
    driving: bool
    successors: list[int]
    predecessors: list[int]
    left: int | None
    right: int | None
    max_speed: float
    parent: int
    in_junction: bool


class MapIndex:
    """Immutable spatial index over a scenario map; shared across rollouts."""

    def __init__(self, map_data: MapData, lane_width: float = LANE_WIDTH):
        self.lane_width = lane_width
        junction_ids = {j.id for j in map_data.junctions}
        self.lanes: dict[int, LaneInfo] = {}
        self.lane_grid = GridIndex(cell=25.0)
        for lane in map_data.lanes:
            geom = Polyline(lane.centerline)
            info = LaneInfo(
                id=lane.id,
                geom=geom,
                driving=lane.lane_type == LaneType.DRIVING,
                successors=sorted(lane.successors),
                predecessors=sorted(lane.predecessors),
                left=lane.left_neighbor,
                right=lane.right_neighbor,
                max_speed=lane.max_speed,
                parent=lane.parent,
                in_junction=lane.parent in junction_ids,
            )
            self.lanes[lane.id] = info
            pad = lane_width
            x0, y0 = geom.pts.min(axis=0) - pad
            x1, y1 = geom.pts.max(axis=0) + pad
            self.lane_grid.insert_bbox(lane.id, (x0, y0, x1, y1))

        self.polygons: list[np.ndarray] = []
        self.polygon_grid = GridIndex(cell=50.0)
        for container in [*map_data.roads, *map_data.junctions]:
            poly = np.asarray(container.boundary, dtype=np.float64)
            idx = len(self.polygons)
            self.polygons.append(poly)
            self.polygon_grid.insert_bbox(idx, polygon_bbox(poly))

        # signal program owning each controlled lane
        self.signal_by_lane: dict[int, SignalProgram] = {}
        self.programs: list[SignalProgram] = []
        for junction in map_data.junctions:
            for prog in junction.traffic_lights:
                self.programs.append(prog)
                for lid in prog.controlled_lane_ids:
                    self.signal_by_lane[lid] = prog

    # -- signals ------------------------------------------------------------

    def signal_states_at(self, t: float) -> dict[int, SignalState]:
        out: dict[int, SignalState] = {}
        for prog in self.programs:
            cycle = prog.cycle_time()
            r = t % cycle if cycle > 0 else 0.0
            for phase in prog.phases:
                if r < phase.duration:
                    for lid, st in zip(prog.controlled_lane_ids, phase.states):
                        out[lid] = st
                    break
                r -= phase.duration
            else:
                for lid, st in zip(prog.controlled_lane_ids, prog.phases[-1].states):
                    out[lid] = st
        return out

    # -- lane association ---------------------------------------------------

    def current_lane(self, x: float, y: float, heading: float) -> int | None:
        """Driving lane under the pose, or None; ties go to the smaller id."""
        candidates = self.lane_grid.query_point(x, y)
        best: tuple[float, int] | None = None
        for lid in candidates:
            info = self.lanes[lid]
            if not info.driving:
                continue
            s, d = info.geom.project((x, y))
            if abs(d) > 0.5 * self.lane_width + LANE_TOLERANCE:
                continue
            _, _, tangent = info.geom.pose_at(s)
            if abs(wrap_angle(heading - tangent)) >= 0.5 * math.pi:
                continue
            key = (abs(d), lid)
            if best is None or key < best:
                best = key
        return best[1] if best else None

    # -- drivable area ------------------------------------------------------

    def contains(self, x: float, y: float) -> bool:
        for idx in self.polygon_grid.query_point(x, y):
            if point_in_polygon((x, y), self.polygons[idx]):
                return True
        return False


def off_road(state, map_index: MapIndex) -> bool:
    """True when the agent center lies outside every road/junction polygon."""
    return not map_index.contains(state.x, state.y)


def current_lane(state, map_index: MapIndex) -> int | None:
    return map_index.current_lane(state.x, state.y, state.heading)
