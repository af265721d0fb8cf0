from .map_index import MapIndex, current_lane, off_road
from .collision import detect_collisions
from .world import (
    AgentAction,
    AgentRuntime,
    Event,
    MotionPlanCache,
    RouteCache,
    WorldState,
)
from .core import Engine, EngineConfig, Observation

__all__ = [
    "AgentAction",
    "AgentRuntime",
    "Engine",
    "EngineConfig",
    "Event",
    "MapIndex",
    "MotionPlanCache",
    "Observation",
    "RouteCache",
    "WorldState",
    "current_lane",
    "detect_collisions",
    "off_road",
]
