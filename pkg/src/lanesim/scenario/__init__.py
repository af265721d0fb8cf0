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
from .validate import Violation, validate
from .serialize import ParseError, SchemaVersionError, load, loads, save, saves
from .generate import generate_grid, generate_straight

__all__ = [
    "Agent",
    "AgentAttributes",
    "AgentState",
    "AgentType",
    "Junction",
    "Lane",
    "LaneType",
    "MapData",
    "ParseError",
    "Road",
    "Scenario",
    "Schedule",
    "SchemaVersionError",
    "SignalPhase",
    "SignalProgram",
    "SignalState",
    "Violation",
    "Waypoint",
    "generate_grid",
    "generate_straight",
    "load",
    "loads",
    "save",
    "saves",
    "validate",
]
