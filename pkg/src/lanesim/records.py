"""Rollout records: the tick-aligned state/event capture metrics consume."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engine.world import Event


@dataclass
class RolloutRecord:
    tick: float
    start_time: float
    agent_ids: list[int]
    states: np.ndarray  # [T, A, 4] = x, y, speed, heading
    active: np.ndarray  # [T, A] bool
    lane_ids: np.ndarray  # [T, A] int, -1 where unknown
    lengths: np.ndarray  # [A]
    widths: np.ndarray  # [A]
    events: list[Event]
    references: dict[int, np.ndarray] = field(default_factory=dict)  # agent -> [n, 4]
    ref_departs: dict[int, float] = field(default_factory=dict)
    waypoints: dict[int, list[tuple[float, float, float]]] = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return self.states.shape[0]

    def times(self) -> np.ndarray:
        return self.start_time + self.tick * np.arange(self.n_steps)

    def agent_index(self, agent_id: int) -> int:
        return self.agent_ids.index(agent_id)

    def events_of(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    def save(self, path: str | Path) -> None:
        meta = {
            "tick": self.tick,
            "start_time": self.start_time,
            "agent_ids": self.agent_ids,
            "events": [
                {"time": e.time, "kind": e.kind, "agents": list(e.agents)} for e in self.events
            ],
            "ref_departs": {str(k): v for k, v in self.ref_departs.items()},
            "waypoints": {str(k): v for k, v in self.waypoints.items()},
        }
        arrays = {
            "states": self.states,
            "active": self.active,
            "lane_ids": self.lane_ids,
            "lengths": self.lengths,
            "widths": self.widths,
            "meta": np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8),
        }
        for aid, ref in self.references.items():
            arrays[f"ref_{aid}"] = ref
        with open(path, "wb") as f:
            np.savez(f, **arrays)

    @classmethod
    def load(cls, path: str | Path) -> "RolloutRecord":
        with np.load(path) as z:
            meta = json.loads(bytes(z["meta"]).decode())
            refs = {
                int(k[4:]): z[k] for k in z.files if k.startswith("ref_")
            }
            return cls(
                tick=meta["tick"],
                start_time=meta["start_time"],
                agent_ids=list(meta["agent_ids"]),
                states=z["states"],
                active=z["active"],
                lane_ids=z["lane_ids"],
                lengths=z["lengths"],
                widths=z["widths"],
                events=[Event(e["time"], e["kind"], tuple(e["agents"])) for e in meta["events"]],
                references=refs,
                ref_departs={int(k): v for k, v in meta["ref_departs"].items()},
                waypoints={
                    int(k): [tuple(w) for w in v] for k, v in meta["waypoints"].items()
                },
            )

    def content_hash(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.states).tobytes())
        h.update(np.ascontiguousarray(self.active).tobytes())
        for e in self.events:
            h.update(e.to_json().encode())
        return h.hexdigest()
