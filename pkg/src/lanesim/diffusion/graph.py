"""Heterogeneous scene graph: agent/map nodes with relative-pose edges.

Node features are location-free; all geometry lives in edge features
[dx, dy, dheading] expressed in the query node's frame at the current step,
which is what makes the encoder invariant to global translation/rotation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import Polyline, wrap_angle_array
from ..scenario.model import AgentType, LaneType, MapData
from .config import ModelConfig

AGENT_TYPE_INDEX = {AgentType.VEHICLE: 0, AgentType.PEDESTRIAN: 1, AgentType.CYCLIST: 2}
LANE_TYPE_INDEX = {LaneType.DRIVING: 0, LaneType.BIKING: 1, LaneType.WALKING: 2}


class MapChunks:
    """Lane centerlines chopped into fixed-length segments (the map nodes)."""

    def __init__(self, map_data: MapData, segment_len: float = 20.0):
        feats = []
        poses = []
        for lane in sorted(map_data.lanes, key=lambda ln: ln.id):
            geom = Polyline(lane.centerline)
            n_seg = max(int(np.ceil(geom.length / segment_len)), 1)
            bounds = np.linspace(0.0, geom.length, n_seg + 1)
            for s0, s1 in zip(bounds[:-1], bounds[1:]):
                x, y, heading = geom.pose_at(0.5 * (s0 + s1))
                one_hot = [0.0, 0.0, 0.0]
                one_hot[LANE_TYPE_INDEX[lane.lane_type]] = 1.0
                feats.append(one_hot + [(s1 - s0) / segment_len])
                poses.append((x, y, heading))
        self.features = np.asarray(feats, dtype=np.float32).reshape(-1, 4)
        self.poses = np.asarray(poses, dtype=np.float64).reshape(-1, 3)

    @property
    def n_nodes(self) -> int:
        return len(self.features)


@dataclass
class EdgeSet:
    src: np.ndarray  # query node indices
    dst: np.ndarray  # key node indices
    feat: np.ndarray  # [E, 3] = dx, dy, dheading in the query frame

    @property
    def n_edges(self) -> int:
        return len(self.src)


@dataclass
class SceneGraph:
    agent_ids: list[int]
    agent_feat: np.ndarray  # [A, T_h, 6]
    agent_pose: np.ndarray  # [A, 3] pose at t_c
    map_feat: np.ndarray  # [M, 4]
    map_pose: np.ndarray  # [M, 3]
    edges: dict[str, EdgeSet] = field(default_factory=dict)

    @property
    def n_agents(self) -> int:
        return len(self.agent_ids)

    @property
    def n_map(self) -> int:
        return len(self.map_feat)


def relative_edge_features(src_pose: np.ndarray, dst_pose: np.ndarray) -> np.ndarray:
    """[dx, dy, dheading]: dst pose expressed in the src frame."""
    d = dst_pose[:, :2] - src_pose[:, :2]
    c = np.cos(-src_pose[:, 2])
    s = np.sin(-src_pose[:, 2])
    local = np.stack([d[:, 0] * c - d[:, 1] * s, d[:, 0] * s + d[:, 1] * c], axis=1)
    dh = wrap_angle_array(dst_pose[:, 2] - src_pose[:, 2])
    return np.concatenate([local, dh[:, None]], axis=1).astype(np.float32)


def _radius_edges(src_pose, dst_pose, radius, exclude_self=False):
    if len(src_pose) == 0 or len(dst_pose) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    diff = src_pose[:, None, :2] - dst_pose[None, :, :2]
    within = (diff[..., 0] ** 2 + diff[..., 1] ** 2) <= radius * radius
    if exclude_self and len(src_pose) == len(dst_pose):
        np.fill_diagonal(within, False)
    si, di = np.nonzero(within)
    return si.astype(np.int64), di.astype(np.int64)


def build_scene_graph(
    agents: list[tuple[int, object, np.ndarray]],
    chunks: MapChunks,
    config: ModelConfig,
) -> SceneGraph:
    """Assemble the graph from per-agent history and pre-chunked map nodes.

    `agents` rows are (agent_id, attributes, history [T_h, 4]) with history
    ordered oldest to newest; the last row is the state at t_c.
    """
    if not agents:
        raise ValueError("scene graph needs at least one agent")
    t_h = config.n_history
    feats = np.zeros((len(agents), t_h, 6), dtype=np.float32)
    poses = np.zeros((len(agents), 3), dtype=np.float64)
    ids = []
    for i, (aid, attrs, hist) in enumerate(agents):
        ids.append(aid)
        hist = np.asarray(hist, dtype=np.float64)
        if len(hist) < t_h:  # pad by repeating the oldest state
            pad = np.repeat(hist[:1], t_h - len(hist), axis=0)
            hist = np.concatenate([pad, hist], axis=0)
        hist = hist[-t_h:]
        one_hot = [0.0, 0.0, 0.0]
        one_hot[AGENT_TYPE_INDEX[attrs.agent_type]] = 1.0
        feats[i, :, 0:3] = one_hot
        feats[i, :, 3] = hist[:, 2]  # speed per history step
        feats[i, :, 4] = attrs.length
        feats[i, :, 5] = attrs.width
        poses[i] = (hist[-1, 0], hist[-1, 1], hist[-1, 3])

    graph = SceneGraph(
        agent_ids=ids,
        agent_feat=feats,
        agent_pose=poses,
        map_feat=chunks.features,
        map_pose=chunks.poses,
    )

    def add(name, src_pose, dst_pose, radius, exclude_self=False):
        si, di = _radius_edges(src_pose, dst_pose, radius, exclude_self)
        graph.edges[name] = EdgeSet(si, di, relative_edge_features(src_pose[si], dst_pose[di]))

    add("a2a", poses, poses, config.a2a_radius, exclude_self=True)
    add("pl2a", poses, chunks.poses, config.pl2a_radius)  # encoder agent<-map keys
    add("m2m", chunks.poses, chunks.poses, config.m2m_radius, exclude_self=True)
    add("pl2m", poses, chunks.poses, config.pl2m_radius)  # decoder plan<-map keys
    add("a2m", poses, poses, config.a2m_radius, exclude_self=True)  # decoder plan<-agents
    return graph


def merge_graphs(graphs: list[SceneGraph]) -> SceneGraph:
    """Disjoint union for batched forwards; no cross-scene edges."""
    agent_off = 0
    map_off = 0
    ids: list[int] = []
    agent_feat = []
    agent_pose = []
    map_feat = []
    map_pose = []
    edges: dict[str, list[tuple[np.ndarray, np.ndarray, np.ndarray]]] = {}
    for g in graphs:
        ids.extend(g.agent_ids)
        agent_feat.append(g.agent_feat)
        agent_pose.append(g.agent_pose)
        map_feat.append(g.map_feat)
        map_pose.append(g.map_pose)
        for name, es in g.edges.items():
            src_off = map_off if name == "m2m" else agent_off
            dst_off = map_off if name in ("m2m", "pl2a", "pl2m") else agent_off
            edges.setdefault(name, []).append((es.src + src_off, es.dst + dst_off, es.feat))
        agent_off += g.n_agents
        map_off += g.n_map
    return SceneGraph(
        agent_ids=ids,
        agent_feat=np.concatenate(agent_feat, axis=0),
        agent_pose=np.concatenate(agent_pose, axis=0),
        map_feat=np.concatenate(map_feat, axis=0),
        map_pose=np.concatenate(map_pose, axis=0),
        edges={
            name: EdgeSet(
                np.concatenate([p[0] for p in parts]),
                np.concatenate([p[1] for p in parts]),
                np.concatenate([p[2] for p in parts]),
            )
            for name, parts in edges.items()
        },
    )
