"""Desk-scale denoiser training and the synthetic straight-road corpus."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .. import scenario as sc
from .config import ModelConfig, NoiseSchedule
from .graph import MapChunks, SceneGraph, build_scene_graph, merge_graphs
from .integrate import integrate_plan_np
from .model import Denoiser, TorchGraph
from .stats import NormStats


@dataclass
class TrainingScene:
    graph: SceneGraph
    target_world: np.ndarray  # [A, T_f, 2] future (speed, heading)
    init_states: np.ndarray  # [A, 4] at t_c

    def ref_headings(self) -> np.ndarray:
        return self.init_states[:, 3]


@dataclass
class TrainConfig:
    steps: int = 2000
    batch_size: int = 16
    lr: float = 5e-4
    weight_decay: float = 0.03
    one_cycle: bool = True
    sigma_weighting: bool = False  # optional per-sigma loss weight, off by default
    snapshot_every: int = 100
    seed: int = 0


@dataclass
class TrainResult:
    losses: list[float] = field(default_factory=list)
    diverged: bool = False
    steps_run: int = 0


def make_straight_corpus(
    n_scenes: int,
    cfg: ModelConfig,
    seed: int = 0,
    tick: float = 0.1,
) -> tuple[list[TrainingScene], NormStats]:
    """Constant-ish speed trips on one straight road; speeds vary per scene."""
    scn = sc.generate_straight(600.0, 1, max_speed=30.0)
    chunks = MapChunks(scn.map, cfg.map_segment_len)
    rng = np.random.default_rng(seed)
    scenes = []
    from ..scenario.model import AgentAttributes, AgentType

    attrs = AgentAttributes(AgentType.VEHICLE, 4.5, 2.0)
    for _ in range(n_scenes):
        u0 = rng.uniform(5.0, 15.0)
        accel = rng.uniform(-0.3, 0.3)
        x0 = rng.uniform(10.0, 80.0)
        y = -1.75
        hist = []
        v = u0
        x = x0
        for k in range(cfg.n_history):
            hist.append((x, y, v, 0.0))
            v = max(u0 + accel * (k + 1) * tick, 0.0)
            x += v * tick
        hist = np.asarray(hist)
        future = []
        for k in range(cfg.n_future):
            v = max(u0 + accel * (cfg.n_history + k) * tick, 0.0)
            future.append((v, 0.0))
        target = np.asarray(future)[None, :, :]  # single agent
        graph = build_scene_graph([(0, attrs, hist)], chunks, cfg)
        scenes.append(
            TrainingScene(graph=graph, target_world=target, init_states=hist[-1:][:, :4])
        )
    stats = NormStats.from_targets(
        [s.target_world for s in scenes], [s.ref_headings() for s in scenes]
    )
    return scenes, stats


def scenes_from_scenario(
    scenario,
    cfg: ModelConfig,
    stride_s: float = 2.0,
    chunks: MapChunks | None = None,
) -> list[TrainingScene]:
    """Slice each routed agent's reference route into history+future windows."""
    chunks = chunks or MapChunks(scenario.map, cfg.map_segment_len)
    tick = scenario.tick
    window = cfg.n_history + cfg.n_future
    stride = max(int(round(stride_s / tick)), 1)
    scenes = []
    for agent in scenario.agents:
        route = agent.schedule.reference_route
        if len(route) < window:
            continue
        rows = np.array([(s.x, s.y, s.speed, s.heading) for s in route])
        for start in range(0, len(route) - window + 1, stride):
            hist = rows[start : start + cfg.n_history]
            fut = rows[start + cfg.n_history : start + window]
            target = np.stack([fut[:, 2], fut[:, 3]], axis=-1)[None]
            graph = build_scene_graph([(agent.id, agent.attributes, hist)], chunks, cfg)
            scenes.append(
                TrainingScene(
                    graph=graph,
                    target_world=target,
                    init_states=hist[-1:][:, :4],
                )
            )
    return scenes


def corpus_norm_stats(scenes: list[TrainingScene]) -> NormStats:
    return NormStats.from_targets(
        [s.target_world for s in scenes], [s.ref_headings() for s in scenes]
    )


def train(
    model: Denoiser,
    scenes: list[TrainingScene],
    schedule: NoiseSchedule,
    stats: NormStats,
    cfg: TrainConfig,
    loss_callback=None,
) -> TrainResult:
    """Denoising-MSE training: D(target + eps; c, sigma) vs target, sigma
    lognormal; AdamW with a one-cycle ramp. Divergence restores the last
    snapshot and aborts."""
    result = TrainResult()
    if cfg.steps == 0:
        return result
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    lr_sched = (
        torch.optim.lr_scheduler.OneCycleLR(opt, max_lr=cfg.lr, total_steps=cfg.steps)
        if cfg.one_cycle
        else None
    )
    gen = torch.Generator().manual_seed(cfg.seed)
    targets = [
        torch.as_tensor(
            stats.normalize(s.target_world, s.ref_headings()), dtype=torch.float32
        )
        for s in scenes
    ]
    snapshot = copy.deepcopy(model.state_dict())
    model.train()
    for step in range(cfg.steps):
        idx = torch.randint(len(scenes), (cfg.batch_size,), generator=gen).tolist()
        # disjoint-union batch: one forward across the whole minibatch
        merged = TorchGraph.from_graph(merge_graphs([scenes[i].graph for i in idx]))
        tau = torch.cat([targets[i] for i in idx], dim=0)
        sigma_rows = []
        for i in idx:
            s_i = schedule.sample_training_sigma(gen)
            sigma_rows.extend([s_i] * scenes[i].graph.n_agents)
        sigma = torch.tensor(sigma_rows, dtype=torch.float32)
        eps = torch.randn(tau.shape, generator=gen) * sigma.reshape(-1, 1, 1)
        emb = model.encoder(merged)
        denoised = model(tau + eps, emb, sigma)
        per_agent = ((denoised - tau) ** 2).mean(dim=(1, 2))
        if cfg.sigma_weighting:
            sd = model.sigma_data
            per_agent = per_agent * (sigma**2 + sd**2) / ((sigma * sd) ** 2)
        loss = per_agent.mean()
        if not torch.isfinite(loss):
            model.load_state_dict(snapshot)
            model.eval()
            result.diverged = True
            result.steps_run = step
            return result
        opt.zero_grad()
        loss.backward()
        opt.step()
        if lr_sched is not None:
            lr_sched.step()
        val = float(loss.detach())
        result.losses.append(val)
        if loss_callback is not None:
            loss_callback(step, val)
        if step % cfg.snapshot_every == 0:
            snapshot = copy.deepcopy(model.state_dict())
    model.eval()
    result.steps_run = cfg.steps
    return result


def evaluate_min_ade(
    model: Denoiser,
    scenes: list[TrainingScene],
    schedule: NoiseSchedule,
    stats: NormStats,
    k: int = 6,
    seed: int = 0,
    max_scenes: int | None = None,
) -> float:
    """Best-of-k displacement error of sampled plans against ground truth."""
    from .sampler import sample_plans

    model.eval()
    total = 0.0
    count = 0
    use = scenes[:max_scenes] if max_scenes else scenes
    for si, scene in enumerate(use):
        # k independent samples in one forward: a k-fold disjoint union
        union = TorchGraph.from_graph(merge_graphs([scene.graph] * k))
        emb = model.encoder(union)
        gt = integrate_plan_np(scene.target_world, scene.init_states[:, :2], 0.1)
        a = scene.graph.n_agents
        gen = torch.Generator().manual_seed(seed * 100003 + si * 101)
        with torch.no_grad():
            tau = sample_plans(
                lambda x, s: model(x, emb, s),
                (k * a, scene.target_world.shape[1], 2),
                schedule,
                generator=gen,
            )
        refs = np.tile(scene.ref_headings(), k)
        plans = stats.denormalize(tau.numpy(), refs).reshape(
            k, a, scene.target_world.shape[1], 2
        )
        best = math.inf
        for j in range(k):
            pos = integrate_plan_np(plans[j], scene.init_states[:, :2], 0.1)
            ade = float(np.linalg.norm(pos - gt, axis=-1).mean())
            best = min(best, ade)
        total += best
        count += 1
    return total / max(count, 1)
