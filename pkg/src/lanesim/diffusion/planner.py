"""High-level planner: checkpointing, per-world plan generation, replanning."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from .. import __version__
from .config import GuideSpec, ModelConfig, NoiseSchedule
from .graph import MapChunks, build_scene_graph
from .guides import GuideContext, GuideRunner
from .model import Denoiser, build_denoiser
from .sampler import SampleTrace, sample_plans
from .stats import NormStats

CHECKPOINT_VERSION = 1


class DiffusionPlanner:
    """Bundles the denoiser, noise schedule and normalization statistics."""

    def __init__(
        self,
        model: Denoiser,
        schedule: NoiseSchedule,
        stats: NormStats,
    ):
        self.model = model
        self.schedule = schedule
        self.stats = stats
        self._chunks_cache: tuple[int, MapChunks] | None = None

    @property
    def config(self) -> ModelConfig:
        return self.model.cfg

    # -- persistence ----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        meta = {
            "checkpoint_version": CHECKPOINT_VERSION,
            "library_version": __version__,
            "model_config": self.config.to_dict(),
            "schedule": self.schedule.to_dict(),
            "stats": self.stats.to_dict(),
        }
        arrays = {
            f"param/{name}": tensor.detach().numpy()
            for name, tensor in self.model.state_dict().items()
        }
        arrays["meta"] = np.frombuffer(
            json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8
        )
        with open(path, "wb") as f:
            np.savez(f, **arrays)

    @classmethod
    def load(cls, path: str | Path) -> "DiffusionPlanner":
        with np.load(path) as z:
            meta = json.loads(bytes(z["meta"]).decode())
            if meta.get("checkpoint_version") != CHECKPOINT_VERSION:
                raise ValueError(
                    f"unsupported checkpoint version {meta.get('checkpoint_version')!r}"
                )
            cfg = ModelConfig.from_dict(meta["model_config"])
            schedule = NoiseSchedule.from_dict(meta["schedule"])
            stats = NormStats.from_dict(meta["stats"])
            model = Denoiser(cfg, schedule.sigma_data)
            state = {
                k[len("param/") :]: torch.from_numpy(z[k])
                for k in z.files
                if k.startswith("param/")
            }
            model.load_state_dict(state)
            model.eval()
        return cls(model, schedule, stats)

    @classmethod
    def fresh(
        cls,
        cfg: ModelConfig | None = None,
        schedule: NoiseSchedule | None = None,
        stats: NormStats | None = None,
        seed: int = 0,
    ) -> "DiffusionPlanner":
        cfg = cfg or ModelConfig()
        schedule = schedule or NoiseSchedule()
        if stats is None:
            stats = NormStats(mean=np.array([8.0, 0.0]), std=np.array([5.0, 0.5]))
        return cls(build_denoiser(cfg, schedule.sigma_data, seed=seed), schedule, stats)

    # -- planning over a live world -------------------------------------------

    def _chunks_for(self, engine) -> MapChunks:
        key = id(engine.scenario.map)
        if self._chunks_cache is None or self._chunks_cache[0] != key:
            self._chunks_cache = (key, MapChunks(engine.scenario.map, self.config.map_segment_len))
        return self._chunks_cache[1]

    def gather_histories(self, engine, agent_ids: list[int]):
        rows = []
        for aid in agent_ids:
            rt = engine.world.agents[aid]
            hist = [
                (s.x, s.y, s.speed, s.heading) for _, s in list(rt.history)[-self.config.n_history :]
            ]
            if not hist:
                s = rt.state
                hist = [(s.x, s.y, s.speed, s.heading)]
            rows.append((aid, rt.attributes, np.asarray(hist, dtype=np.float64)))
        return rows

    def guide_context(self, engine, agent_ids: list[int]) -> GuideContext:
        init = np.array(
            [
                (
                    engine.world.agents[a].state.x,
                    engine.world.agents[a].state.y,
                    engine.world.agents[a].state.speed,
                    engine.world.agents[a].state.heading,
                )
                for a in agent_ids
            ]
        )
        polys = [
            np.asarray(c.boundary)
            for c in [*engine.scenario.map.roads, *engine.scenario.map.junctions]
        ]
        return GuideContext(
            init_states=init,
            stats=self.stats,
            tick=engine.world.tick,
            lengths=np.array([engine.world.agents[a].attributes.length for a in agent_ids]),
            widths=np.array([engine.world.agents[a].attributes.width for a in agent_ids]),
            drivable=polys,
        )

    def plan_for_world(
        self,
        engine,
        agent_ids: list[int] | None = None,
        guide: GuideSpec | None = None,
        guide_runner_hook=None,
        seed: int = 0,
        trace: SampleTrace | None = None,
    ) -> dict[int, np.ndarray]:
        """Sample world-unit plans for the given (default: all active) agents."""
        world = engine.world
        if agent_ids is None:
            agent_ids = [a for a in world.active_ids()]
        if not agent_ids:
            return {}
        rows = self.gather_histories(engine, agent_ids)
        graph = build_scene_graph(rows, self._chunks_for(engine), self.config)
        emb = self.model.encode(graph)
        runner = None
        if guide is not None and guide.k_steps > 0 and guide.terms:
            ctx = self.guide_context(engine, agent_ids)
            if guide_runner_hook is not None:
                runner = guide_runner_hook(guide, ctx)
            else:
                runner = GuideRunner(guide, ctx)
        gen = torch.Generator().manual_seed(seed)
        shape = (len(agent_ids), self.config.n_future, 2)
        with torch.no_grad():
            tau = sample_plans(
                lambda x, s: self.model(x, emb, s),
                shape,
                self.schedule,
                guide=runner,
                generator=gen,
                trace=trace,
            )
        ref = np.array([rows[i][2][-1, 3] for i in range(len(rows))])
        plans = self.stats.denormalize(tau.numpy(), ref)
        plans[..., 0] = np.maximum(plans[..., 0], 0.0)  # executable speeds
        return {aid: plans[i] for i, aid in enumerate(agent_ids)}

    def agent_embeddings(self, engine, agent_ids: list[int]) -> dict[int, np.ndarray]:
        """Per-agent current-step embedding rows (the RL observation pieces)."""
        rows = self.gather_histories(engine, agent_ids)
        graph = build_scene_graph(rows, self._chunks_for(engine), self.config)
        with torch.no_grad():
            emb = self.model.encode(graph)
        now = emb.agent_emb[:, -1].numpy()
        return {aid: now[i] for i, aid in enumerate(agent_ids)}


def rollout_replan(
    engine,
    planner: DiffusionPlanner,
    duration: float,
    replan_interval: float = 1.0,
    guide: GuideSpec | None = None,
    plan_agent_ids: list[int] | None = None,
    seed: int = 0,
) -> int:
    """Advance the engine, regenerating plans every replan_interval seconds.

    Replan seeds derive from (seed, replan index) so whole rollouts are
    reproducible. Returns the number of generations performed.
    """
    if replan_interval > duration:
        raise ValueError("replan interval must not exceed the rollout duration")
    steps = int(round(duration / engine.world.tick))
    every = max(int(round(replan_interval / engine.world.tick)), 1)
    generations = 0
    for k in range(steps):
        if k % every == 0:
            engine.activate_departures()  # plan for agents spawning this tick
            targets = plan_agent_ids
            if targets is None:
                targets = engine.world.active_ids()
            targets = [a for a in targets if engine.world.agents[a].active]
            if targets:
                plans = planner.plan_for_world(
                    engine,
                    agent_ids=targets,
                    guide=guide,
                    seed=seed * 1_000_003 + generations,
                )
                for aid, plan in plans.items():
                    engine.assign_plan(aid, plan)
                generations += 1
        engine.step()
    return generations
