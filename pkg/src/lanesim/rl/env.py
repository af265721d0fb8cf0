"""Single-agent driving environment: one externally controlled vehicle in a
replayed or diffusion-driven background, dense progress reward plus
collision/off-road/destination terms."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..engine import Engine, EngineConfig
from ..geometry import Polyline
from ..scenario import load as load_scenario
from ..scenario.model import Scenario

BACKGROUND_MODES = (
    "log_replay",
    "diffusion_unguided",
    "diffusion_guided",
    "diffusion_adversarial",
)

FORWARD_SCALE = 0.1
COLLISION_PENALTY = -10.0
OFFROAD_PENALTY = -5.0
DEST_BONUS = 10.0
DEST_MISS = -5.0
DEST_RADIUS = 2.5
ROUTE_PREVIEW_STEPS = 10  # 1 s at 10 Hz
MAX_SPAWN_WAIT = 600.0  # s of background warm-up tolerated before the sdc departs


@dataclass
class RewardBreakdown:
    r_forward: float = 0.0
    p_collision: float = 0.0
    p_road: float = 0.0
    p_smooth: float = 0.0
    r_dest: float = 0.0

    @property
    def total(self) -> float:
        return self.r_forward + self.p_collision + self.p_road + self.p_smooth + self.r_dest

    def to_dict(self) -> dict:
        return {
            "r_forward": self.r_forward,
            "p_collision": self.p_collision,
            "p_road": self.p_road,
            "p_smooth": self.p_smooth,
            "r_dest": self.r_dest,
            "total": self.total,
        }


@dataclass
class EnvObservation:
    scene_embedding: np.ndarray  # [N_h]
    route: np.ndarray  # [ROUTE_PREVIEW_STEPS, 2] in the agent frame

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.scene_embedding, self.route.reshape(-1)])


class DrivingEnv:
    """Episode lifecycle over one scenario with a designated controlled agent.

    The controlled agent receives (accel, steer) actions through the
    external-action seat; everything else follows the background mode.
    """

    def __init__(
        self,
        scenario: Scenario,
        sdc_id: int,
        background_mode: str = "log_replay",
        planner=None,
        guide=None,
        seed: int = 0,
        horizon: float | None = None,
        replan_interval: float = 1.0,
        embed_dim: int | None = None,
    ):
        if background_mode not in BACKGROUND_MODES:
            raise ValueError(
                f"unknown background mode {background_mode!r} (known: {', '.join(BACKGROUND_MODES)})"
            )
        if all(a.id != sdc_id for a in scenario.agents):
            raise ValueError(f"sdc agent {sdc_id} not in scenario")
        if background_mode != "log_replay" and planner is None:
            raise ValueError(f"background mode {background_mode!r} needs a planner")
        self.scenario = scenario
        self.sdc_id = sdc_id
        self.mode = background_mode
        self.planner = planner
        self.style_guide = guide
        self.seed = seed
        self.replan_interval = replan_interval
        if embed_dim is not None:
            self.embed_dim = embed_dim
        elif planner is not None:
            self.embed_dim = planner.config.n_hidden
        else:
            self.embed_dim = 64
        sdc = scenario.agent_by_id()[sdc_id]
        route_span = max(len(sdc.schedule.reference_route) - 1, 1) * scenario.tick
        # horizon counts episode seconds from the sdc's first controlled step
        self.horizon = horizon if horizon is not None else route_span
        self.engine: Engine | None = None
        self._terminated = True
        self._truncated = False
        self._t_start = scenario.current_time
        self._last_sd: tuple[float, float] | None = None
        self._route_path: Polyline | None = None
        self._replan_count = 0

    @property
    def observation_dim(self) -> int:
        return self.embed_dim + 2 * ROUTE_PREVIEW_STEPS

    @property
    def action_dim(self) -> int:
        return 2

    # -- lifecycle -------------------------------------------------------------

    def reset(self, seed: int | None = None) -> EnvObservation:
        if seed is not None:
            self.seed = seed
        assignment: dict[int, object] = {self.sdc_id: "external"}
        background = "expert" if self.mode == "log_replay" else "traj_idm"
        for agent in self.scenario.agents:
            if agent.id != self.sdc_id:
                assignment[agent.id] = background
        self.engine = Engine(
            self.scenario,
            assignment=assignment,
            config=EngineConfig(collision_mode="continue"),
            seed=self.seed,
        )
        # the episode starts when the controlled agent enters the scene;
        # background traffic runs its schedule up to that point
        depart = self.engine.world.agents[self.sdc_id].depart_time
        wait = depart - self.engine.world.time
        if wait > MAX_SPAWN_WAIT:
            raise ValueError(
                f"sdc {self.sdc_id} never departs (departure {depart:.1f} s is"
                f" {wait:.0f} s past the scenario start)"
            )
        guard = int(max(wait, 0.0) / self.scenario.tick) + 2
        while True:
            self.engine.activate_departures()
            if self.engine.world.agents[self.sdc_id].active:
                break
            if guard <= 0:
                raise ValueError(f"sdc {self.sdc_id} failed to spawn by {depart:.1f} s")
            self.engine.step()
            guard -= 1
        self._t_start = self.engine.world.time
        self._terminated = False
        self._truncated = False
        self._replan_count = 0
        self._event_cursor = len(self.engine.world.events)
        self._maybe_replan(force=True)
        self._route_path = self._current_route_path()
        self._last_sd = self._project_sdc()
        return self._observe()

    def step(self, action) -> tuple[EnvObservation, RewardBreakdown, bool, bool, dict]:
        if self.engine is None or self._terminated or self._truncated:
            raise RuntimeError("step() called on a finished episode; call reset()")
        accel, steer = float(action[0]), float(action[1])
        world = self.engine.world
        self._maybe_replan()
        self.engine.inject_action(self.sdc_id, accel, steer)
        self._event_cursor = len(world.events)
        self.engine.step()

        sdc = world.agents[self.sdc_id]
        reward = RewardBreakdown()

        # dense forward progress along the route, lateral drift penalized
        self._route_path = self._current_route_path()
        s_prev, d_prev = self._last_sd
        s_now, d_now = self._project_sdc()
        self._last_sd = (s_now, d_now)
        reward.r_forward = FORWARD_SCALE * ((s_now - s_prev) - (abs(d_now) - abs(d_prev)))

        v_t = sdc.state.speed
        inv_v = math.inf if v_t <= 0.0 else 1.0 / v_t
        reward.p_smooth = min(0.0, inv_v - abs(steer))

        new_events = world.events[self._event_cursor :]
        collided = any(
            e.kind == "collision" and self.sdc_id in e.agents for e in new_events
        )
        offroad = any(e.kind == "offroad" and self.sdc_id in e.agents for e in new_events)
        arrived = any(e.kind == "arrival" and self.sdc_id in e.agents for e in new_events)

        if collided:
            reward.p_collision = COLLISION_PENALTY
            self._terminated = True
        elif offroad:
            reward.p_road = OFFROAD_PENALTY
            self._terminated = True
        elif arrived:
            self._terminated = True
        if not self._terminated and world.time >= self._t_start + self.horizon - 1e-9:
            self._truncated = True

        if self._terminated or self._truncated:
            reward.r_dest = DEST_BONUS if self._near_destination() else DEST_MISS

        info = {
            "time": world.time,
            "speed": v_t,
            "progress_s": s_now,
            "collided": collided,
            "offroad": offroad,
            "arrived": arrived,
            "reward_components": reward.to_dict(),
        }
        return self._observe(), reward, self._terminated, self._truncated, info

    # -- internals ---------------------------------------------------------------

    def _sdc_runtime(self):
        return self.engine.world.agents[self.sdc_id]

    def _near_destination(self) -> bool:
        sdc = self._sdc_runtime()
        if sdc.dest is None:
            return False
        dx = sdc.state.x - sdc.dest[0]
        dy = sdc.state.y - sdc.dest[1]
        return math.hypot(dx, dy) <= DEST_RADIUS

    def _current_route_path(self) -> Polyline | None:
        sdc = self._sdc_runtime()
        if self.mode != "log_replay" and sdc.plan is not None:
            return sdc.plan.path
        return sdc.route.path() if sdc.route is not None else None

    def _project_sdc(self) -> tuple[float, float]:
        path = self._route_path
        if path is None:
            return (0.0, 0.0)
        st = self._sdc_runtime().state
        return path.project((st.x, st.y))

    def _maybe_replan(self, force: bool = False) -> None:
        if self.mode == "log_replay" or self.planner is None:
            return
        world = self.engine.world
        every = max(int(round(self.replan_interval / world.tick)), 1)
        if not force and world.step_count % every != 0:
            return
        targets = [a for a in world.active_ids()]
        if not targets:
            return
        guide = None
        if self.mode == "diffusion_guided":
            guide = self.style_guide
        elif self.mode == "diffusion_adversarial":
            from ..diffusion import GuideSpec, GuideTerm

            sdc = self._sdc_runtime()
            base = self.style_guide or GuideSpec(alpha=0.05, beta=0.5, k_steps=2)
            guide = GuideSpec(
                terms=[
                    GuideTerm(
                        "adversarial_approach",
                        1.0,
                        {
                            "target_position": (sdc.state.x, sdc.state.y),
                            "exclude": [targets.index(self.sdc_id)]
                            if self.sdc_id in targets
                            else [],
                        },
                    )
                ],
                alpha=base.alpha,
                beta=base.beta,
                k_steps=max(base.k_steps, 1),
            )
        plans = self.planner.plan_for_world(
            self.engine,
            agent_ids=targets,
            guide=guide,
            seed=self.seed * 7919 + self._replan_count,
        )
        for aid, plan in plans.items():
            self.engine.assign_plan(aid, plan)
        self._replan_count += 1

    def _observe(self) -> EnvObservation:
        sdc = self._sdc_runtime()
        st = sdc.state
        if self.planner is not None:
            emb = self.planner.agent_embeddings(self.engine, [self.sdc_id])[self.sdc_id]
            emb = np.asarray(emb, dtype=np.float64)
        else:
            emb = np.zeros(self.embed_dim)
        # next second of the reference path, in the agent frame
        tick = self.engine.world.tick
        t_now = self.engine.world.time
        pts = np.zeros((ROUTE_PREVIEW_STEPS, 2))
        if self.mode != "log_replay" and sdc.plan is not None:
            path, s0 = sdc.plan.path, sdc.path_s
            speed_ref = max(st.speed, 1.0)
            for k in range(ROUTE_PREVIEW_STEPS):
                s = min(s0 + speed_ref * tick * (k + 1), path.length if path else 0.0)
                pts[k] = path.point_at(s) if path else (st.x, st.y)
        elif sdc.route is not None:
            for k in range(ROUTE_PREVIEW_STEPS):
                ref = sdc.route.state_at(min(t_now + (k + 1) * tick, sdc.route.end_time))
                pts[k] = (ref.x, ref.y)
        c, s = math.cos(-st.heading), math.sin(-st.heading)
        rel = pts - (st.x, st.y)
        local = np.stack(
            [rel[:, 0] * c - rel[:, 1] * s, rel[:, 0] * s + rel[:, 1] * c], axis=1
        )
        return EnvObservation(scene_embedding=emb, route=local)


@dataclass
class EpisodeResult:
    reward: float
    collided: bool
    offroad: bool
    success: bool
    progress: float  # fraction of route length covered
    steps: int

    def to_dict(self) -> dict:
        return {
            "reward": self.reward,
            "collided": self.collided,
            "offroad": self.offroad,
            "success": self.success,
            "progress": self.progress,
            "steps": self.steps,
        }


def evaluate(
    policy_fn,
    scenarios: list[tuple[Scenario, int]],
    episodes_per_scenario: int = 1,
    seed: int = 0,
    horizon: float | None = None,
) -> dict:
    """Roll policy_fn(obs) -> (accel, steer) over log-replay backgrounds.

    Returns aggregate collision/off-road/progress/success rates (mean and
    standard error over episodes) plus per-episode records.
    """
    results: list[EpisodeResult] = []
    for scn_idx, (scenario, sdc_id) in enumerate(scenarios):
        for ep in range(episodes_per_scenario):
            env = DrivingEnv(
                scenario, sdc_id, "log_replay", seed=seed + 1000 * scn_idx + ep, horizon=horizon
            )
            obs = env.reset()
            total = 0.0
            collided = offroad = False
            steps = 0
            terminated = truncated = False
            while not (terminated or truncated):
                obs, reward, terminated, truncated, info = env.step(policy_fn(obs))
                total += reward.total
                collided = collided or info["collided"]
                offroad = offroad or info["offroad"]
                steps += 1
            path = env._route_path
            route_len = path.length if path is not None else 1.0
            progress = min(max(env._last_sd[0] / max(route_len, 1e-9), 0.0), 1.0)
            results.append(
                EpisodeResult(
                    reward=total,
                    collided=collided,
                    offroad=offroad,
                    success=env._near_destination() and not collided and not offroad,
                    progress=progress,
                    steps=steps,
                )
            )

    def agg(vals):
        arr = np.asarray(vals, dtype=np.float64)
        stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
        return {"mean": float(arr.mean()), "stderr": stderr}

    return {
        "episodes": [r.to_dict() for r in results],
        "collision_rate": agg([100.0 * r.collided for r in results]),
        "offroad_rate": agg([100.0 * r.offroad for r in results]),
        "route_progress": agg([100.0 * r.progress for r in results]),
        "success_rate": agg([100.0 * r.success for r in results]),
        "mean_reward": agg([r.reward for r in results]),
    }


def make_env_from_config(path: str | Path) -> DrivingEnv:
    """Env config document: scenario path, sdc id, background mode, guide
    spec, planner checkpoint, seed, horizon."""
    doc = json.loads(Path(path).read_text())
    scenario = load_scenario(Path(path).parent / doc["scenario"] if not Path(doc["scenario"]).is_absolute() else doc["scenario"])
    planner = None
    if doc.get("planner_checkpoint"):
        from ..diffusion import DiffusionPlanner

        ckpt = Path(doc["planner_checkpoint"])
        if not ckpt.is_absolute():
            ckpt = Path(path).parent / ckpt
        planner = DiffusionPlanner.load(ckpt)
    guide = None
    if doc.get("guide"):
        from ..diffusion import GuideSpec

        guide = GuideSpec.from_dict(doc["guide"])
    return DrivingEnv(
        scenario,
        sdc_id=int(doc["sdc_id"]),
        background_mode=doc.get("background_mode", "log_replay"),
        planner=planner,
        guide=guide,
        seed=int(doc.get("seed", 0)),
        horizon=doc.get("horizon"),
        replan_interval=float(doc.get("replan_interval", 1.0)),
        embed_dim=doc.get("embed_dim"),
    )
