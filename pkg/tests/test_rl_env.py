import math

import numpy as np
import pytest

from lanesim import router
from lanesim import scenario as sc
from lanesim.engine import Engine, EngineConfig
from lanesim.rl import DrivingEnv, evaluate, make_env_from_config
from lanesim.scenario.model import (
    Agent,
    AgentAttributes,
    AgentState,
    AgentType,
    Schedule,
)

VEH = AgentAttributes(AgentType.VEHICLE, 4.5, 2.0)


def straight_scenario(n_background=0, length=400.0, speed=8.0, duration=9.0):
    scn = sc.generate_straight(length, 1, max_speed=30.0)
    n = int(duration * 10) + 1
    route = [
        AgentState(5.0 + speed * 0.1 * k, -1.75, speed, 0.0) for k in range(n)
    ]
    scn.agents.append(Agent(0, VEH, [Schedule(0.0, route, [])]))
    for b in range(n_background):
        r = [
            AgentState(40.0 + 20.0 * b + speed * 0.1 * k, -1.75, speed, 0.0)
            for k in range(n)
        ]
        scn.agents.append(Agent(1 + b, VEH, [Schedule(0.0, r, [])]))
    return scn


class TestLifecycle:
    def test_reset_deterministic(self):
        scn = straight_scenario()
        env = DrivingEnv(scn, 0, "log_replay", seed=3)
        o1 = env.reset()
        o2 = env.reset()
        assert np.array_equal(o1.as_array(), o2.as_array())

    def test_unknown_sdc_rejected(self):
        scn = straight_scenario()
        with pytest.raises(ValueError, match="sdc"):
            DrivingEnv(scn, 999)

    def test_unknown_mode_rejected(self):
        scn = straight_scenario()
        with pytest.raises(ValueError, match="background mode"):
            DrivingEnv(scn, 0, "teleport")

    def test_step_after_terminal_rejected(self):
        scn = straight_scenario(duration=0.5)
        env = DrivingEnv(scn, 0, "log_replay", horizon=0.2)
        env.reset()
        terminated = truncated = False
        while not (terminated or truncated):
            _, _, terminated, truncated, _ = env.step((0.0, 0.0))
        with pytest.raises(RuntimeError, match="finished"):
            env.step((0.0, 0.0))

    def test_observation_dims(self):
        scn = straight_scenario()
        env = DrivingEnv(scn, 0, "log_replay", embed_dim=16)
        obs = env.reset()
        assert obs.as_array().shape == (16 + 20,)
        assert env.observation_dim == 36

    def test_staggered_sdc_departure_fast_forwards(self):
        # sdc departs at t=2: reset must advance the world to its spawn so
        # the first action lands on an active agent
        scn = straight_scenario()
        scn.agents[0].schedules[0].departure_time = 2.0
        route = scn.agents[0].schedules[0].reference_route
        scn.agents[0].schedules[0].reference_route = [
            AgentState(s.x, s.y, s.speed, s.heading) for s in route
        ]
        env = DrivingEnv(scn, 0, "log_replay", horizon=11.0)
        env.reset()
        assert env.engine.world.time == pytest.approx(2.0)
        _, reward, *_ = env.step((0.0, 0.0))
        assert reward.r_forward > 0.0

    def test_sdc_never_departing_rejected(self):
        scn = straight_scenario()
        scn.agents[0].schedules[0].departure_time = 1e6
        env = DrivingEnv(scn, 0, "log_replay", horizon=5.0)
        with pytest.raises(ValueError, match="never departs"):
            env.reset()

    def test_horizon_counts_from_sdc_start(self):
        scn = straight_scenario()
        scn.agents[0].schedules[0].departure_time = 2.0
        env = DrivingEnv(scn, 0, "log_replay", horizon=1.0)
        env.reset()
        steps = 0
        truncated = False
        while not truncated and steps < 50:
            _, _, terminated, truncated, _ = env.step((0.0, 0.0))
            steps += 1
        assert steps == 10  # one second of control, regardless of the wait


class TestObservationFrame:
    def test_route_preview_is_exact_inverse_of_pose(self):
        # a route heading +x observed from a pose at the route start:
        # relative points must be (k * v * dt, 0)
        scn = straight_scenario(speed=6.0)
        env = DrivingEnv(scn, 0, "log_replay")
        obs = env.reset()
        expected_x = 6.0 * 0.1 * np.arange(1, 11)
        assert obs.route[:, 0] == pytest.approx(expected_x, abs=1e-9)
        assert obs.route[:, 1] == pytest.approx(np.zeros(10), abs=1e-9)

    def test_rotated_pose_rotates_preview(self):
        scn = straight_scenario(speed=6.0)
        env = DrivingEnv(scn, 0, "log_replay")
        env.reset()
        rt = env.engine.world.agents[0]
        st = rt.state
        rt.state = AgentState(st.x, st.y, st.speed, math.pi / 2)
        obs = env._observe()
        # facing +y, a +x route appears to the right (negative local y)
        assert obs.route[-1, 1] < -0.5
        assert abs(obs.route[-1, 0]) < 1e-6


class TestRewards:
    def test_forward_progress_formula(self):
        # drive straight at constant speed: ds per tick = v*dt, d stays 0
        scn = straight_scenario()
        env = DrivingEnv(scn, 0, "log_replay")
        env.reset()
        obs, reward, *_ = env.step((0.0, 0.0))
        v = 8.0
        assert reward.r_forward == pytest.approx(0.1 * v * 0.1, abs=1e-9)
        assert reward.p_smooth == 0.0
        assert reward.total == pytest.approx(reward.r_forward)

    def test_smooth_penalty_kicks_in_at_low_speed(self):
        scn = straight_scenario(speed=2.0)
        env = DrivingEnv(scn, 0, "log_replay")
        env.reset()
        # v = 2 -> 1/v = 0.5; steer 0.8 -> min(0, 0.5 - 0.8) = -0.3
        _, reward, *_ = env.step((0.0, 0.8))
        assert reward.p_smooth == pytest.approx(0.5 - 0.8, abs=1e-9)

    def test_collision_terminates_with_minus_ten(self):
        scn = straight_scenario()
        # park a blocker directly ahead of the sdc
        blocker = [AgentState(12.0, -1.75, 0.0, 0.0)] * 91
        scn.agents.append(Agent(5, VEH, [Schedule(0.0, blocker, [])]))
        env = DrivingEnv(scn, 0, "log_replay")
        env.reset()
        terminated = False
        reward = None
        for _ in range(30):
            _, reward, terminated, truncated, _ = env.step((3.0, 0.0))
            if terminated:
                break
        assert terminated
        assert reward.p_collision == -10.0

    def test_offroad_terminates_with_minus_five(self):
        scn = straight_scenario()
        env = DrivingEnv(scn, 0, "log_replay")
        env.reset()
        terminated = False
        for _ in range(60):
            _, reward, terminated, truncated, _ = env.step((2.0, 0.3))
            if terminated:
                break
        assert terminated
        assert reward.p_road == -5.0
        assert reward.p_collision == 0.0

    def test_destination_bonus_within_radius(self):
        scn = straight_scenario(duration=3.0)
        env = DrivingEnv(scn, 0, "log_replay", horizon=3.0)
        env.reset()
        # track the route: the expert path ends 2.4 m ahead of where constant
        # 8 m/s driving lands after 3 s, so steer nothing and keep pace
        terminated = truncated = False
        reward = None
        while not (terminated or truncated):
            _, reward, terminated, truncated, info = env.step((0.0, 0.0))
        assert reward.r_dest == 10.0

    def test_destination_miss_penalty(self):
        scn = straight_scenario(duration=9.0)
        env = DrivingEnv(scn, 0, "log_replay", horizon=1.0)
        env.reset()
        terminated = truncated = False
        reward = None
        while not (terminated or truncated):
            _, reward, terminated, truncated, _ = env.step((-6.0, 0.0))
        assert truncated
        assert reward.r_dest == -5.0

    def test_total_equals_component_sum(self):
        scn = straight_scenario()
        env = DrivingEnv(scn, 0, "log_replay")
        env.reset()
        for _ in range(10):
            _, reward, terminated, truncated, _ = env.step((0.5, 0.01))
            total = (
                reward.r_forward
                + reward.p_collision
                + reward.p_road
                + reward.p_smooth
                + reward.r_dest
            )
            assert reward.total == total
            if terminated or truncated:
                break


class TestParity:
    def test_env_equals_direct_engine_stepping(self):
        actions = [(1.0, 0.01 * math.sin(k / 5)) for k in range(100)]
        scn = straight_scenario(n_background=2)

        env = DrivingEnv(scn, 0, "log_replay", seed=7, horizon=30.0)
        env.reset()
        env_states = []
        for a in actions:
            _, _, terminated, truncated, _ = env.step(a)
            rt = env.engine.world.agents[0]
            env_states.append((rt.state.x, rt.state.y, rt.state.speed, rt.state.heading))
            if terminated or truncated:
                break

        assignment = {0: "external", 1: "expert", 2: "expert"}
        eng = Engine(scn, assignment=assignment, config=EngineConfig(collision_mode="continue"), seed=7)
        eng.activate_departures()
        direct_states = []
        for a in actions[: len(env_states)]:
            eng.inject_action(0, a[0], a[1])
            eng.step()
            rt = eng.world.agents[0]
            direct_states.append((rt.state.x, rt.state.y, rt.state.speed, rt.state.heading))

        assert env_states == direct_states  # bit-exact


class TestEvaluate:
    def test_expert_callback_full_success(self):
        scn = straight_scenario(duration=4.0)
        route = scn.agents[0].schedule.reference_route

        env_holder = {}

        def expert_cb(obs):
            # proportional controller replaying the logged route
            env = env_holder["env"]
            rt = env.engine.world.agents[0]
            t_next = env.engine.world.time + 0.1
            ref = route[min(int(round(t_next / 0.1)), len(route) - 1)]
            accel = (ref.speed - rt.state.speed) / 0.1
            return (accel, 0.0)

        # evaluate() builds its own envs; emulate via one env manually
        env = DrivingEnv(scn, 0, "log_replay", horizon=4.0)
        env_holder["env"] = env
        env.reset()
        terminated = truncated = False
        collided = False
        while not (terminated or truncated):
            _, reward, terminated, truncated, info = env.step(expert_cb(None))
            collided = collided or info["collided"]
        assert not collided
        assert env._near_destination()

    def test_zero_action_low_progress(self):
        scn = straight_scenario(speed=5.0, duration=5.0)
        report = evaluate(lambda obs: (-6.0, 0.0), [(scn, 0)], episodes_per_scenario=1, horizon=5.0)
        assert report["route_progress"]["mean"] < 20.0
        assert report["success_rate"]["mean"] == 0.0

    def test_metrics_match_episode_records(self):
        scn = straight_scenario(duration=3.0)
        report = evaluate(lambda obs: (0.0, 0.0), [(scn, 0)], episodes_per_scenario=3, horizon=3.0)
        # recompute aggregates from the raw per-episode records
        eps = report["episodes"]
        assert report["collision_rate"]["mean"] == pytest.approx(
            100.0 * sum(e["collided"] for e in eps) / len(eps)
        )
        assert report["success_rate"]["mean"] == pytest.approx(
            100.0 * sum(e["success"] for e in eps) / len(eps)
        )
        assert report["mean_reward"]["mean"] == pytest.approx(
            sum(e["reward"] for e in eps) / len(eps)
        )


class TestDiffusionBackground:
    def _scenario(self):
        scn = sc.generate_grid(2, 2, 120.0, 1, 4, seed=2)
        router.complete_routes(scn, target_speed=10.0)
        for a in scn.agents:
            a.schedule.departure_time = 0.0
        return scn

    def test_modes_run_and_are_seed_deterministic(self):
        from lanesim.diffusion import DiffusionPlanner, ModelConfig, NoiseSchedule

        planner = DiffusionPlanner.fresh(ModelConfig(), NoiseSchedule(), seed=0)
        scn = self._scenario()

        def run(mode):
            env = DrivingEnv(scn, 0, mode, planner=planner, seed=5, horizon=1.0)
            obs = env.reset()
            track = [obs.as_array()]
            terminated = truncated = False
            while not (terminated or truncated):
                obs, reward, terminated, truncated, _ = env.step((0.5, 0.0))
                track.append(obs.as_array())
            return np.concatenate(track)

        for mode in ("diffusion_unguided", "diffusion_adversarial"):
            a = run(mode)
            b = run(mode)
            assert np.array_equal(a, b)

    def test_config_file_constructor(self, tmp_path):
        scn = self._scenario()
        sc.save(scn, tmp_path / "scene.lcs.json")
        cfg = {
            "scenario": "scene.lcs.json",
            "sdc_id": 0,
            "background_mode": "log_replay",
            "seed": 4,
            "horizon": 2.0,
        }
        import json

        (tmp_path / "env.json").write_text(json.dumps(cfg))
        env = make_env_from_config(tmp_path / "env.json")
        obs = env.reset()
        assert obs.as_array().shape[0] == env.observation_dim
