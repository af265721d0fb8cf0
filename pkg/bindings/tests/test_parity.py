"""Binding acceptance: bit-exact parity with native environment calls."""

import json
import math

import numpy as np
import pytest

import lanesim
import lanesim_env
from lanesim import router
from lanesim import scenario as sc
from lanesim.rl import DrivingEnv


@pytest.fixture(scope="module")
def env_config(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cfg")
    scn = sc.generate_grid(2, 2, 120.0, 1, 4, seed=6)
    router.complete_routes(scn, target_speed=10.0)
    for agent in scn.agents:
        agent.schedule.departure_time = 0.0
    sc.save(scn, tmp / "scene.lcs.json")
    doc = {
        "scenario": "scene.lcs.json",
        "sdc_id": 0,
        "background_mode": "log_replay",
        "seed": 17,
        "horizon": 30.0,
    }
    (tmp / "env.json").write_text(json.dumps(doc))
    return tmp / "env.json", scn


def scripted_actions(n=100):
    return [(1.5 * math.sin(k / 7.0), 0.05 * math.cos(k / 11.0)) for k in range(n)]


class TestParity:
    def test_hundred_step_episode_bit_exact(self, env_config):
        cfg_path, scn = env_config
        bound = lanesim_env.make(cfg_path)
        native = DrivingEnv(scn, 0, "log_replay", seed=17, horizon=30.0)

        obs_b = bound.reset(seed=17)
        obs_n = native.reset(seed=17).as_array()
        assert np.array_equal(obs_b, obs_n)

        for action in scripted_actions(100):
            ob, rb, tb, ub, ib = bound.step(action)
            on_, rn, tn, un, _ = native.step(action)
            assert np.array_equal(ob, on_.as_array())
            assert rb == rn.total  # bit-exact
            assert (tb, ub) == (tn, un)
            if tb or ub:
                break

    def test_reset_same_seed_identical(self, env_config):
        cfg_path, _ = env_config
        env = lanesim_env.make(cfg_path)
        a = env.reset(seed=3)
        b = env.reset(seed=3)
        assert np.array_equal(a, b)

    def test_out_of_bounds_actions_clamp_like_primary(self, env_config):
        cfg_path, scn = env_config
        bound = lanesim_env.make(cfg_path)
        native = DrivingEnv(scn, 0, "log_replay", seed=17, horizon=30.0)
        bound.reset(seed=17)
        native.reset(seed=17)
        wild = (1e9, -1e9)
        ob, rb, *_ = bound.step(wild)
        on_, rn, *_ = native.step(wild)
        assert np.array_equal(ob, on_.as_array())
        assert rb == rn.total
        # effective kinematics respected the bicycle clamp
        sdc = bound._env.engine.world.agents[0]
        assert sdc.state.speed <= 8.0 + 6.0 * 0.1 + 1e-12


class TestBoundary:
    def test_spaces_match_contract(self, env_config):
        cfg_path, _ = env_config
        env = lanesim_env.make(cfg_path)
        n_h = env._env.embed_dim
        assert env.observation_space.shape == (n_h + 20,)
        assert env.action_space.shape == (2,)
        assert np.array_equal(env.action_space.high, [6.0, 0.3])
        assert np.array_equal(env.action_space.low, [-6.0, -0.3])

    def test_version_matches_primary(self):
        assert lanesim_env.__version__ == lanesim.__version__

    def test_primary_errors_surface_verbatim(self, env_config):
        cfg_path, _ = env_config
        env = lanesim_env.make(cfg_path)
        env.reset(seed=0)
        with pytest.raises(ValueError, match="non-finite"):
            env.step((float("nan"), 0.0))

    def test_instances_do_not_interfere(self, env_config):
        cfg_path, scn = env_config
        a = lanesim_env.make(cfg_path)
        b = lanesim_env.make(cfg_path)
        native = DrivingEnv(scn, 0, "log_replay", seed=17, horizon=30.0)
        obs_a = a.reset(seed=17)
        native_obs = native.reset(seed=17)
        b.reset(seed=99)
        for k, action in enumerate(scripted_actions(20)):
            oa, ra, *_ = a.step(action)
            if k % 2 == 0:
                b.step((0.5, -0.01))  # interleaved calls on the other instance
            on_, rn, *_ = native.step(action)
            assert np.array_equal(oa, on_.as_array())
            assert ra == rn.total

    def test_closed_env_rejects_calls(self, env_config):
        cfg_path, _ = env_config
        env = lanesim_env.make(cfg_path)
        env.reset(seed=1)
        env.close()
        with pytest.raises(RuntimeError, match="closed"):
            env.step((0.0, 0.0))
