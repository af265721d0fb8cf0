"""Gym-style boundary around the lanesim driving environment.

Pure marshalling: observations cross as flat float64 arrays, actions as
2-vectors, rewards as floats; every result is numerically identical to
calling the underlying environment directly. No state lives here beyond the
wrapped env handle.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

import lanesim
from lanesim.rl import DrivingEnv, make_env_from_config
from lanesim.rl.env import ROUTE_PREVIEW_STEPS

__version__ = "0.1.0"

ACTION_LOW = np.array([-6.0, -0.3])
ACTION_HIGH = np.array([6.0, 0.3])


class VersionMismatch(RuntimeError):
    pass


def _check_version() -> None:
    if lanesim.__version__ != __version__:
        raise VersionMismatch(
            f"lanesim-env {__version__} requires lanesim {__version__},"
            f" found {lanesim.__version__}"
        )


@dataclass(frozen=True)
class SpaceSpec:
    shape: tuple[int, ...]
    low: np.ndarray | None = None
    high: np.ndarray | None = None


class BoundEnv:
    """Handle to one environment instance; not shareable across threads."""

    def __init__(self, env: DrivingEnv):
        _check_version()
        self._env = env
        self._closed = False
        self.observation_space = SpaceSpec(shape=(env.observation_dim,))
        self.action_space = SpaceSpec(shape=(2,), low=ACTION_LOW, high=ACTION_HIGH)

    def reset(self, seed: int | None = None) -> np.ndarray:
        if self._closed:
            raise RuntimeError("env is closed")
        obs = self._env.reset(seed=seed)
        return obs.as_array()

    def step(self, action) -> tuple[np.ndarray, float, bool, bool, dict]:
        if self._closed:
            raise RuntimeError("env is closed")
        action = np.asarray(action, dtype=np.float64).reshape(2)
        obs, reward, terminated, truncated, info = self._env.step(
            (float(action[0]), float(action[1]))
        )
        info = dict(info)
        info["reward_breakdown"] = reward.to_dict()
        return obs.as_array(), float(reward.total), terminated, truncated, info

    def close(self) -> None:
        self._closed = True
        self._env = None


def make(config_path: str | Path) -> BoundEnv:
    """Construct a BoundEnv from an env config document (see lanesim.rl)."""
    _check_version()
    return BoundEnv(make_env_from_config(config_path))


__all__ = ["BoundEnv", "SpaceSpec", "VersionMismatch", "make", "__version__"]
