from .env import (
    BACKGROUND_MODES,
    DrivingEnv,
    EnvObservation,
    EpisodeResult,
    RewardBreakdown,
    evaluate,
    make_env_from_config,
)

__all__ = [
    "BACKGROUND_MODES",
    "DrivingEnv",
    "EnvObservation",
    "EpisodeResult",
    "RewardBreakdown",
    "evaluate",
    "make_env_from_config",
]
