from .config import GuideSpec, GuideTerm, ModelConfig, NoiseSchedule
from .graph import MapChunks, SceneGraph, build_scene_graph
from .integrate import integrate_plan, integrate_plan_np
from .model import Denoiser, score
from .sampler import SampleDiverged, sample_plans
from .guides import GuideContext, GuideRunner, guide_cost
from .planner import DiffusionPlanner, rollout_replan
from .stats import NormStats
from .train import TrainConfig, TrainResult, evaluate_min_ade, make_straight_corpus, train

__all__ = [
    "Denoiser",
    "DiffusionPlanner",
    "GuideContext",
    "GuideRunner",
    "GuideSpec",
    "GuideTerm",
    "MapChunks",
    "ModelConfig",
    "NoiseSchedule",
    "NormStats",
    "SampleDiverged",
    "SceneGraph",
    "TrainConfig",
    "TrainResult",
    "build_scene_graph",
    "evaluate_min_ade",
    "guide_cost",
    "integrate_plan",
    "integrate_plan_np",
    "make_straight_corpus",
    "rollout_replan",
    "sample_plans",
    "score",
    "train",
]
