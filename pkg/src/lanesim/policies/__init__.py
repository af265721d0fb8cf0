from .params import BicycleParams, IDMParams, MobilParams
from .idm import idm_accel
from .bicycle import bicycle_step, clamp_action, pure_pursuit_action
from .control import (
    BicycleExpertPolicy,
    ExpertPolicy,
    ExternalPolicy,
    LaneIDMPolicy,
    TrajIDMPolicy,
    make_policy,
    POLICY_NAMES,
)

__all__ = [
    "BicycleExpertPolicy",
    "BicycleParams",
    "ExpertPolicy",
    "ExternalPolicy",
    "IDMParams",
    "LaneIDMPolicy",
    "MobilParams",
    "POLICY_NAMES",
    "TrajIDMPolicy",
    "bicycle_step",
    "clamp_action",
    "idm_accel",
    "make_policy",
    "pure_pursuit_action",
]
