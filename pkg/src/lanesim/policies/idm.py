"""Intelligent Driver Model car-following acceleration."""

from __future__ import annotations

import math

from .params import IDMParams


def idm_accel(
    v: float,
    v_lead: float | None,
    gap: float | None,
    params: IDMParams,
    v_target: float | None = None,
) -> float:
    """Acceleration for speed v given an optional leader at net distance gap.

    a = acc_max * (1 - (v/v0)^delta - (s*/gap)^2) with
    s* = s0 + v*T + v*(v - v_lead) / (2*sqrt(acc_max*b)); the gap term is
    omitted on a free road. Result clamped to [-2b, acc_max].
    """
    v0 = params.v_target if v_target is None else v_target
    v0 = max(v0, 1e-3)
    a = params.acc_max * (1.0 - (max(v, 0.0) / v0) ** params.exponent)
    if gap is not None:
        if gap <= 0:
            gap = 1e-3
        assert v_lead is not None
        s_star = params.min_gap + v * params.time_headway + v * (v - v_lead) / (
            2.0 * math.sqrt(params.acc_max * params.comfort_decel)
        )
        a -= params.acc_max * (s_star / gap) ** 2
    return min(max(a, -2.0 * params.comfort_decel), params.acc_max)
