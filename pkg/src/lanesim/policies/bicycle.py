"""Kinematic bicycle model (geometric-center reference) and pure pursuit."""

from __future__ import annotations

import math

from ..geometry import wrap_angle
from ..scenario.model import AgentState
from .params import BicycleParams


def clamp_action(accel: float, steer: float, params: BicycleParams) -> tuple[float, float]:
    a = min(max(accel, -params.max_accel), params.max_accel)
    d = min(max(steer, -params.max_steer), params.max_steer)
    return a, d


def bicycle_step(
    state: AgentState,
    accel: float,
    steer: float,
    params: BicycleParams,
    tick: float,
    length: float,
) -> AgentState:
    """One tick of center-referenced bicycle kinematics with clamped inputs.

    Slip angle beta = atan(0.5 tan(delta)); the heading rate is
    2*v*sin(beta)/wheelbase (rear half-axle at wheelbase/2 from the center).
    """
    a, delta = clamp_action(accel, steer, params)
    wb = params.wheelbase_for(length)
    beta = math.atan(0.5 * math.tan(delta))
    v = state.speed
    x = state.x + v * math.cos(state.heading + beta) * tick
    y = state.y + v * math.sin(state.heading + beta) * tick
    heading = wrap_angle(state.heading + (v / wb) * math.sin(beta) * tick * 2.0)
    speed = max(0.0, v + a * tick)
    return AgentState(x, y, speed, heading)


def pure_pursuit_action(
    state: AgentState,
    path,
    speed_target: float,
    params: BicycleParams,
    length: float,
    speed_gain: float = 2.0,
) -> tuple[float, float]:
    """(accel, steer) tracking a Polyline path at speed_target.

    Lookahead grows with speed, max(3 m, 0.5 s * v); steering from the
    classic pursuit law atan(2*L*sin(eta)/Ld) toward the lookahead point.
    """
    accel = speed_gain * (speed_target - state.speed)
    if path is None:
        return clamp_action(accel, 0.0, params)
    s_now, _ = path.project((state.x, state.y))
    lookahead = max(3.0, 0.5 * state.speed)
    tx, ty = path.point_at(min(s_now + lookahead, path.length))
    dx, dy = tx - state.x, ty - state.y
    dist = math.hypot(dx, dy)
    if dist < 1e-6:
        return clamp_action(accel, 0.0, params)
    eta = wrap_angle(math.atan2(dy, dx) - state.heading)
    wb = params.wheelbase_for(length)
    steer = math.atan(2.0 * wb * math.sin(eta) / dist)
    return clamp_action(accel, steer, params)
