"""Tunable parameter sets for the control policies."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class IDMParams:
    acc_max: float = 5.0  # m/s^2
    time_headway: float = 2.0  # s
    v_target: float = 20.0  # m/s
    min_gap: float = 2.0  # m (s0)
    comfort_decel: float = 3.5  # m/s^2 (b)
    exponent: float = 4.0


@dataclass
class BicycleParams:
    max_accel: float = 6.0  # m/s^2
    max_steer: float = 0.3  # rad, front-wheel angle
    wheelbase: float | None = None  # m; None = 0.6 x agent length

    def wheelbase_for(self, length: float) -> float:
        return self.wheelbase if self.wheelbase is not None else 0.6 * length


@dataclass
class MobilParams:
    politeness: float = 0.3
    accel_threshold: float = 0.2  # m/s^2 incentive needed to change
    safe_decel: float = 4.0  # m/s^2 max braking imposed on the new follower
    change_duration: float = 3.0  # s, lateral blend onto the target centerline
