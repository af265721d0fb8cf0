"""Evaluation battery over rollout records: violation rates, displacement
errors, arrival-time errors, and behavior-style histograms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .records import RolloutRecord

ARRIVAL_RADIUS = 2.5
FOLLOW_RANGE = 100.0
HEADWAY_MIN_SPEED = 0.5
DEFAULT_BINS = {
    "acceleration": np.linspace(-6.0, 6.0, 25),
    "relative_distance": np.linspace(0.0, 100.0, 26),
    "time_headway": np.linspace(0.0, 10.0, 26),
}


@dataclass
class RateSummary:
    mean: float
    stderr: float
    per_record: list[float]

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "per_record": self.per_record}


def _summary(values: list[float]) -> RateSummary:
    arr = np.asarray(values, dtype=np.float64)
    if len(arr) == 0:
        return RateSummary(0.0, 0.0, [])
    stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return RateSummary(float(arr.mean()), stderr, arr.tolist())


def violation_rates(records: list[RolloutRecord]) -> dict:
    """Percent of agents with at least one collision / off-road event,
    averaged over records (mean and standard error); the per-scenario
    variant (any event at all) is reported alongside."""
    coll, off, coll_scen, off_scen = [], [], [], []
    for rec in records:
        n = max(len(rec.agent_ids), 1)
        hit = {a for e in rec.events_of("collision") for a in e.agents}
        out = {a for e in rec.events_of("offroad") for a in e.agents}
        coll.append(100.0 * len(hit) / n)
        off.append(100.0 * len(out) / n)
        coll_scen.append(100.0 if hit else 0.0)
        off_scen.append(100.0 if out else 0.0)
    return {
        "collision_pct": _summary(coll),
        "offroad_pct": _summary(off),
        "collision_scenario_pct": _summary(coll_scen),
        "offroad_scenario_pct": _summary(off_scen),
    }


def min_ade_fde(
    samples: np.ndarray,
    ground_truth: np.ndarray,
    joint: bool = False,
) -> tuple[float, float]:
    """Best-of-K displacement errors.

    samples: [K, T, 2] candidate trajectories; ground_truth: [T, 2].
    minADE and minFDE minimize independently over samples unless `joint`,
    which picks the single ADE-best sample for both.
    """
    samples = np.asarray(samples, dtype=np.float64)
    gt = np.asarray(ground_truth, dtype=np.float64)
    if samples.ndim != 3 or samples.shape[1:] != gt.shape:
        raise ValueError(f"shape mismatch: samples {samples.shape} vs truth {gt.shape}")
    dists = np.linalg.norm(samples - gt[None], axis=-1)  # [K, T]
    ades = dists.mean(axis=1)
    fdes = dists[:, -1]
    if joint:
        k = int(np.argmin(ades))
        return float(ades[k]), float(fdes[k])
    return float(ades.min()), float(fdes.min())


@dataclass
class ArrivalStats:
    errors: dict[int, float]  # agent -> simulated minus reference arrival time
    censored: list[int]  # agents that never reached their destination
    threshold: float

    @property
    def fraction_within(self) -> float:
        total = len(self.errors) + len(self.censored)
        if total == 0:
            return 0.0
        hits = sum(1 for v in self.errors.values() if abs(v) < self.threshold)
        return hits / total

    def histogram(self, bins: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        if bins is None:
            bins = np.linspace(-60.0, 60.0, 25)
        vals = np.fromiter(self.errors.values(), dtype=np.float64, count=len(self.errors))
        hist, edges = np.histogram(vals, bins=bins)
        return hist, edges

    def to_dict(self) -> dict:
        return {
            "errors": {str(k): v for k, v in sorted(self.errors.items())},
            "censored": self.censored,
            "threshold": self.threshold,
            "fraction_within": self.fraction_within,
        }


def arrival_time_errors(
    records: list[RolloutRecord],
    threshold: float = 20.0,
    radius: float = ARRIVAL_RADIUS,
) -> ArrivalStats:
    """Signed arrival-time error per trip against the reference waypoint
    time; trips that never reach their destination are censored."""
    errors: dict[int, float] = {}
    censored: list[int] = []
    for rec in records:
        times = rec.times()
        for aid, wps in rec.waypoints.items():
            if not wps:
                continue
            gx, gy, g_time = wps[-1]
            i = rec.agent_index(aid)
            d2 = (rec.states[:, i, 0] - gx) ** 2 + (rec.states[:, i, 1] - gy) ** 2
            ok = np.nonzero((d2 <= radius * radius) & rec.active[:, i])[0]
            if len(ok) == 0:
                # deactivated-on-arrival agents stop updating; accept the
                # first tick the (frozen) position is in range
                ok = np.nonzero(d2 <= radius * radius)[0]
            if len(ok) == 0:
                censored.append(aid)
            else:
                errors[aid] = float(times[ok[0]] - g_time)
    return ArrivalStats(errors=errors, censored=censored, threshold=threshold)


@dataclass
class HistogramSet:
    bins: dict[str, np.ndarray] = field(default_factory=dict)
    masses: dict[str, np.ndarray] = field(default_factory=dict)
    n_samples: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            name: {
                "bin_edges": self.bins[name].tolist(),
                "mass": self.masses[name].tolist(),
                "n": self.n_samples[name],
            }
            for name in self.bins
        }


def _follow_pairs_tick(rec: RolloutRecord, k: int) -> list[tuple[int, int]]:
    """(leader, follower) index pairs at tick k: same lane when known,
    otherwise an aligned corridor test; leader within FOLLOW_RANGE."""
    act = np.nonzero(rec.active[k])[0]
    pairs = []
    for j in act:
        sj = rec.states[k, j]
        best = None
        for i in act:
            if i == j:
                continue
            si = rec.states[k, i]
            lane_i, lane_j = rec.lane_ids[k, i], rec.lane_ids[k, j]
            dx, dy = si[0] - sj[0], si[1] - sj[1]
            fwd = dx * math.cos(sj[3]) + dy * math.sin(sj[3])
            if not (0.0 < fwd <= FOLLOW_RANGE):
                continue
            if lane_i >= 0 and lane_j >= 0:
                if lane_i != lane_j:
                    continue
            else:
                lat = -dx * math.sin(sj[3]) + dy * math.cos(sj[3])
                dh = (si[3] - sj[3] + math.pi) % (2 * math.pi) - math.pi
                if abs(lat) > 2.0 or abs(dh) > math.pi / 4:
                    continue
            if best is None or fwd < best[0]:
                best = (fwd, i)
        if best is not None:
            pairs.append((best[1], j))
    return pairs


def style_histograms(
    records: list[RolloutRecord],
    bins: dict[str, np.ndarray] | None = None,
) -> HistogramSet:
    """Car-following behavior distributions: follower acceleration, bumper
    gap, and time headway (gap / follower speed, undefined below 0.5 m/s)."""
    bins = {**DEFAULT_BINS, **(bins or {})}
    accel_samples: list[float] = []
    gap_samples: list[float] = []
    headway_samples: list[float] = []
    for rec in records:
        for k in range(rec.n_steps - 1):
            for i, j in _follow_pairs_tick(rec, k):
                si = rec.states[k, i]
                sj = rec.states[k, j]
                gap = (
                    math.hypot(si[0] - sj[0], si[1] - sj[1])
                    - 0.5 * rec.lengths[i]
                    - 0.5 * rec.lengths[j]
                )
                if gap <= 0 or gap > FOLLOW_RANGE:
                    continue
                accel_samples.append((rec.states[k + 1, j, 2] - sj[2]) / rec.tick)
                gap_samples.append(gap)
                if sj[2] >= HEADWAY_MIN_SPEED:
                    headway_samples.append(gap / sj[2])
    out = HistogramSet()
    for name, samples in (
        ("acceleration", accel_samples),
        ("relative_distance", gap_samples),
        ("time_headway", headway_samples),
    ):
        edges = bins[name]
        hist, _ = np.histogram(np.asarray(samples, dtype=np.float64), bins=edges)
        mass = hist.astype(np.float64)
        total = mass.sum()
        if total > 0:
            mass /= total
        out.bins[name] = edges
        out.masses[name] = mass
        out.n_samples[name] = len(samples)
    return out


def build_report(records: list[RolloutRecord], arrival_threshold: float = 20.0) -> dict:
    """One structured document with every aggregate the CLI emits."""
    rates = violation_rates(records)
    arrivals = arrival_time_errors(records, threshold=arrival_threshold)
    styles = style_histograms(records)
    return {
        "n_records": len(records),
        "violation_rates": {k: v.to_dict() for k, v in rates.items()},
        "arrival_time": arrivals.to_dict(),
        "style_histograms": styles.to_dict(),
    }
