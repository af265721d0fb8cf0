"""Top-down vector-graphic frames (SVG)."""

from __future__ import annotations

import math
from pathlib import Path

from .scenario.model import Scenario

ROAD_FILL = "#d8d8d8"
JUNCTION_FILL = "#c4c4c4"
LANE_STROKE = "#9a9a9a"
AGENT_FILL = "#3274b5"
ARRIVED_FILL = "#7fb069"


def _poly_points(points) -> str:
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in points)


def render_frame(scenario: Scenario, states: dict[int, tuple], path: str | Path, scale: float = 2.0) -> None:
    """states: agent id -> (x, y, heading, length, width, active)."""
    xs = [p[0] for lane in scenario.map.lanes for p in lane.centerline]
    ys = [p[1] for lane in scenario.map.lanes for p in lane.centerline]
    pad = 20.0
    x0, x1 = min(xs) - pad, max(xs) + pad
    y0, y1 = min(ys) - pad, max(ys) + pad
    w = (x1 - x0) * scale
    h = (y1 - y0) * scale
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" height="{h:.0f}" '
        f'viewBox="{x0:.1f} {-y1:.1f} {x1 - x0:.1f} {y1 - y0:.1f}">',
        # world y grows upward; flip into SVG coordinates
        f'<g transform="scale(1,-1)">',
    ]
    for road in scenario.map.roads:
        parts.append(f'<polygon points="{_poly_points(road.boundary)}" fill="{ROAD_FILL}"/>')
    for junction in scenario.map.junctions:
        parts.append(
            f'<polygon points="{_poly_points(junction.boundary)}" fill="{JUNCTION_FILL}"/>'
        )
    for lane in scenario.map.lanes:
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in lane.centerline)
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{LANE_STROKE}" stroke-width="0.15"/>'
        )
    for aid, (x, y, heading, length, width, active) in sorted(states.items()):
        if not active:
            continue
        deg = math.degrees(heading)
        parts.append(
            f'<g transform="translate({x:.2f},{y:.2f}) rotate({deg:.1f})">'
            f'<rect x="{-length / 2:.2f}" y="{-width / 2:.2f}" width="{length:.2f}" '
            f'height="{width:.2f}" fill="{AGENT_FILL}" stroke="black" stroke-width="0.1"/>'
            f'<circle cx="{length / 2 - 0.4:.2f}" cy="0" r="0.3" fill="white"/></g>'
        )
    parts.append("</g></svg>")
    Path(path).write_text("\n".join(parts))


def render_histogram(
    bin_edges,
    mass,
    path: str | Path,
    title: str = "",
    width: float = 480.0,
    height: float = 280.0,
) -> None:
    """Minimal SVG bar chart for metric distributions."""
    n = len(mass)
    pad = 40.0
    peak = max(max(mass), 1e-12)
    bar_w = (width - 2 * pad) / max(n, 1)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}">',
        f'<text x="{width / 2:.0f}" y="16" text-anchor="middle" font-size="13">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
    ]
    for i, m in enumerate(mass):
        h = (height - 2 * pad) * (m / peak)
        x = pad + i * bar_w
        parts.append(
            f'<rect x="{x:.1f}" y="{height - pad - h:.1f}" width="{bar_w * 0.9:.1f}" '
            f'height="{h:.1f}" fill="{AGENT_FILL}"/>'
        )
    for frac in (0.0, 0.5, 1.0):
        i = int(frac * (len(bin_edges) - 1))
        x = pad + frac * (width - 2 * pad)
        parts.append(
            f'<text x="{x:.0f}" y="{height - pad + 14:.0f}" text-anchor="middle" '
            f'font-size="10">{bin_edges[i]:.1f}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


def render_world(engine, path: str | Path) -> None:
    states = {}
    for aid, rt in engine.world.agents.items():
        states[aid] = (
            rt.state.x,
            rt.state.y,
            rt.state.heading,
            rt.attributes.length,
            rt.attributes.width,
            rt.active,
        )
    render_frame(engine.scenario, states, path)
