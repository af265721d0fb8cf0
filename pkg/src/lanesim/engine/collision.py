"""Pairwise collision detection over oriented vehicle rectangles."""

from __future__ import annotations

import numpy as np

from ..geometry import rect_corners, rects_overlap


def detect_collisions(states, attributes) -> list[tuple[int, int]]:
    """Index pairs (i < j) of overlapping footprints.

    `states` is a sequence with x/y/heading attributes, `attributes` a
    matching sequence with length/width. Broad phase on bounding circles,
    narrow phase separating-axis; each unordered pair reported once.
    """
    n = len(states)
    if n < 2:
        return []
    pos = np.array([(s.x, s.y) for s in states])
    radii = np.array([0.5 * np.hypot(a.length, a.width) for a in attributes])
    diff = pos[:, None, :] - pos[None, :, :]
    dist2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
    limit = (radii[:, None] + radii[None, :]) ** 2
    ii, jj = np.nonzero(np.triu(dist2 <= limit, k=1))
    out: list[tuple[int, int]] = []
    corners: dict[int, np.ndarray] = {}

    def corner(k: int) -> np.ndarray:
        c = corners.get(k)
        if c is None:
            s, a = states[k], attributes[k]
            c = rect_corners(s.x, s.y, s.heading, a.length, a.width)
            corners[k] = c
        return c

    for i, j in zip(ii.tolist(), jj.tolist()):
        if rects_overlap(corner(i), corner(j)):
            out.append((i, j))
    return out
