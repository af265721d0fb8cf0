"""2D geometry primitives shared by the map, engine and metrics layers.

Conventions: world frame, meters, headings in radians, CCW positive,
0 = +x axis, normalized to (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    theta = math.fmod(theta, TWO_PI)
    if theta <= -math.pi:
        theta += TWO_PI
    elif theta > math.pi:
        theta -= TWO_PI
    return theta


def wrap_angle_array(theta: np.ndarray) -> np.ndarray:
    out = np.remainder(theta, TWO_PI)
    out[out > math.pi] -= TWO_PI
    return out


class Polyline:
    """A 2D polyline with cached arc-length tables.

    Supports point/heading lookup by arc length and closest-point projection
    into Frenet coordinates (s = progress, d = signed lateral offset,
    left-of-travel positive).
    """

    __slots__ = ("pts", "seg_vec", "seg_len", "cum_s", "length", "headings")

    def __init__(self, pts) -> None:
        pts = np.asarray(pts, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
            raise ValueError("polyline needs >= 2 2D points")
        self.pts = pts
        self.seg_vec = pts[1:] - pts[:-1]
        self.seg_len = np.hypot(self.seg_vec[:, 0], self.seg_vec[:, 1])
        if np.any(self.seg_len == 0.0):
            raise ValueError("polyline has repeated consecutive points")
        self.cum_s = np.concatenate(([0.0], np.cumsum(self.seg_len)))
        self.length = float(self.cum_s[-1])
        self.headings = np.arctan2(self.seg_vec[:, 1], self.seg_vec[:, 0])

    def point_at(self, s: float) -> tuple[float, float]:
        x, y, _ = self.pose_at(s)
        return x, y

    def pose_at(self, s: float) -> tuple[float, float, float]:
        """Position and tangent heading at arc length s (clamped to ends)."""
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.cum_s, s, side="right")) - 1
        i = min(max(i, 0), len(self.seg_len) - 1)
        t = (s - self.cum_s[i]) / self.seg_len[i]
        p = self.pts[i] + t * self.seg_vec[i]
        return float(p[0]), float(p[1]), float(self.headings[i])

    def project(self, point) -> tuple[float, float]:
        """Frenet projection (s, d) of a point; ties resolved toward smaller s."""
        p = np.asarray(point, dtype=np.float64)
        rel = p - self.pts[:-1]
        dot = rel[:, 0] * self.seg_vec[:, 0] + rel[:, 1] * self.seg_vec[:, 1]
        denom = self.seg_len**2
        safe = denom > 0.0  # squared length can underflow for subnormal segments
        t = np.where(safe, dot / np.where(safe, denom, 1.0), 0.0)
        t = np.clip(t, 0.0, 1.0)
        foot = self.pts[:-1] + t[:, None] * self.seg_vec
        diff = p - foot
        dist2 = diff[:, 0] ** 2 + diff[:, 1] ** 2
        # argmin returns the first (smallest-s) minimizer, which is the tie rule
        i = int(np.argmin(dist2))
        s = float(self.cum_s[i] + t[i] * self.seg_len[i])
        cross = self.seg_vec[i, 0] * diff[i, 1] - self.seg_vec[i, 1] * diff[i, 0]
        d = math.copysign(math.sqrt(float(dist2[i])), cross) if dist2[i] > 0 else 0.0
        return s, float(d)

    def resampled(self, spacing: float) -> np.ndarray:
        """Points at fixed arc-length spacing, endpoints included."""
        n = max(int(math.ceil(self.length / spacing)), 1)
        ss = np.linspace(0.0, self.length, n + 1)
        return np.array([self.point_at(s) for s in ss])


def frenet_project(polyline_pts, point) -> tuple[float, float]:
    """Module-level convenience wrapper over Polyline.project."""
    return Polyline(polyline_pts).project(point)


# ---------------------------------------------------------------------------
# Oriented-rectangle collision (separating axis theorem)


def rect_corners(x: float, y: float, heading: float, length: float, width: float) -> np.ndarray:
    hl, hw = 0.5 * length, 0.5 * width
    c, s = math.cos(heading), math.sin(heading)
    local = ((hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw))
    return np.array([(x + dx * c - dy * s, y + dx * s + dy * c) for dx, dy in local])


def rects_overlap(c1: np.ndarray, c2: np.ndarray) -> bool:
    """SAT test for two convex quads given as 4x2 corner arrays."""
    for corners in (c1, c2):
        for i in range(2):  # rectangles: two unique edge normals each
            ex, ey = corners[(i + 1) % 4] - corners[i]
            ax, ay = -ey, ex
            p1 = c1 @ (ax, ay)
            p2 = c2 @ (ax, ay)
            if p1.max() < p2.min() or p2.max() < p1.min():
                return False
    return True


# ---------------------------------------------------------------------------
# Polygons


def point_in_polygon(point, polygon: np.ndarray) -> bool:
    """Even-odd rule; polygon given as an (n, 2) vertex array, implicitly closed."""
    x, y = float(point[0]), float(point[1])
    inside = False
    n = len(polygon)
    j = n - 1
    for i in range(n):
        xi, yi = polygon[i]
        xj, yj = polygon[j]
        if (yi > y) != (yj > y):
            x_cross = xi + (y - yi) * (xj - xi) / (yj - yi)
            if x < x_cross:
                inside = not inside
        j = i
    return inside


def polygon_is_simple(polygon: np.ndarray) -> bool:
    """True when no two non-adjacent edges intersect."""
    n = len(polygon)
    if n < 3:
        return False
    edges = [(polygon[i], polygon[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_intersect(*edges[i], *edges[j]):
                return False
    return True


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = float((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        return (v > 0) - (v < 0)

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return False


def polygon_bbox(polygon: np.ndarray) -> tuple[float, float, float, float]:
    return (
        float(polygon[:, 0].min()),
        float(polygon[:, 1].min()),
        float(polygon[:, 0].max()),
        float(polygon[:, 1].max()),
    )


@dataclass
class GridIndex:
    """Uniform hash grid mapping cells to payload ids, for broad-phase lookups."""

    cell: float = 25.0

    def __post_init__(self) -> None:
        self._cells: dict[tuple[int, int], list] = {}

    def _key(self, x: float, y: float) -> tuple[int, int]:
        return (int(math.floor(x / self.cell)), int(math.floor(y / self.cell)))

    def insert_bbox(self, item, bbox) -> None:
        x0, y0, x1, y1 = bbox
        kx0, ky0 = self._key(x0, y0)
        kx1, ky1 = self._key(x1, y1)
        for kx in range(kx0, kx1 + 1):
            for ky in range(ky0, ky1 + 1):
                self._cells.setdefault((kx, ky), []).append(item)

    def query_point(self, x: float, y: float) -> list:
        return self._cells.get(self._key(x, y), [])

    def query_radius(self, x: float, y: float, radius: float) -> list:
        kx0, ky0 = self._key(x - radius, y - radius)
        kx1, ky1 = self._key(x + radius, y + radius)
        seen: dict[int, object] = {}
        for kx in range(kx0, kx1 + 1):
            for ky in range(ky0, ky1 + 1):
                for item in self._cells.get((kx, ky), ()):
                    seen.setdefault(id(item), item)
        return list(seen.values())
