"""BEV grid primitives, Frenet projection onto polyline paths, and
oriented-footprint rasterization.

All functions here are pure and operate on immutable inputs, so they are
safe for data-parallel per-cell evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# Hard cap on cells per axis; guards against accidental huge allocations
# from a bad extent/resolution combination.
MAX_CELLS_PER_AXIS = 4096

_DEDUP_EPS = 1e-12


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Square BEV grid centered on a world point.

    Cells are indexed (row, col): row follows the grid y axis from y_min
    upward, col follows the grid x axis from x_min rightward. With
    orientation != 0 the grid axes are rotated by that angle about the
    center.
    """

    center: tuple[float, float]
    extent: float = 50.0
    resolution: float = 0.25
    orientation: float = 0.0

    def __post_init__(self):
        if self.resolution <= 0:
            raise GeometryError(f"grid resolution must be > 0, got {self.resolution}")
        if self.extent <= 0:
            raise GeometryError(f"grid extent must be > 0, got {self.extent}")
        if self.n > MAX_CELLS_PER_AXIS:
            raise GeometryError(
                f"grid would have {self.n} cells per axis, max is {MAX_CELLS_PER_AXIS}"
            )

    @property
    def n(self) -> int:
        return int(round(2.0 * self.extent / self.resolution))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def _rot(self) -> tuple[float, float]:
        return math.cos(self.orientation), math.sin(self.orientation)

    def world_to_grid(self, points: np.ndarray) -> np.ndarray:
        """World coordinates -> grid-frame coordinates (origin at center)."""
        p = np.asarray(points, dtype=float)
        dx = p[..., 0] - self.center[0]
        dy = p[..., 1] - self.center[1]
        c, s = self._rot()
        return np.stack([c * dx + s * dy, -s * dx + c * dy], axis=-1)

    def grid_to_world(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        c, s = self._rot()
        x = c * p[..., 0] - s * p[..., 1] + self.center[0]
        y = s * p[..., 0] + c * p[..., 1] + self.center[1]
        return np.stack([x, y], axis=-1)

    def axis_centers(self) -> np.ndarray:
        """Cell-center coordinates along one grid axis (shared by x and y)."""
        return -self.extent + (np.arange(self.n) + 0.5) * self.resolution

    def cell_centers_world(self) -> tuple[np.ndarray, np.ndarray]:
        """(xs, ys) world coordinates of all cell centers, each shape (n, n)."""
        ax = self.axis_centers()
        gx, gy = np.meshgrid(ax, ax, indexing="xy")  # gx varies along cols
        c, s = self._rot()
        xs = c * gx - s * gy + self.center[0]
        ys = s * gx + c * gy + self.center[1]
        return xs, ys


@lru_cache(maxsize=8)
def cell_points_world(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Cached, read-only cell-center coordinate arrays for a grid."""
    xs, ys = grid.cell_centers_world()
    xs.setflags(write=False)
    ys.setflags(write=False)
    return xs, ys


def world_to_cell(point, grid: GridSpec) -> tuple[int, int, bool]:
    """Map a world point to (row, col, inside)."""
    g = grid.world_to_grid(np.asarray(point, dtype=float))
    col = int(math.floor((g[0] + grid.extent) / grid.resolution))
    row = int(math.floor((g[1] + grid.extent) / grid.resolution))
    inside = 0 <= row < grid.n and 0 <= col < grid.n
    return row, col, inside


def cell_to_world(cell: tuple[int, int], grid: GridSpec) -> np.ndarray:
    """World coordinates of a cell center."""
    row, col = cell
    gx = -grid.extent + (col + 0.5) * grid.resolution
    gy = -grid.extent + (row + 0.5) * grid.resolution
    return grid.grid_to_world(np.array([gx, gy]))


@dataclass
class RiskGrid:
    """Scalar risk density sampled at the cell centers of a GridSpec."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GeometryError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise GeometryError("risk grid contains non-finite values")
        if np.any(self.values < 0):
            raise GeometryError("risk grid contains negative values")


def mean_curvature(points) -> float:
    """Arithmetic mean of Menger curvature at interior vertices.

    Degenerate triples (repeated or collinear points) contribute 0.
    Polylines with fewer than 3 points have no interior vertex and return 0.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        return 0.0
    a, b, c = pts[:-2], pts[1:-1], pts[2:]
    ab = np.hypot(*(b - a).T)
    bc = np.hypot(*(c - b).T)
    ca = np.hypot(*(a - c).T)
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (
        c[:, 0] - a[:, 0]
    )
    denom = ab * bc * ca
    kappa = np.zeros(len(denom))
    ok = denom > _DEDUP_EPS
    kappa[ok] = 2.0 * np.abs(cross[ok]) / denom[ok]
    return float(np.mean(kappa))


class PathGeometry:
    """Polyline path with arc-length metadata and an optional speed profile.

    Consecutive duplicate vertices are dropped so cumulative arc length is
    strictly increasing. A single surviving vertex marks a degenerate
    (stationary) path with total_length 0.
    """

    __slots__ = ("points", "cum_s", "seg_len", "total_length", "mean_curvature", "speeds")

    def __init__(self, points, speeds=None):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        if len(pts) == 0:
            raise GeometryError("path needs at least one point")
        sp = None if speeds is None else np.asarray(speeds, dtype=float).reshape(-1)
        if sp is not None and len(sp) != len(pts):
            raise GeometryError("speed profile length does not match point count")
        if len(pts) > 1:
            keep = np.ones(len(pts), dtype=bool)
            keep[1:] = np.hypot(*(pts[1:] - pts[:-1]).T) > _DEDUP_EPS
            pts = pts[keep]
            if sp is not None:
                sp = sp[keep]
        self.points = pts
        self.speeds = sp
        if len(pts) > 1:
            self.seg_len = np.hypot(*(pts[1:] - pts[:-1]).T)
            self.cum_s = np.concatenate([[0.0], np.cumsum(self.seg_len)])
        else:
            self.seg_len = np.zeros(0)
            self.cum_s = np.zeros(1)
        self.total_length = float(self.cum_s[-1])
        self.mean_curvature = mean_curvature(pts)

    @property
    def is_degenerate(self) -> bool:
        return len(self.points) < 2

    def speed_at(self, s):
        """Linear interpolation of the speed profile at arc length s (0 if absent)."""
        if self.speeds is None:
            return np.zeros_like(np.asarray(s, dtype=float))
        return np.interp(s, self.cum_s, self.speeds)

    def point_at(self, s: float) -> np.ndarray:
        """World point at arc length s (clamped to the path)."""
        if self.is_degenerate:
            return self.points[0].copy()
        s = min(max(s, 0.0), self.total_length)
        j = int(np.searchsorted(self.cum_s, s, side="right") - 1)
        j = min(j, len(self.seg_len) - 1)
        t = (s - self.cum_s[j]) / self.seg_len[j]
        return self.points[j] + t * (self.points[j + 1] - self.points[j])

    def normal_at(self, s: float) -> np.ndarray:
        """Left-hand unit normal of the segment containing arc length s."""
        if self.is_degenerate:
            return np.array([0.0, 1.0])
        s = min(max(s, 0.0), self.total_length)
        j = int(np.searchsorted(self.cum_s, s, side="right") - 1)
        j = min(j, len(self.seg_len) - 1)
        d = (self.points[j + 1] - self.points[j]) / self.seg_len[j]
        return np.array([-d[1], d[0]])


@dataclass(frozen=True)
class FrenetCoord:
    s: float
    d: float
    in_domain: bool


def polyline_projection_batch(points: np.ndarray, path: PathGeometry):
    """Project points onto a path, returning per-point projection data.

    Returns (dist2, s, seg_idx, seg_t, interior). Ties between segments are
    broken toward the lower segment index. `interior` is False when the
    closest point clamps to the first or last vertex of the polyline.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    npts = len(p)
    if path.is_degenerate:
        d = path.points[0] - p
        dist2 = d[:, 0] ** 2 + d[:, 1] ** 2
        zeros = np.zeros(npts)
        return dist2, zeros, np.zeros(npts, dtype=int), zeros, np.zeros(npts, dtype=bool)

    px, py = p[:, 0], p[:, 1]
    best_d2 = np.full(npts, np.inf)
    best_j = np.zeros(npts, dtype=int)
    best_t = np.zeros(npts)
    verts = path.points
    for j in range(len(verts) - 1):
        ax, ay = verts[j]
        dx, dy = verts[j + 1] - verts[j]
        inv_len2 = 1.0 / (dx * dx + dy * dy)
        t = np.clip(((px - ax) * dx + (py - ay) * dy) * inv_len2, 0.0, 1.0)
        fx = ax + t * dx
        fy = ay + t * dy
        d2 = (px - fx) ** 2 + (py - fy) ** 2
        better = d2 < best_d2
        best_d2 = np.where(better, d2, best_d2)
        best_j = np.where(better, j, best_j)
        best_t = np.where(better, t, best_t)

    s = path.cum_s[best_j] + best_t * path.seg_len[best_j]
    nseg = len(verts) - 1
    interior = ~(((best_j == 0) & (best_t <= 0.0)) | ((best_j == nseg - 1) & (best_t >= 1.0)))
    return best_d2, s, best_j, best_t, interior


def project_frenet(point, path: PathGeometry) -> FrenetCoord:
    """Frenet coordinates (s, d) of a point relative to a path.

    d is signed positive to the left of the path direction. in_domain is
    False when the closest point clamps to either polyline endpoint; the
    field modules treat out-of-domain points as zero contribution.
    """
    p = np.asarray(point, dtype=float).reshape(1, 2)
    dist2, s, j, t, interior = polyline_projection_batch(p, path)
    if path.is_degenerate:
        return FrenetCoord(0.0, float(np.sqrt(dist2[0])), False)
    j0, t0 = int(j[0]), float(t[0])
    a = path.points[j0]
    seg = path.points[j0 + 1] - a
    foot = a + t0 * seg
    r = p[0] - foot
    cross = seg[0] * r[1] - seg[1] * r[0]
    d = math.copysign(math.sqrt(dist2[0]), cross) if cross != 0.0 else math.sqrt(dist2[0])
    return FrenetCoord(float(s[0]), d, bool(interior[0]))


def rasterize_footprint(agent, grid: GridSpec, inflation: float = 0.0) -> np.ndarray:
    """Cells whose centers lie inside the agent's oriented bbox inflated by
    `inflation` meters. Returns an (M, 2) int array of (row, col) pairs;
    empty when the footprint misses the grid. Boundary cells (center exactly
    on the inflated box edge) are included.
    """
    half_l = agent.length / 2.0 + inflation
    half_w = agent.width / 2.0 + inflation
    ch, sh = math.cos(agent.heading), math.sin(agent.heading)
    cx, cy = agent.x, agent.y

    corners = np.array(
        [
            [cx + ch * ux - sh * uy, cy + sh * ux + ch * uy]
            for ux in (-half_l, half_l)
            for uy in (-half_w, half_w)
        ]
    )
    gc = grid.world_to_grid(corners)
    lo = np.floor((gc.min(axis=0) + grid.extent) / grid.resolution).astype(int) - 1
    hi = np.ceil((gc.max(axis=0) + grid.extent) / grid.resolution).astype(int) + 1
    col0, row0 = np.maximum(lo, 0)
    col1, row1 = np.minimum(hi, grid.n - 1)
    if col0 > col1 or row0 > row1:
        return np.empty((0, 2), dtype=int)

    ax = grid.axis_centers()
    gx, gy = np.meshgrid(ax[col0 : col1 + 1], ax[row0 : row1 + 1], indexing="xy")
    w = grid.grid_to_world(np.stack([gx, gy], axis=-1))
    rx = w[..., 0] - cx
    ry = w[..., 1] - cy
    u = ch * rx + sh * ry
    v = -sh * rx + ch * ry
    inside = (np.abs(u) <= half_l) & (np.abs(v) <= half_w)
    rows, cols = np.nonzero(inside)
    return np.stack([rows + row0, cols + col0], axis=1)


def points_in_polygon(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Even-odd rule point-in-polygon test, vectorized over points."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    poly = np.asarray(polygon, dtype=float)
    px, py = p[:, 0], p[:, 1]
    inside = np.zeros(len(p), dtype=bool)
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        crosses = (y1 > py) != (y2 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = (x2 - x1) * (py - y1) / (y2 - y1) + x1
        inside ^= crosses & (px < xi)
    return inside


def points_in_any_polygon(points: np.ndarray, polygons) -> np.ndarray:
    """Union membership over a list of simple polygons."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    inside = np.zeros(len(p), dtype=bool)
    for poly in polygons:
        inside |= points_in_polygon(p, poly)
    return inside


def _segments_intersect(p1, p2, p3, p4) -> bool:
    """Proper intersection test for open segments (shared endpoints ignored)."""

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(v) < 1e-12:
            return 0
        return 1 if v > 0 else -1

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def polygon_is_simple(polygon: np.ndarray) -> bool:
    """True when no two non-adjacent edges intersect."""
    poly = np.asarray(polygon, dtype=float)
    n = len(poly)
    if n < 3:
        return False
    edges = [(poly[i], poly[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(*edges[i], *edges[j]):
                return False
    return True
