"""Motorized-agent risk field.

Each predicted centerline carries a swept Gaussian cross-section: kernel
height decays parabolically toward the path end while the lateral width
grows with path length, average curvature, and local speed. Per-hypothesis
fields are weighted by hypothesis probability and a path-aggregated
severity term and summed into the agent field.

For tractable rasterization the Gaussian cross-section is truncated at
``trunc_sigmas`` lateral standard deviations (discarding relative
contributions below exp(-trunc_sigmas^2 / 2)); the scalar evaluators apply
the same cutoff so grid and point evaluations agree exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import GridSpec, PathGeometry, cell_points_world, polyline_projection_batch
from .predictor import HypothesisSet
from .scenario import AgentState

try:  # optional compiled kernels; the numpy fallback is exact but slower
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

# Fallback masses for the VRU-as-MAF ablation, where vulnerable road users
# (which carry no mass in the data model) are routed through this field.
DEFAULT_VRU_MASS = {"pedestrian": 75.0, "cyclist": 90.0}


class FieldError(ValueError):
    pass


def _default_type_factor() -> dict:
    return {"car": 1.0, "truck": 2.5, "motorcycle": 0.7, "cyclist": 0.4, "pedestrian": 0.3}


@dataclass(frozen=True)
class MafParams:
    """Tunable coefficients of the motorized-agent field.

    Defaults are engineering choices fixed in the test fixtures: q is tuned
    so a 1.5 t car at 10 m/s over a 4 s horizon peaks near 1.0 after
    severity weighting.
    """

    q: float = 4.0e-7
    b: float = 0.05
    k: float = 10.0
    c: float = 1.0
    k_v: float = 0.15
    sigma_min: float = 0.5
    sigma_max: float = 8.0
    alpha: float = 0.05
    beta: float = 1.5
    gamma_m: float = 1.0
    type_factor: dict = field(default_factory=_default_type_factor)
    trunc_sigmas: float = 5.0

    def __post_init__(self):
        if self.q < 0:
            raise FieldError("q must be >= 0")
        if self.c <= 0:
            raise FieldError("c must be > 0")
        if not 0 < self.sigma_min <= self.sigma_max:
            raise FieldError("need 0 < sigma_min <= sigma_max")
        if any(v <= 0 for v in self.type_factor.values()):
            raise FieldError("type_factor values must be > 0")
        if self.trunc_sigmas <= 0:
            raise FieldError("trunc_sigmas must be > 0")


def _width_slope(path: PathGeometry, params: MafParams) -> float:
    return params.b + params.k * path.mean_curvature


def sigma(s, path: PathGeometry, params: MafParams, velocity_variant: bool = True):
    """Lateral cross-section width at arc length s, clamped to
    [sigma_min, sigma_max]. The speed term k_v*|v(s)| is dropped when
    velocity_variant is False."""
    s = np.asarray(s, dtype=float)
    w = _width_slope(path, params) * s + params.c
    if velocity_variant:
        w = w + params.k_v * np.abs(path.speed_at(s))
    return np.clip(w, params.sigma_min, params.sigma_max)


def height(s, path: PathGeometry, params: MafParams):
    """Parabolic kernel height: peaks at s=0, reaches 0 at the path end."""
    s = np.asarray(s, dtype=float)
    return params.q * (s - path.total_length) ** 2


def _agent_mass(agent: AgentState) -> float:
    if agent.mass_kg is not None:
        return agent.mass_kg
    try:
        return DEFAULT_VRU_MASS[agent.kind]
    except KeyError:
        raise FieldError(f"no mass available for agent kind {agent.kind!r}") from None


def _type_factor(agent: AgentState, params: MafParams) -> float:
    try:
        return params.type_factor[agent.kind]
    except KeyError:
        raise FieldError(f"no type factor configured for kind {agent.kind!r}") from None


def virtual_mass(agent: AgentState, v: float, params: MafParams) -> float:
    """Severity proxy: mass * type factor * (alpha*|v|^beta + gamma_m)."""
    m = _agent_mass(agent) * _type_factor(agent, params)
    return m * (params.alpha * abs(v) ** params.beta + params.gamma_m)


def path_severity(
    agent: AgentState,
    path: PathGeometry,
    params: MafParams,
    at_current_speed: bool = False,
) -> float:
    """Path-aggregated severity: mean of the virtual mass over arc length,
    by the trapezoid rule over the per-vertex speed profile.

    Zero-length paths (and the at_current_speed ablation) fall back to the
    virtual mass at the agent's current speed.
    """
    if at_current_speed or path.total_length <= 0:
        return virtual_mass(agent, agent.speed, params)
    speeds = path.speeds if path.speeds is not None else np.full(len(path.points), agent.speed)
    m = _agent_mass(agent) * _type_factor(agent, params)
    integrand = m * (params.alpha * np.abs(speeds) ** params.beta + params.gamma_m)
    return float(_trapezoid(integrand, path.cum_s) / path.total_length)


if _HAVE_NUMBA:

    @njit(cache=True, fastmath=False)
    def _maf_finish(best_d2, best_jt, cum_s, seg_len, speeds, total, q, slope, kv, c0, smin, smax, trunc):
        npts = best_d2.size
        nseg = seg_len.size
        out = np.zeros(npts)
        for i in range(npts):
            jt = best_jt[i]
            j = int(jt)
            if j >= nseg:
                j = nseg - 1
            t = jt - j
            if (j == 0 and t <= 0.0) or (j == nseg - 1 and t >= 1.0):
                continue
            s = cum_s[j] + t * seg_len[j]
            v = speeds[j] + t * (speeds[j + 1] - speeds[j])
            sig = slope * s + kv * abs(v) + c0
            if sig < smin:
                sig = smin
            elif sig > smax:
                sig = smax
            lim = trunc * sig
            if best_d2[i] > lim * lim:
                continue
            rel = s - total
            out[i] = q * rel * rel * math.exp(-best_d2[i] / (2.0 * sig * sig))
        return out

    @njit(cache=True, fastmath=False)
    def _maf_kernel(px, py, vx, vy, cum_s, seg_len, speeds, total, q, slope, kv, c0, smin, smax, trunc):
        npts = px.size
        nseg = seg_len.size
        best_d2 = np.full(npts, np.inf)
        # segment index and parameter packed as j + t so the hot loop keeps
        # two running arrays of plain selects (vectorizable); t = 1 decodes
        # as (j + 1, 0), the same geometric point
        best_jt = np.zeros(npts)
        for j in range(nseg):
            ax = vx[j]
            ay = vy[j]
            dx = vx[j + 1] - ax
            dy = vy[j + 1] - ay
            inv = 1.0 / (dx * dx + dy * dy)
            jf = float(j)
            for i in range(npts):
                t = ((px[i] - ax) * dx + (py[i] - ay) * dy) * inv
                t = min(max(t, 0.0), 1.0)
                ex = px[i] - (ax + t * dx)
                ey = py[i] - (ay + t * dy)
                d2 = ex * ex + ey * ey
                take = d2 < best_d2[i]
                best_d2[i] = d2 if take else best_d2[i]
                best_jt[i] = (jf + t) if take else best_jt[i]
        return _maf_finish(
            best_d2, best_jt, cum_s, seg_len, speeds, total, q, slope, kv, c0, smin, smax, trunc
        )


def _hypothesis_values(px: np.ndarray, py: np.ndarray, path: PathGeometry, params: MafParams, velocity_variant: bool) -> np.ndarray:
    """Per-point field values for one hypothesis (shared by scalar and grid
    evaluation so both agree exactly). px, py are flat coordinate arrays."""
    px = np.ascontiguousarray(px, dtype=float).reshape(-1)
    py = np.ascontiguousarray(py, dtype=float).reshape(-1)
    if path.is_degenerate or path.total_length <= 0:
        return np.zeros(px.size)
    speeds = path.speeds if path.speeds is not None else np.zeros(len(path.points))
    kv = params.k_v if velocity_variant else 0.0
    slope = _width_slope(path, params)
    if _HAVE_NUMBA:
        return _maf_kernel(
            px,
            py,
            np.ascontiguousarray(path.points[:, 0]),
            np.ascontiguousarray(path.points[:, 1]),
            path.cum_s,
            path.seg_len,
            np.ascontiguousarray(speeds, dtype=float),
            path.total_length,
            params.q,
            slope,
            kv,
            params.c,
            params.sigma_min,
            params.sigma_max,
            params.trunc_sigmas,
        )
    d2, s, j, t, interior = polyline_projection_batch(np.stack([px, py], axis=1), path)
    v = speeds[j] + t * (speeds[j + 1] - speeds[j])
    sig = np.clip(slope * s + kv * np.abs(v) + params.c, params.sigma_min, params.sigma_max)
    vals = params.q * (s - path.total_length) ** 2 * np.exp(-d2 / (2.0 * sig**2))
    vals[~interior] = 0.0
    vals[d2 > (params.trunc_sigmas * sig) ** 2] = 0.0
    return vals


def maf_hypothesis(point, path: PathGeometry, params: MafParams, velocity_variant: bool = True) -> float:
    """Field of a single hypothesis at one point; 0 outside the path domain."""
    p = np.asarray(point, dtype=float).reshape(2)
    return float(_hypothesis_values(p[:1], p[1:], path, params, velocity_variant)[0])


def _sigma_upper_bound(path: PathGeometry, params: MafParams, velocity_variant: bool) -> float:
    vmax = 0.0
    if velocity_variant and path.speeds is not None and len(path.speeds):
        vmax = float(np.max(np.abs(path.speeds)))
    slope = _width_slope(path, params)
    raw = max(params.c, slope * path.total_length + params.c) + params.k_v * vmax
    return float(np.clip(raw, params.sigma_min, params.sigma_max))


def _grid_window(grid: GridSpec, path: PathGeometry, lateral: float):
    """Grid window covering every cell whose nearest interior path point is
    within `lateral` meters: bbox of the path offset +-lateral along each
    segment normal (any in-domain point at offset d lies in the convex hull
    of the offset segment endpoints)."""
    a = path.points[:-1]
    b = path.points[1:]
    n = np.stack([-(b[:, 1] - a[:, 1]), b[:, 0] - a[:, 0]], axis=1) / path.seg_len[:, None]
    corners = np.concatenate(
        [a + lateral * n, a - lateral * n, b + lateral * n, b - lateral * n]
    )
    gp = grid.world_to_grid(corners)
    lo = np.floor((gp.min(axis=0) + grid.extent) / grid.resolution).astype(int) - 1
    hi = np.ceil((gp.max(axis=0) + grid.extent) / grid.resolution).astype(int) + 1
    col0, row0 = np.maximum(lo, 0)
    col1, row1 = np.minimum(hi, grid.n - 1)
    if col0 > col1 or row0 > row1:
        return None
    return row0, row1, col0, col1


def _hypothesis_window_values(
    grid: GridSpec, path: PathGeometry, params: MafParams, velocity_variant: bool
):
    """(window, values) for the cells that can carry nonzero field, or None."""
    if path.is_degenerate or path.total_length <= 0:
        return None
    lateral = params.trunc_sigmas * _sigma_upper_bound(path, params, velocity_variant)
    win = _grid_window(grid, path, lateral)
    if win is None:
        return None
    row0, row1, col0, col1 = win
    nrows = row1 - row0 + 1
    ncols = col1 - col0 + 1
    xs, ys = cell_points_world(grid)
    px = xs[row0 : row1 + 1, col0 : col1 + 1]
    py = ys[row0 : row1 + 1, col0 : col1 + 1]
    vals = _hypothesis_values(px, py, path, params, velocity_variant)
    return win, vals.reshape(nrows, ncols)


def maf_hypothesis_grid(
    grid: GridSpec, path: PathGeometry, params: MafParams, velocity_variant: bool = True
) -> np.ndarray:
    """Rasterize one hypothesis over the grid (cell-center evaluation)."""
    out = np.zeros(grid.shape)
    wv = _hypothesis_window_values(grid, path, params, velocity_variant)
    if wv is not None:
        (row0, row1, col0, col1), vals = wv
        out[row0 : row1 + 1, col0 : col1 + 1] = vals
    return out


def maf_agent(
    point,
    hypotheses: HypothesisSet,
    agent: AgentState,
    params: MafParams,
    velocity_variant: bool = True,
    severity_at_current_speed: bool = False,
) -> float:
    """Probability- and severity-weighted mixture over hypotheses at a point."""
    total = 0.0
    for h in hypotheses:
        sev = path_severity(agent, h.path, params, at_current_speed=severity_at_current_speed)
        total += h.probability * sev * maf_hypothesis(point, h.path, params, velocity_variant)
    return total


def maf_agent_grid(
    grid: GridSpec,
    hypotheses: HypothesisSet,
    agent: AgentState,
    params: MafParams,
    velocity_variant: bool = True,
    severity_at_current_speed: bool = False,
) -> np.ndarray:
    """Rasterized agent field: sum of weighted hypothesis rasters
    (accumulated on each hypothesis's nonzero window only)."""
    out = np.zeros(grid.shape)
    for h in hypotheses:
        if h.path.is_degenerate or h.path.total_length <= 0:
            continue
        wv = _hypothesis_window_values(grid, h.path, params, velocity_variant)
        if wv is None:
            continue
        sev = path_severity(agent, h.path, params, at_current_speed=severity_at_current_speed)
        (row0, row1, col0, col1), vals = wv
        out[row0 : row1 + 1, col0 : col1 + 1] += (h.probability * sev) * vals
    return out
