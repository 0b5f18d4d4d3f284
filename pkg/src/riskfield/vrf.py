"""Vulnerable-road-user risk field.

Anisotropic rational kernel around a pedestrian or cyclist, aligned with
the heading, with speed-adaptive half-axes and a forward-shifted center.
Unlike the motorized-agent field it carries no severity weighting; the
relative strength is set by the peak parameter H.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import GridSpec, cell_points_world
from .scenario import AgentState

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False


class VrfParamError(ValueError):
    pass


@dataclass(frozen=True)
class VrfParams:
    H: float = 2.0
    gamma_l: float = 2.0
    delta_w: float = 1.0
    k_pl: float = 0.8
    k_pw: float = 0.3
    lambda_f: float = 0.5

    def __post_init__(self):
        if self.H <= 0:
            raise VrfParamError("H must be > 0")
        if not self.gamma_l > self.delta_w > 0:
            raise VrfParamError("need gamma_l > delta_w > 0")
        if min(self.k_pl, self.k_pw, self.lambda_f) < 0:
            raise VrfParamError("speed gains and forward-bias gain must be >= 0")


if _HAVE_NUMBA:

    @njit(cache=True)
    def _vrf_kernel(px, py, tx, ty, cx, cy, a_ax, b_ax, h):
        out = np.empty(px.size)
        for i in range(px.size):
            rx = px[i] - cx
            ry = py[i] - cy
            d_par = rx * tx + ry * ty
            ex = rx - d_par * tx
            ey = ry - d_par * ty
            out[i] = h / ((d_par / a_ax) ** 2 + (ex * ex + ey * ey) / (b_ax * b_ax) + 1.0)
        return out


def _vrf_values(px: np.ndarray, py: np.ndarray, vru: AgentState, params: VrfParams) -> np.ndarray:
    # Velocity is heading-aligned under the scenario model: v_par = speed,
    # v_perp = 0. The lateral speed term is kept for future 2D velocities.
    shape = np.shape(px)
    px = np.ascontiguousarray(px, dtype=float).reshape(-1)
    py = np.ascontiguousarray(py, dtype=float).reshape(-1)
    tx, ty = math.cos(vru.heading), math.sin(vru.heading)
    v_par = vru.speed
    v_perp = 0.0
    mu_f = params.lambda_f * abs(v_par)
    cx = vru.x + mu_f * tx
    cy = vru.y + mu_f * ty
    a_ax = params.gamma_l + params.k_pl * abs(v_par)
    b_ax = params.delta_w + params.k_pw * abs(v_perp)
    if _HAVE_NUMBA:
        vals = _vrf_kernel(px, py, tx, ty, cx, cy, a_ax, b_ax, params.H)
    else:
        rx = px - cx
        ry = py - cy
        d_par = rx * tx + ry * ty
        ex = rx - d_par * tx
        ey = ry - d_par * ty
        vals = params.H / ((d_par / a_ax) ** 2 + (ex * ex + ey * ey) / (b_ax * b_ax) + 1.0)
    return vals.reshape(shape)


def vrf(point, vru: AgentState, params: VrfParams) -> float:
    """Field value at one point; equals H only at the shifted center."""
    if not vru.is_vru:
        raise VrfParamError(f"agent {vru.id!r} has kind {vru.kind!r}, expected a VRU")
    p = np.asarray(point, dtype=float).reshape(2)
    return float(_vrf_values(p[:1], p[1:], vru, params)[0])


def vrf_grid(grid: GridSpec, vru: AgentState, params: VrfParams) -> np.ndarray:
    """Rasterize over all cell centers (the kernel has unbounded support)."""
    if not vru.is_vru:
        raise VrfParamError(f"agent {vru.id!r} has kind {vru.kind!r}, expected a VRU")
    xs, ys = cell_points_world(grid)
    return _vrf_values(xs, ys, vru, params)
