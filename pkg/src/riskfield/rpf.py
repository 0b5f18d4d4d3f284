"""Static topology-aware road penalty field.

Off-road indicator plus a Gaussian exposure kernel around every non-ego
lane centerline, with separate magnitudes and widths for same- and
opposite-direction lanes. Independent of dynamic agents, so grids are
precomputed once per map/grid pose and reused.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GridSpec, PathGeometry, RiskGrid, cell_points_world, points_in_any_polygon, polyline_projection_batch
from .scenario import LaneGraph


class RpfParamError(ValueError):
    pass


@dataclass(frozen=True)
class RpfParams:
    lambda_off: float = 5.0
    lambda_opp: float = 1.0
    lambda_same: float = 0.3
    sigma_same: float = 1.2
    sigma_opp: float = 1.2

    def __post_init__(self):
        if not self.lambda_off > self.lambda_opp > self.lambda_same >= 0:
            raise RpfParamError(
                "penalty magnitudes must satisfy lambda_off > lambda_opp > lambda_same >= 0 "
                f"(got {self.lambda_off}, {self.lambda_opp}, {self.lambda_same})"
            )
        if self.sigma_same <= 0 or self.sigma_opp <= 0:
            raise RpfParamError("lane kernel widths must be > 0")


def _lane_terms(lane_graph: LaneGraph, ego_lane_id: str, include_ego_lane: bool):
    """(lambda, sigma, PathGeometry) per contributing lane, in map order."""
    terms = []
    for lane in lane_graph.lanes:
        if lane.id == ego_lane_id and not include_ego_lane:
            continue
        is_opp = lane.direction == "opposite"
        terms.append((is_opp, PathGeometry(lane.points)))
    return terms


def _rpf_values(
    points: np.ndarray,
    lane_graph: LaneGraph,
    params: RpfParams,
    ego_lane_id: str | None = None,
    include_ego_lane: bool = False,
) -> np.ndarray:
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    ego_lane = lane_graph.ego_lane_id if ego_lane_id is None else ego_lane_id
    on_road = points_in_any_polygon(p, lane_graph.drivable)
    out = params.lambda_off * (~on_road).astype(float)
    for is_opp, path in _lane_terms(lane_graph, ego_lane, include_ego_lane):
        d2, _, _, _, _ = polyline_projection_batch(p, path)
        if is_opp:
            out += params.lambda_opp * np.exp(-d2 / (2.0 * params.sigma_opp**2))
        else:
            out += params.lambda_same * np.exp(-d2 / (2.0 * params.sigma_same**2))
    return out


def rpf(
    point,
    lane_graph: LaneGraph,
    params: RpfParams,
    ego_lane_id: str | None = None,
    include_ego_lane: bool = False,
) -> float:
    """Road penalty at one point. The ego's own lane contributes no lane
    kernel unless include_ego_lane is set."""
    return float(
        _rpf_values(
            np.asarray(point, dtype=float).reshape(1, 2),
            lane_graph,
            params,
            ego_lane_id=ego_lane_id,
            include_ego_lane=include_ego_lane,
        )[0]
    )


def precompute_rpf_grid(
    lane_graph: LaneGraph,
    grid: GridSpec,
    params: RpfParams,
    ego_lane_id: str | None = None,
    include_ego_lane: bool = False,
) -> RiskGrid:
    """Evaluate the penalty at every cell center of the grid."""
    xs, ys = cell_points_world(grid)
    vals = _rpf_values(
        np.stack([xs.ravel(), ys.ravel()], axis=1),
        lane_graph,
        params,
        ego_lane_id=ego_lane_id,
        include_ego_lane=include_ego_lane,
    )
    return RiskGrid(grid=grid, values=vals.reshape(grid.shape))
