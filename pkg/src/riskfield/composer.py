"""Per-frame scene-field assembly, the visibility adapter, and actor-level
risk scoring.

Composition is strictly additive: the composed grid equals the cell-wise
sum of the motorized-agent, VRU, and road-penalty component grids, each
gated by its ablation switch. Visibility is a star-shaped line-of-sight
polygon from uniform ray casting against non-drivable cells and motorized
occluders; it masks both the risk grid and the actor set before scoring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import EngineConfig
from .geometry import GridSpec, RiskGrid, cell_points_world, points_in_any_polygon, rasterize_footprint
from .maf import maf_agent_grid
from .metrics import ActorScoreSeries, FrameScores
from .predictor import ConstantVelocityVruPredictor, OverridePredictor, create_predictor
from .rpf import precompute_rpf_grid
from .scenario import AgentState, LaneGraph, ScenarioFrame, ScenarioSequence
from .vrf import vrf_grid


@dataclass(frozen=True)
class VisibilityPolygon:
    """Star-shaped visibility region about the ego position.

    vertices[i] is the endpoint of ray i at angle 2*pi*i/ray_count; a point
    is inside iff its radius does not exceed the polygon boundary along its
    direction (exact for the polygon as defined, via angular binning).
    """

    origin: tuple[float, float]
    vertices: np.ndarray
    ray_count: int
    max_range: float

    def ray_lengths(self) -> np.ndarray:
        d = self.vertices - np.asarray(self.origin)
        return np.hypot(d[:, 0], d[:, 1])

    def boundary_distance(self, angle: np.ndarray) -> np.ndarray:
        """Distance from the origin to the polygon boundary along the given
        world angles (exact segment intersection per angular sector)."""
        angle = np.mod(np.asarray(angle, dtype=float), 2.0 * math.pi)
        step = 2.0 * math.pi / self.ray_count
        i0 = np.minimum((angle / step).astype(int), self.ray_count - 1)
        i1 = (i0 + 1) % self.ray_count
        a = self.vertices - np.asarray(self.origin)
        ax, ay = a[i0, 0], a[i0, 1]
        bx, by = a[i1, 0], a[i1, 1]
        dx, dy = bx - ax, by - ay
        ux = np.cos(angle)
        uy = np.sin(angle)
        den = ux * dy - uy * dx
        # parallel edges fall back to the sector's first ray length
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (ax * dy - ay * dx) / den
        return np.where(np.abs(den) < 1e-12, np.hypot(ax, ay), t)

    def contains_points(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        ox, oy = self.origin
        rx = p[:, 0] - ox
        ry = p[:, 1] - oy
        radius = np.hypot(rx, ry)
        t = self.boundary_distance(np.arctan2(ry, rx))
        return radius <= t + 1e-12

    def contains(self, point) -> bool:
        return bool(self.contains_points(np.asarray(point, dtype=float).reshape(1, 2))[0])


def _grid_for_frame(frame: ScenarioFrame, config: EngineConfig) -> GridSpec:
    orientation = frame.ego.heading if config.grid.frame == "ego" else 0.0
    return GridSpec(
        center=(frame.ego.x, frame.ego.y),
        extent=config.grid.extent,
        resolution=config.grid.resolution,
        orientation=orientation,
    )


def build_predictor(config: EngineConfig):
    ps = config.predictor
    if ps.name == "cv3":
        return create_predictor("cv3", probabilities=ps.probabilities, turn_rate=ps.turn_rate)
    if ps.name == "override":
        if ps.overrides is None:
            raise ValueError("predictor 'override' needs predictor.overrides set to a file path")
        return OverridePredictor(ps.overrides)
    return create_predictor(ps.name)


def opaque_mask(frame: ScenarioFrame, lane_graph: LaneGraph, grid: GridSpec) -> np.ndarray:
    """Cells blocking line of sight: non-drivable cells plus motorized-agent
    footprints. Pedestrians do not occlude, and the ego's own footprint is
    always cleared."""
    xs, ys = cell_points_world(grid)
    pts = np.stack([xs.ravel(), ys.ravel()], axis=1)
    mask = ~points_in_any_polygon(pts, lane_graph.drivable)
    mask = mask.reshape(grid.shape)
    for agent in frame.agents:
        if not agent.is_motorized:
            continue
        cells = rasterize_footprint(agent, grid, 0.0)
        if len(cells):
            mask[cells[:, 0], cells[:, 1]] = True
    ego_cells = rasterize_footprint(frame.ego, grid, 0.0)
    if len(ego_cells):
        mask[ego_cells[:, 0], ego_cells[:, 1]] = False
    return mask


def compute_visibility(
    frame: ScenarioFrame,
    lane_graph: LaneGraph,
    grid: GridSpec,
    ray_count: int = 360,
    max_range: float = 50.0,
) -> VisibilityPolygon:
    """Cast ray_count rays uniformly over 2*pi from the ego position,
    stepping at half-cell resolution until the first opaque cell or
    max_range. Samples outside the grid are treated as transparent."""
    mask = opaque_mask(frame, lane_graph, grid)
    step = grid.resolution / 2.0
    n_steps = int(math.ceil(max_range / step))
    dists = (np.arange(n_steps) + 1) * step
    dists = np.minimum(dists, max_range)
    angles = 2.0 * math.pi * np.arange(ray_count) / ray_count
    ox, oy = frame.ego.x, frame.ego.y

    sx = ox + np.outer(np.cos(angles), dists)
    sy = oy + np.outer(np.sin(angles), dists)
    g = grid.world_to_grid(np.stack([sx, sy], axis=-1))
    cols = np.floor((g[..., 0] + grid.extent) / grid.resolution).astype(int)
    rows = np.floor((g[..., 1] + grid.extent) / grid.resolution).astype(int)
    in_grid = (rows >= 0) & (rows < grid.n) & (cols >= 0) & (cols < grid.n)
    hit = np.zeros_like(in_grid)
    hit[in_grid] = mask[rows[in_grid], cols[in_grid]]

    any_hit = hit.any(axis=1)
    first = np.where(any_hit, hit.argmax(axis=1), n_steps - 1)
    lengths = np.where(any_hit, dists[first], max_range)
    verts = np.stack([ox + lengths * np.cos(angles), oy + lengths * np.sin(angles)], axis=1)
    return VisibilityPolygon(
        origin=(ox, oy), vertices=verts, ray_count=ray_count, max_range=max_range
    )


def _agent_is_visible(agent: AgentState, polygon: VisibilityPolygon, resolution: float) -> bool:
    """Bbox center inside the polygon, or the line of sight toward the
    center stops on the agent's own body (agents occlude what is behind
    them but never hide themselves)."""
    ox, oy = polygon.origin
    rx, ry = agent.x - ox, agent.y - oy
    if polygon.contains((agent.x, agent.y)):
        return True
    t = float(polygon.boundary_distance(np.array([math.atan2(ry, rx)]))[0])
    r = math.hypot(rx, ry)
    if r <= 0:
        return True
    stop_x = ox + t / r * rx
    stop_y = oy + t / r * ry
    ch, sh = math.cos(agent.heading), math.sin(agent.heading)
    u = ch * (stop_x - agent.x) + sh * (stop_y - agent.y)
    v = -sh * (stop_x - agent.x) + ch * (stop_y - agent.y)
    half = resolution  # discretization slack for the half-cell ray stepping
    return abs(u) <= agent.length / 2.0 + half and abs(v) <= agent.width / 2.0 + half


def filter_visible(
    frame: ScenarioFrame, riskgrid: RiskGrid, polygon: VisibilityPolygon
) -> tuple[list[AgentState], RiskGrid]:
    """Visible actors and the risk grid with cells outside the polygon
    zeroed. A visible agent's own footprint cells are kept lit: the body the
    rays stop on is seen, only the region behind it is suppressed."""
    grid = riskgrid.grid
    visible = [a for a in frame.agents if _agent_is_visible(a, polygon, grid.resolution)]
    xs, ys = cell_points_world(grid)
    inside = polygon.contains_points(np.stack([xs.ravel(), ys.ravel()], axis=1))
    inside = inside.reshape(grid.shape).copy()
    for agent in visible:
        cells = rasterize_footprint(agent, grid, 0.0)
        if len(cells):
            inside[cells[:, 0], cells[:, 1]] = True
    masked = riskgrid.values * inside
    return visible, RiskGrid(grid=grid, values=masked)


def actor_scores(
    frame: ScenarioFrame,
    riskgrid: RiskGrid,
    visible: list[AgentState],
    inflation: float = 0.5,
) -> dict[str, float]:
    """Per-actor risk score: max of the (already masked) grid over the
    actor's inflated footprint; 0 when the footprint misses the grid."""
    scores = {}
    for agent in visible:
        cells = rasterize_footprint(agent, riskgrid.grid, inflation)
        if len(cells) == 0:
            scores[agent.id] = 0.0
        else:
            scores[agent.id] = float(riskgrid.values[cells[:, 0], cells[:, 1]].max())
    return scores


class RpfCache:
    """Reuses the static road-penalty grid while the grid pose and map are
    unchanged (read-only after precompute)."""

    def __init__(self):
        self._key = None
        self._grid = None

    def get(self, lane_graph: LaneGraph, grid: GridSpec, config: EngineConfig) -> RiskGrid:
        key = (grid, id(lane_graph), config.rpf, config.ablation.include_ego_lane)
        if key != self._key:
            self._grid = precompute_rpf_grid(
                lane_graph, grid, config.rpf, include_ego_lane=config.ablation.include_ego_lane
            )
            self._key = key
        return self._grid


def compose_components(
    frame: ScenarioFrame,
    lane_graph: LaneGraph,
    config: EngineConfig,
    predictor=None,
    frame_index: int | None = None,
    rpf_cache: RpfCache | None = None,
    grid: GridSpec | None = None,
) -> tuple[GridSpec, dict[str, np.ndarray]]:
    """Component grids ("maf", "vrf", "rpf") for one frame, each gated by
    its ablation switch (disabled components are all-zero)."""
    if grid is None:
        grid = _grid_for_frame(frame, config)
    if predictor is None:
        predictor = build_predictor(config)
    ab = config.ablation
    scale = config.field_scale

    maf_total = np.zeros(grid.shape)
    vrf_total = np.zeros(grid.shape)
    vru_predictor = ConstantVelocityVruPredictor()
    for agent in frame.agents:
        if agent.id == frame.ego.id:
            continue
        if agent.is_motorized:
            hyp = predictor.predict(
                agent, config.predictor.horizon, config.predictor.dt, frame_index=frame_index
            )
            maf_total += maf_agent_grid(
                grid,
                hyp,
                agent,
                config.maf,
                velocity_variant=ab.enable_maf_velvar,
                severity_at_current_speed=ab.severity_at_current_speed,
            )
        elif ab.enable_vrf:
            vrf_total += vrf_grid(grid, agent, config.vrf)
        elif ab.vru_as_maf:
            hyp = vru_predictor.predict(
                agent, config.predictor.horizon, config.predictor.dt, frame_index=frame_index
            )
            maf_total += maf_agent_grid(
                grid,
                hyp,
                agent,
                config.maf,
                velocity_variant=ab.enable_maf_velvar,
                severity_at_current_speed=ab.severity_at_current_speed,
            )

    if ab.enable_rpf:
        cache = rpf_cache or RpfCache()
        rpf_vals = cache.get(lane_graph, grid, config).values.copy()
    else:
        rpf_vals = np.zeros(grid.shape)

    if scale != 1.0:
        maf_total *= scale
        vrf_total *= scale
        rpf_vals *= scale
    return grid, {"maf": maf_total, "vrf": vrf_total, "rpf": rpf_vals}


def compose_frame(
    frame: ScenarioFrame,
    lane_graph: LaneGraph,
    config: EngineConfig,
    predictor=None,
    frame_index: int | None = None,
    rpf_cache: RpfCache | None = None,
    grid: GridSpec | None = None,
) -> RiskGrid:
    """Composed scene risk grid: cell-wise sum of the component grids."""
    grid, parts = compose_components(
        frame,
        lane_graph,
        config,
        predictor=predictor,
        frame_index=frame_index,
        rpf_cache=rpf_cache,
        grid=grid,
    )
    return RiskGrid(grid=grid, values=parts["maf"] + parts["vrf"] + parts["rpf"])


def _own_component_scores(
    frame: ScenarioFrame,
    lane_graph: LaneGraph,
    config: EngineConfig,
    grid: GridSpec,
    polygon: VisibilityPolygon,
    visible: list[AgentState],
    predictor,
    frame_index: int | None,
) -> dict[str, float]:
    """Alternative scoring mode: each actor sampled on its own component
    field only (no cross-agent or road contributions)."""
    scores = {}
    ab = config.ablation
    vru_predictor = ConstantVelocityVruPredictor()
    for agent in visible:
        if agent.is_motorized or (not ab.enable_vrf and ab.vru_as_maf):
            pred = predictor if agent.is_motorized else vru_predictor
            hyp = pred.predict(
                agent, config.predictor.horizon, config.predictor.dt, frame_index=frame_index
            )
            vals = maf_agent_grid(
                grid,
                hyp,
                agent,
                config.maf,
                velocity_variant=ab.enable_maf_velvar,
                severity_at_current_speed=ab.severity_at_current_speed,
            )
        elif ab.enable_vrf:
            vals = vrf_grid(grid, agent, config.vrf)
        else:
            scores[agent.id] = 0.0
            continue
        field = RiskGrid(grid=grid, values=vals * config.field_scale)
        _, masked = filter_visible(frame, field, polygon)
        scores.update(actor_scores(frame, masked, [agent], config.scoring.inflation))
    return scores


def score_frame(
    frame: ScenarioFrame,
    lane_graph: LaneGraph,
    config: EngineConfig,
    predictor=None,
    frame_index: int | None = None,
    rpf_cache: RpfCache | None = None,
) -> FrameScores:
    """Full single-frame pipeline: compose, mask by visibility, score."""
    if predictor is None:
        predictor = build_predictor(config)
    grid = _grid_for_frame(frame, config)
    composed = compose_frame(
        frame, lane_graph, config, predictor=predictor, frame_index=frame_index,
        rpf_cache=rpf_cache, grid=grid,
    )
    polygon = compute_visibility(
        frame, lane_graph, grid,
        ray_count=config.visibility.ray_count, max_range=config.visibility.max_range,
    )
    visible, masked = filter_visible(frame, composed, polygon)
    if config.scoring.mode == "own":
        scores = _own_component_scores(
            frame, lane_graph, config, grid, polygon, visible, predictor, frame_index
        )
    else:
        scores = actor_scores(frame, masked, visible, config.scoring.inflation)
    return FrameScores(
        frame_index=frame_index if frame_index is not None else 0,
        timestamp=frame.timestamp,
        scores=scores,
        visible=frozenset(a.id for a in visible),
        gt_risky=frozenset(frame.gt_risky_ids),
        ego_xy=(frame.ego.x, frame.ego.y),
        positions={a.id: (a.x, a.y) for a in frame.agents},
    )


def score_sequence(seq: ScenarioSequence, config: EngineConfig) -> ActorScoreSeries:
    """Score every frame of a scenario and assemble the actor score series."""
    predictor = build_predictor(config)
    cache = RpfCache()
    frames = [
        score_frame(f, seq.lane_graph, config, predictor=predictor, frame_index=i, rpf_cache=cache)
        for i, f in enumerate(seq.frames)
    ]
    meta = dict(seq.meta)
    return ActorScoreSeries(frames=frames, meta=meta, name=seq.name)
