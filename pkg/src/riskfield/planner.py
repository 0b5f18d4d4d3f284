"""Sampling-based MPC over a kinematic bicycle model with the composed risk
grid as a cost density.

The solver is iterative elite resampling (cross-entropy style): K control
sequences per iteration, the top fraction refits a per-step Gaussian, and
the zero-control sequence plus the running best are always re-injected, so
the best cost is nonincreasing across iterations and never exceeds the
zero-control rollout. The returned trajectory is re-rolled through the
scalar dynamics step, so replaying the returned controls reproduces the
returned states exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import PlannerConfig
from .geometry import RiskGrid


class PlannerError(ValueError):
    pass


@dataclass(frozen=True)
class EgoState:
    x: float
    y: float
    heading: float
    speed: float


@dataclass(frozen=True)
class Control:
    accel: float
    steer: float


@dataclass
class PlanResult:
    controls: np.ndarray  # (H, 2) [accel, steer]
    states: np.ndarray  # (H+1, 4) [x, y, heading, speed]
    cost: float
    cost_history: list  # best cost after each solver iteration
    stage_risk: np.ndarray  # (H+1,) weighted risk term per state


def step_dynamics(state: EgoState, u: Control, dt: float, wheelbase: float, v_max: float = math.inf) -> EgoState:
    """Kinematic bicycle update. Integration order is fixed: position and
    heading advance with the current speed, then speed updates (so one step
    from rest does not move the vehicle)."""
    x = state.x + state.speed * math.cos(state.heading) * dt
    y = state.y + state.speed * math.sin(state.heading) * dt
    heading = state.heading + (state.speed / wheelbase) * math.tan(u.steer) * dt
    speed = min(max(state.speed + u.accel * dt, 0.0), v_max)
    return EgoState(x, y, heading, speed)


def _footprint_offsets(length: float, width: float, n_points: int) -> np.ndarray:
    """Body-frame sample lattice covering the ego bbox (3x3 for 9 points)."""
    side = max(int(round(math.sqrt(n_points))), 2)
    fr = np.linspace(-0.5, 0.5, side)
    ux, uy = np.meshgrid(fr * length, fr * width, indexing="xy")
    return np.stack([ux.ravel(), uy.ravel()], axis=1)


def _bilinear(riskgrid: RiskGrid, pts: np.ndarray, oob_value: float) -> np.ndarray:
    """Bilinear interpolation among cell centers; points outside the
    cell-center lattice take the off-grid penalty value."""
    grid = riskgrid.grid
    g = grid.world_to_grid(pts)
    fx = (g[..., 0] + grid.extent) / grid.resolution - 0.5
    fy = (g[..., 1] + grid.extent) / grid.resolution - 0.5
    inside = (fx >= 0) & (fx <= grid.n - 1) & (fy >= 0) & (fy <= grid.n - 1)
    fx = np.clip(fx, 0, grid.n - 1)
    fy = np.clip(fy, 0, grid.n - 1)
    x0 = np.minimum(fx.astype(int), grid.n - 2)
    y0 = np.minimum(fy.astype(int), grid.n - 2)
    tx = fx - x0
    ty = fy - y0
    v = riskgrid.values
    val = (
        v[y0, x0] * (1 - tx) * (1 - ty)
        + v[y0, x0 + 1] * tx * (1 - ty)
        + v[y0 + 1, x0] * (1 - tx) * ty
        + v[y0 + 1, x0 + 1] * tx * ty
    )
    return np.where(inside, val, oob_value)


def sample_field(
    riskgrid: RiskGrid,
    state: EgoState,
    footprint: tuple[float, float],
    footprint_mode: str = "max",
    n_points: int = 9,
    oob_value: float = 0.0,
) -> float:
    """Risk sampled over the ego's oriented footprint: bilinear values at
    n_points lattice points, aggregated by max or mean."""
    offs = _footprint_offsets(footprint[0], footprint[1], n_points)
    c, s = math.cos(state.heading), math.sin(state.heading)
    pts = np.stack(
        [state.x + c * offs[:, 0] - s * offs[:, 1], state.y + s * offs[:, 0] + c * offs[:, 1]],
        axis=1,
    )
    vals = _bilinear(riskgrid, pts, oob_value)
    if footprint_mode == "max":
        return float(vals.max())
    if footprint_mode == "mean":
        return float(vals.mean())
    raise PlannerError(f"unknown footprint_mode {footprint_mode!r}")


def _rollout_batch(start: EgoState, controls: np.ndarray, cfg: PlannerConfig) -> np.ndarray:
    """Vectorized rollout of (K, H, 2) control batches -> (K, H+1, 4) states."""
    k, h, _ = controls.shape
    states = np.empty((k, h + 1, 4))
    x = np.full(k, start.x)
    y = np.full(k, start.y)
    th = np.full(k, start.heading)
    v = np.full(k, start.speed)
    states[:, 0] = np.stack([x, y, th, v], axis=1)
    for t in range(h):
        x = x + v * np.cos(th) * cfg.dt
        y = y + v * np.sin(th) * cfg.dt
        th = th + (v / cfg.wheelbase) * np.tan(controls[:, t, 1]) * cfg.dt
        v = np.clip(v + controls[:, t, 0] * cfg.dt, 0.0, cfg.v_max)
        states[:, t + 1] = np.stack([x, y, th, v], axis=1)
    return states


def _risk_batch(riskgrid: RiskGrid, states: np.ndarray, footprint, cfg: PlannerConfig, oob_value: float) -> np.ndarray:
    """(K, H+1) footprint-aggregated risk for a batch of state trajectories."""
    k, hp1, _ = states.shape
    offs = _footprint_offsets(footprint[0], footprint[1], cfg.footprint_points)
    th = states[..., 2]
    c, s = np.cos(th), np.sin(th)
    px = states[..., 0, None] + c[..., None] * offs[:, 0] - s[..., None] * offs[:, 1]
    py = states[..., 1, None] + s[..., None] * offs[:, 0] + c[..., None] * offs[:, 1]
    pts = np.stack([px, py], axis=-1).reshape(-1, 2)
    vals = _bilinear(riskgrid, pts, oob_value).reshape(k, hp1, len(offs))
    return vals.max(axis=2) if cfg.footprint_mode == "max" else vals.mean(axis=2)


def _cost_batch(risk: np.ndarray, controls: np.ndarray, cfg: PlannerConfig) -> np.ndarray:
    r0, r1 = cfg.r_diag
    s0, s1 = cfg.s_diag
    effort = r0 * controls[..., 0] ** 2 + r1 * controls[..., 1] ** 2
    du = np.diff(controls, axis=1)
    smooth = s0 * du[..., 0] ** 2 + s1 * du[..., 1] ** 2
    return (
        cfg.alpha_risk * risk.sum(axis=1)
        + cfg.beta_effort * effort.sum(axis=1)
        + cfg.gamma_smooth * smooth.sum(axis=1)
    )


def trajectory_cost(
    states: np.ndarray,
    controls: np.ndarray,
    riskgrid: RiskGrid,
    cfg: PlannerConfig,
    footprint: tuple[float, float],
    oob_value: float = 0.0,
) -> tuple[float, np.ndarray]:
    """Objective value for a single (states, controls) pair, plus the
    per-state weighted risk term. This is the same computation the solver
    uses for its final answer, exposed for independent re-evaluation."""
    risks = np.array(
        [
            sample_field(
                riskgrid,
                EgoState(*st[:4]),
                footprint,
                footprint_mode=cfg.footprint_mode,
                n_points=cfg.footprint_points,
                oob_value=oob_value,
            )
            for st in states
        ]
    )
    r0, r1 = cfg.r_diag
    s0, s1 = cfg.s_diag
    effort = float(np.sum(r0 * controls[:, 0] ** 2 + r1 * controls[:, 1] ** 2))
    du = np.diff(controls, axis=0)
    smooth = float(np.sum(s0 * du[:, 0] ** 2 + s1 * du[:, 1] ** 2))
    total = cfg.alpha_risk * float(risks.sum()) + cfg.beta_effort * effort + cfg.gamma_smooth * smooth
    return total, cfg.alpha_risk * risks


def _rollout_scalar(start: EgoState, controls: np.ndarray, cfg: PlannerConfig) -> np.ndarray:
    state = start
    states = [np.array([state.x, state.y, state.heading, state.speed])]
    for a, d in controls:
        state = step_dynamics(state, Control(a, d), cfg.dt, cfg.wheelbase, cfg.v_max)
        states.append(np.array([state.x, state.y, state.heading, state.speed]))
    return np.asarray(states)


def plan(
    start: EgoState,
    riskgrid: RiskGrid,
    cfg: PlannerConfig,
    footprint: tuple[float, float] = (4.6, 1.8),
    oob_value: float = 0.0,
    seed: int = 0,
) -> PlanResult:
    """Minimize risk + effort + smoothness over bounded control sequences.

    Deterministic for a fixed seed. The returned states are the scalar
    re-roll of the best control sequence and the returned cost is evaluated
    on exactly that trajectory.
    """
    a_lo, a_hi = cfg.accel_bounds
    if start.speed < 0 or start.speed > cfg.v_max:
        raise PlannerError(f"start speed {start.speed} outside [0, {cfg.v_max}]")
    h = cfg.horizon_steps
    rng = np.random.default_rng(seed)
    mean = np.zeros((h, 2))
    std = np.tile([(a_hi - a_lo) / 2.0, cfg.steer_bound], (h, 1))
    std_floor = np.array([(a_hi - a_lo), 2.0 * cfg.steer_bound]) * 0.01
    n_elite = max(int(round(cfg.samples * cfg.elite_frac)), 1)

    best_controls = np.zeros((h, 2))
    best_cost = math.inf
    history = []
    for _ in range(cfg.iterations):
        noise = rng.standard_normal((cfg.samples, h, 2))
        cand = mean[None] + noise * std[None]
        # keep the zero sequence and the incumbent in every batch
        cand[0] = 0.0
        cand[1] = best_controls
        cand[..., 0] = np.clip(cand[..., 0], a_lo, a_hi)
        cand[..., 1] = np.clip(cand[..., 1], -cfg.steer_bound, cfg.steer_bound)

        states = _rollout_batch(start, cand, cfg)
        risks = _risk_batch(riskgrid, states, footprint, cfg, oob_value)
        costs = _cost_batch(risks, cand, cfg)

        best_idx = int(np.argmin(costs))
        if costs[best_idx] < best_cost:
            best_cost = float(costs[best_idx])
            best_controls = cand[best_idx].copy()
        history.append(best_cost)

        elite = cand[np.argsort(costs, kind="stable")[:n_elite]]
        mean = elite.mean(axis=0)
        std = np.maximum(elite.std(axis=0), std_floor)

    states = _rollout_scalar(start, best_controls, cfg)
    cost, stage_risk = trajectory_cost(states, best_controls, riskgrid, cfg, footprint, oob_value)
    return PlanResult(
        controls=best_controls,
        states=states,
        cost=cost,
        cost_history=history,
        stage_risk=stage_risk,
    )


def export_trajectory(result: PlanResult, path) -> None:
    """Per-step trajectory table: state, control, and weighted risk term.

    The final row carries the terminal state with empty control columns.
    """
    lines = ["step\tx\ty\theading\tspeed\taccel\tsteer\trisk_term"]
    h = len(result.controls)
    for t in range(h + 1):
        x, y, th, v = (float(v_) for v_ in result.states[t])
        if t < h:
            a, d = (float(v_) for v_ in result.controls[t])
            ctrl = f"{a!r}\t{d!r}"
        else:
            ctrl = "\t"
        lines.append(f"{t}\t{x!r}\t{y!r}\t{th!r}\t{v!r}\t{ctrl}\t{float(result.stage_risk[t])!r}")
    lines.append(f"# total_cost\t{float(result.cost)!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
