"""Pluggable multimodal trajectory prediction for motorized agents.

Built-in analytic predictors stand in for a learned network: each emits a
set of weighted centerline hypotheses with per-vertex speed profiles.
External predictions can be injected through a hypothesis-override file
without code changes (see OverridePredictor).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .geometry import PathGeometry
from .scenario import AgentState

_STATIONARY_EPS = 1e-9


class PredictorError(ValueError):
    pass


@dataclass(frozen=True)
class TrajectoryHypothesis:
    path: PathGeometry
    probability: float

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise PredictorError(f"hypothesis probability {self.probability} not in [0, 1]")


class HypothesisSet:
    """Hypotheses with probabilities renormalized to sum to 1."""

    __slots__ = ("hypotheses",)

    def __init__(self, hypotheses):
        hyps = list(hypotheses)
        if not hyps:
            raise PredictorError("hypothesis set is empty")
        total = sum(h.probability for h in hyps)
        if total <= 0:
            raise PredictorError("hypothesis probabilities sum to zero")
        self.hypotheses = [
            TrajectoryHypothesis(h.path, h.probability / total) for h in hyps
        ]

    def __iter__(self):
        return iter(self.hypotheses)

    def __len__(self):
        return len(self.hypotheses)


def _require_motorized(agent: AgentState):
    if not agent.is_motorized:
        raise PredictorError(
            f"agent {agent.id!r} has kind {agent.kind!r}; trajectory prediction "
            "applies to motorized agents only"
        )


def _check_horizon(horizon: float, dt: float):
    if horizon <= 0 or dt <= 0:
        raise PredictorError(f"horizon and dt must be > 0 (got {horizon}, {dt})")


def _straight_path(agent: AgentState, horizon: float, dt: float) -> PathGeometry:
    n = int(round(horizon / dt))
    ts = np.arange(n + 1) * dt
    hx, hy = math.cos(agent.heading), math.sin(agent.heading)
    pts = np.stack([agent.x + agent.speed * ts * hx, agent.y + agent.speed * ts * hy], axis=1)
    return PathGeometry(pts, speeds=np.full(n + 1, agent.speed))


def _arc_path(agent: AgentState, omega: float, horizon: float, dt: float) -> PathGeometry:
    # Constant turn rate omega at constant speed: circle of radius v / omega.
    n = int(round(horizon / dt))
    ts = np.arange(n + 1) * dt
    r = agent.speed / omega
    th = agent.heading + omega * ts
    pts = np.stack(
        [
            agent.x + r * (np.sin(th) - math.sin(agent.heading)),
            agent.y - r * (np.cos(th) - math.cos(agent.heading)),
        ],
        axis=1,
    )
    return PathGeometry(pts, speeds=np.full(n + 1, agent.speed))


def _stationary_set(agent: AgentState, probabilities) -> HypothesisSet:
    return HypothesisSet(
        TrajectoryHypothesis(PathGeometry([[agent.x, agent.y]]), p) for p in probabilities
    )


class ConstantModesPredictor:
    """Default 3-mode analytic predictor: straight, left arc, right arc."""

    name = "cv3"

    def __init__(self, probabilities=(0.6, 0.2, 0.2), turn_rate: float = 0.2):
        if len(probabilities) != 3:
            raise PredictorError("cv3 needs exactly 3 mode probabilities")
        if turn_rate <= 0:
            raise PredictorError("turn_rate must be > 0")
        self.probabilities = tuple(float(p) for p in probabilities)
        self.turn_rate = float(turn_rate)

    def predict(self, agent: AgentState, horizon: float, dt: float, frame_index=None) -> HypothesisSet:
        _require_motorized(agent)
        _check_horizon(horizon, dt)
        if agent.speed <= _STATIONARY_EPS:
            return _stationary_set(agent, self.probabilities)
        p_straight, p_left, p_right = self.probabilities
        return HypothesisSet(
            [
                TrajectoryHypothesis(_straight_path(agent, horizon, dt), p_straight),
                TrajectoryHypothesis(_arc_path(agent, self.turn_rate, horizon, dt), p_left),
                TrajectoryHypothesis(_arc_path(agent, -self.turn_rate, horizon, dt), p_right),
            ]
        )


class ConstantVelocityPredictor:
    """Single straight constant-velocity hypothesis with probability 1."""

    name = "cv1"

    def __init__(self):
        pass

    def predict(self, agent: AgentState, horizon: float, dt: float, frame_index=None) -> HypothesisSet:
        _require_motorized(agent)
        _check_horizon(horizon, dt)
        if agent.speed <= _STATIONARY_EPS:
            return _stationary_set(agent, (1.0,))
        return HypothesisSet([TrajectoryHypothesis(_straight_path(agent, horizon, dt), 1.0)])


class ConstantVelocityVruPredictor(ConstantVelocityPredictor):
    """cv1 without the motorized-kind guard; used when VRUs are routed
    through the motorized-agent field in the VRU-field ablation."""

    name = "cv1_any"

    def predict(self, agent: AgentState, horizon: float, dt: float, frame_index=None) -> HypothesisSet:
        _check_horizon(horizon, dt)
        if agent.speed <= _STATIONARY_EPS:
            return _stationary_set(agent, (1.0,))
        return HypothesisSet([TrajectoryHypothesis(_straight_path(agent, horizon, dt), 1.0)])


class OverridePredictor:
    """Serves precomputed hypotheses from a file, keyed by (frame, agent id).

    File format (JSON): {"frames": {"<frame_index>": {"<agent_id>":
    [{"points": [[x, y], ...], "probability": p, "speeds": [...]} , ...]}}}.
    Units match the scenario schema. Entries missing from the file fall back
    to the configured fallback predictor.
    """

    name = "override"

    def __init__(self, path, fallback=None):
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if "frames" not in doc or not isinstance(doc["frames"], dict):
            raise PredictorError(f"{path}: override file needs a top-level 'frames' map")
        self._table = {}
        for fkey, agents in doc["frames"].items():
            for aid, hyps in agents.items():
                parsed = [
                    TrajectoryHypothesis(
                        PathGeometry(h["points"], speeds=h.get("speeds")),
                        float(h["probability"]),
                    )
                    for h in hyps
                ]
                self._table[(int(fkey), str(aid))] = HypothesisSet(parsed)
        self.fallback = fallback if fallback is not None else ConstantModesPredictor()

    def predict(self, agent: AgentState, horizon: float, dt: float, frame_index=None) -> HypothesisSet:
        if frame_index is not None:
            hit = self._table.get((int(frame_index), agent.id))
            if hit is not None:
                return hit
        return self.fallback.predict(agent, horizon, dt, frame_index=frame_index)


_REGISTRY: dict[str, object] = {}


def register_predictor(name: str, factory) -> None:
    """Register a predictor factory under a unique name."""
    if name in _REGISTRY:
        raise PredictorError(f"predictor {name!r} is already registered")
    _REGISTRY[name] = factory


def unregister_predictor(name: str) -> None:
    _REGISTRY.pop(name, None)


def list_predictors() -> list[str]:
    return sorted(_REGISTRY)


def create_predictor(name: str, **kwargs):
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise PredictorError(
            f"unknown predictor {name!r}; available: {', '.join(list_predictors())}"
        ) from None
    return factory(**kwargs)


register_predictor("cv3", ConstantModesPredictor)
register_predictor("cv1", ConstantVelocityPredictor)
register_predictor("override", OverridePredictor)
