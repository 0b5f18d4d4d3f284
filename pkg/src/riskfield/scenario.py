"""Scene, map, and agent data model plus the scenario file format.

Scenario files are single JSON documents with top-level keys ``map``,
``frames``, ``meta`` (see docs/scenario_format.md and the machine-checkable
docs/scenario.schema.json). All types are immutable after load and safe for
concurrent read.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import polygon_is_simple

KINDS = ("car", "truck", "motorcycle", "pedestrian", "cyclist")
MOTORIZED_KINDS = ("car", "truck", "motorcycle")
VRU_KINDS = ("pedestrian", "cyclist")
LANE_DIRECTIONS = ("same", "opposite")


class ScenarioError(ValueError):
    """Base class for scenario ingestion problems."""


class ScenarioParseError(ScenarioError):
    """The file is not parseable as a scenario document."""


class ScenarioValidationError(ScenarioError):
    """The document parsed but violates a data-model invariant."""


@dataclass(frozen=True)
class AgentState:
    """One traffic participant at one instant, in the fixed world frame."""

    id: str
    kind: str
    x: float
    y: float
    heading: float
    speed: float
    length: float
    width: float
    mass_kg: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ScenarioValidationError(
                f"agent {self.id!r}: unknown kind {self.kind!r} (expected one of {KINDS})"
            )
        if self.speed < 0:
            raise ScenarioValidationError(f"agent {self.id!r}: speed must be >= 0")
        if self.length <= 0 or self.width <= 0:
            raise ScenarioValidationError(f"agent {self.id!r}: bbox dimensions must be > 0")
        if self.is_motorized and (self.mass_kg is None or self.mass_kg <= 0):
            raise ScenarioValidationError(
                f"agent {self.id!r}: motorized agents require mass > 0"
            )
        if self.mass_kg is not None and self.mass_kg <= 0:
            raise ScenarioValidationError(f"agent {self.id!r}: mass must be > 0")

    @property
    def is_motorized(self) -> bool:
        return self.kind in MOTORIZED_KINDS

    @property
    def is_vru(self) -> bool:
        return self.kind in VRU_KINDS

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def heading_vec(self) -> np.ndarray:
        return np.array([math.cos(self.heading), math.sin(self.heading)])

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "kind": self.kind,
            "x": self.x,
            "y": self.y,
            "heading": self.heading,
            "speed": self.speed,
            "length": self.length,
            "width": self.width,
        }
        if self.mass_kg is not None:
            d["mass"] = self.mass_kg
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AgentState":
        try:
            return cls(
                id=str(d["id"]),
                kind=str(d["kind"]),
                x=float(d["x"]),
                y=float(d["y"]),
                heading=float(d["heading"]),
                speed=float(d["speed"]),
                length=float(d["length"]),
                width=float(d["width"]),
                mass_kg=float(d["mass"]) if d.get("mass") is not None else None,
            )
        except KeyError as e:
            raise ScenarioValidationError(f"agent record missing field {e.args[0]!r}") from e


@dataclass(frozen=True)
class Lane:
    id: str
    direction: str
    points: np.ndarray = field(compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "points", pts)
        if self.direction not in LANE_DIRECTIONS:
            raise ScenarioValidationError(
                f"lane {self.id!r}: direction must be one of {LANE_DIRECTIONS}"
            )
        if len(pts) < 2:
            raise ScenarioValidationError(f"lane {self.id!r}: centerline needs >= 2 points")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "direction": self.direction,
            "points": self.points.tolist(),
        }


@dataclass(frozen=True)
class LaneGraph:
    """Lane centerlines with direction tags plus drivable-area polygons.

    Direction tags are stored in the file rather than inferred geometrically;
    the ego's current lane is likewise stored explicitly (ego_lane_id).
    """

    lanes: tuple[Lane, ...]
    drivable: tuple[np.ndarray, ...]
    ego_lane_id: str

    def __post_init__(self):
        ids = [ln.id for ln in self.lanes]
        if len(set(ids)) != len(ids):
            raise ScenarioValidationError("lane ids must be unique")
        if self.ego_lane_id not in ids:
            raise ScenarioValidationError(
                f"ego_lane_id {self.ego_lane_id!r} does not match any lane"
            )
        for i, poly in enumerate(self.drivable):
            p = np.asarray(poly, dtype=float)
            if len(p) < 3:
                raise ScenarioValidationError(f"drivable polygon {i} needs >= 3 vertices")
            if not polygon_is_simple(p):
                raise ScenarioValidationError(f"drivable polygon {i} is self-intersecting")

    def lane_by_id(self, lane_id: str) -> Lane:
        for ln in self.lanes:
            if ln.id == lane_id:
                return ln
        raise KeyError(lane_id)

    def to_dict(self) -> dict:
        return {
            "ego_lane_id": self.ego_lane_id,
            "lanes": [ln.to_dict() for ln in self.lanes],
            "drivable": [np.asarray(p, dtype=float).tolist() for p in self.drivable],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LaneGraph":
        try:
            lanes = tuple(
                Lane(id=str(ln["id"]), direction=str(ln["direction"]), points=ln["points"])
                for ln in d["lanes"]
            )
            drivable = tuple(np.asarray(p, dtype=float) for p in d.get("drivable", []))
            return cls(lanes=lanes, drivable=drivable, ego_lane_id=str(d["ego_lane_id"]))
        except KeyError as e:
            raise ScenarioValidationError(f"map record missing field {e.args[0]!r}") from e


@dataclass(frozen=True)
class ScenarioFrame:
    timestamp: float
    ego: AgentState
    agents: tuple[AgentState, ...]
    gt_risky_ids: frozenset[str]

    def __post_init__(self):
        ids = [self.ego.id] + [a.id for a in self.agents]
        seen = set()
        for aid in ids:
            if aid in seen:
                raise ScenarioValidationError(
                    f"frame t={self.timestamp}: duplicate agent id {aid!r}"
                )
            seen.add(aid)
        agent_ids = {a.id for a in self.agents}
        for rid in self.gt_risky_ids:
            if rid not in agent_ids:
                raise ScenarioValidationError(
                    f"frame t={self.timestamp}: gt_risky id {rid!r} is not in the agent list"
                )

    def agent_by_id(self, agent_id: str) -> AgentState:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise KeyError(agent_id)

    def to_dict(self) -> dict:
        return {
            "t": self.timestamp,
            "ego": self.ego.to_dict(),
            "agents": [a.to_dict() for a in self.agents],
            "gt_risky": sorted(self.gt_risky_ids),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioFrame":
        try:
            return cls(
                timestamp=float(d["t"]),
                ego=AgentState.from_dict(d["ego"]),
                agents=tuple(AgentState.from_dict(a) for a in d.get("agents", [])),
                gt_risky_ids=frozenset(str(r) for r in d.get("gt_risky", [])),
            )
        except KeyError as e:
            raise ScenarioValidationError(f"frame record missing field {e.args[0]!r}") from e


@dataclass(frozen=True)
class ScenarioSequence:
    frames: tuple[ScenarioFrame, ...]
    lane_graph: LaneGraph
    meta: dict

    def __post_init__(self):
        if not self.frames:
            raise ScenarioValidationError("scenario has no frames")
        ts = [f.timestamp for f in self.frames]
        for a, b in zip(ts, ts[1:]):
            if b <= a:
                raise ScenarioValidationError(
                    f"timestamps must be strictly increasing (got {a} then {b})"
                )

    @property
    def name(self) -> str:
        return str(self.meta.get("name", ""))

    def to_dict(self) -> dict:
        return {
            "meta": self.meta,
            "map": self.lane_graph.to_dict(),
            "frames": [f.to_dict() for f in self.frames],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSequence":
        if not isinstance(d, dict):
            raise ScenarioParseError("scenario document must be a JSON object")
        for key in ("map", "frames"):
            if key not in d:
                raise ScenarioValidationError(f"scenario document missing key {key!r}")
        return cls(
            frames=tuple(ScenarioFrame.from_dict(f) for f in d["frames"]),
            lane_graph=LaneGraph.from_dict(d["map"]),
            meta=dict(d.get("meta", {})),
        )


def load_scenario(path) -> ScenarioSequence:
    """Load and fully validate a scenario file.

    Raises ScenarioParseError for malformed documents and
    ScenarioValidationError naming the first violated invariant.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ScenarioParseError(f"{path}: not a valid scenario document: {e}") from e
    return ScenarioSequence.from_dict(doc)


def save_scenario(seq: ScenarioSequence, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(seq.to_dict(), fh, indent=1)
        fh.write("\n")


def partition_lanes(lane_graph: LaneGraph) -> tuple[list[Lane], list[Lane]]:
    """Split lanes around the ego's current lane by direction tag.

    The ego lane itself appears in neither list.
    """
    others = [ln for ln in lane_graph.lanes if ln.id != lane_graph.ego_lane_id]
    same = [ln for ln in others if ln.direction == "same"]
    opposite = [ln for ln in others if ln.direction == "opposite"]
    return same, opposite
