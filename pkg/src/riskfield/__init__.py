"""riskfield: multi-component BEV driving risk field, visibility-scoped
actor-level risk metrics, and a sampling MPC planner consuming the field
as a cost density."""

__version__ = "0.1.0"

from .composer import (
    VisibilityPolygon,
    actor_scores,
    compose_components,
    compose_frame,
    compute_visibility,
    filter_visible,
    score_frame,
    score_sequence,
)
from .config import EngineConfig, load_config
from .geometry import FrenetCoord, GridSpec, PathGeometry, RiskGrid, project_frenet
from .maf import MafParams, maf_agent, maf_agent_grid, maf_hypothesis, path_severity, virtual_mass
from .metrics import (
    ActorScoreSeries,
    FrameScores,
    MetricsReport,
    evaluate,
    ot_f1,
    ot_f1_t,
    pic,
    wmota,
)
from .planner import EgoState, PlanResult, plan, sample_field, step_dynamics
from .predictor import (
    HypothesisSet,
    TrajectoryHypothesis,
    create_predictor,
    list_predictors,
    register_predictor,
)
from .rpf import RpfParams, precompute_rpf_grid, rpf
from .scenario import (
    AgentState,
    LaneGraph,
    ScenarioFrame,
    ScenarioSequence,
    load_scenario,
    partition_lanes,
    save_scenario,
)
from .vrf import VrfParams, vrf, vrf_grid

__all__ = [name for name in dir() if not name.startswith("_")]
