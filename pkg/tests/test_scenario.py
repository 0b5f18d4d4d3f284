import json

import numpy as np
import pytest

from riskfield.fixtures import fixture_path, list_fixtures
from riskfield.scenario import (
    AgentState,
    Lane,
    LaneGraph,
    ScenarioFrame,
    ScenarioParseError,
    ScenarioSequence,
    ScenarioValidationError,
    load_scenario,
    partition_lanes,
    save_scenario,
)

MINIMAL = {
    "map": {
        "ego_lane_id": "l0",
        "lanes": [{"id": "l0", "direction": "same", "points": [[0, 0], [10, 0]]}],
        "drivable": [[[-5, -5], [15, -5], [15, 5], [-5, 5]]],
    },
    "frames": [
        {
            "t": 0.0,
            "ego": {
                "id": "ego", "kind": "car", "x": 0, "y": 0, "heading": 0,
                "speed": 5, "length": 4.6, "width": 1.8, "mass": 1500,
            },
        }
    ],
}


def write_doc(tmp_path, doc, name="scn.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


class TestLoad:
    def test_minimal_one_frame(self, tmp_path):
        seq = load_scenario(write_doc(tmp_path, MINIMAL))
        assert len(seq.frames) == 1
        assert len(seq.frames[0].agents) == 0
        assert seq.frames[0].ego.id == "ego"

    def test_malformed_json_is_parse_error(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ScenarioParseError):
            load_scenario(p)

    def test_duplicate_agent_id_rejected(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        agent = dict(doc["frames"][0]["ego"], id="a1", x=5)
        doc["frames"][0]["agents"] = [agent, dict(agent)]
        with pytest.raises(ScenarioValidationError, match="duplicate agent id 'a1'"):
            load_scenario(write_doc(tmp_path, doc))

    def test_gt_risky_must_exist(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        doc["frames"][0]["gt_risky"] = ["ghost"]
        with pytest.raises(ScenarioValidationError, match="ghost"):
            load_scenario(write_doc(tmp_path, doc))

    def test_timestamps_strictly_increasing(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        doc["frames"] = [doc["frames"][0], dict(doc["frames"][0])]
        with pytest.raises(ScenarioValidationError, match="strictly increasing"):
            load_scenario(write_doc(tmp_path, doc))

    def test_cut_in_fixture_contents(self, cut_in_seq):
        assert len(cut_in_seq.frames) == 40
        first = cut_in_seq.frames[0]
        assert sum(a.is_motorized for a in first.agents) == 2
        assert sum(a.is_vru for a in first.agents) == 0

    def test_round_trip(self, tmp_path, cut_in_seq):
        out = tmp_path / "copy.json"
        save_scenario(cut_in_seq, out)
        again = load_scenario(out)
        assert again.to_dict() == cut_in_seq.to_dict()

    def test_all_fixtures_load(self):
        for name in list_fixtures():
            seq = load_scenario(fixture_path(name))
            assert len(seq.frames) >= 1


class TestAgentState:
    def test_motorized_requires_mass(self):
        with pytest.raises(ScenarioValidationError, match="mass"):
            AgentState("a", "car", 0, 0, 0, 1, 4, 2, None)

    def test_vru_mass_optional(self):
        ped = AgentState("p", "pedestrian", 0, 0, 0, 1, 0.6, 0.6, None)
        assert ped.is_vru and not ped.is_motorized

    def test_negative_speed_rejected(self):
        with pytest.raises(ScenarioValidationError, match="speed"):
            AgentState("a", "car", 0, 0, 0, -1, 4, 2, 1000)

    def test_bad_kind_rejected(self):
        with pytest.raises(ScenarioValidationError, match="kind"):
            AgentState("a", "hovercraft", 0, 0, 0, 1, 4, 2, 1000)

    def test_nonpositive_bbox_rejected(self):
        with pytest.raises(ScenarioValidationError, match="bbox"):
            AgentState("a", "car", 0, 0, 0, 1, 0, 2, 1000)

    def test_heading_vec(self):
        a = AgentState("a", "car", 0, 0, np.pi / 2, 1, 4, 2, 1000)
        assert a.heading_vec == pytest.approx([0.0, 1.0], abs=1e-12)


class TestLaneGraph:
    def test_ego_lane_must_exist(self):
        lane = Lane("l0", "same", [[0, 0], [1, 0]])
        with pytest.raises(ScenarioValidationError, match="ego_lane_id"):
            LaneGraph(lanes=(lane,), drivable=(), ego_lane_id="nope")

    def test_short_centerline_rejected(self):
        with pytest.raises(ScenarioValidationError, match=">= 2 points"):
            Lane("l0", "same", [[0, 0]])

    def test_bad_direction_rejected(self):
        with pytest.raises(ScenarioValidationError, match="direction"):
            Lane("l0", "left", [[0, 0], [1, 0]])

    def test_self_intersecting_polygon_rejected(self):
        lane = Lane("l0", "same", [[0, 0], [1, 0]])
        bowtie = np.array([[0, 0], [2, 2], [2, 0], [0, 2]])
        with pytest.raises(ScenarioValidationError, match="self-intersecting"):
            LaneGraph(lanes=(lane,), drivable=(bowtie,), ego_lane_id="l0")


class TestPartitionLanes:
    def test_only_ego_lane(self):
        lane = Lane("l0", "same", [[0, 0], [1, 0]])
        lg = LaneGraph(lanes=(lane,), drivable=(), ego_lane_id="l0")
        assert partition_lanes(lg) == ([], [])

    def test_tag_passthrough(self):
        lanes = [Lane("ego", "same", [[0, 0], [1, 0]])]
        lanes += [Lane(f"s{i}", "same", [[0, i + 1], [1, i + 1]]) for i in range(3)]
        lanes += [Lane("o0", "opposite", [[1, -1], [0, -1]])]
        lg = LaneGraph(lanes=tuple(lanes), drivable=(), ego_lane_id="ego")
        same, opp = partition_lanes(lg)
        assert len(same) == 3 and len(opp) == 1

    def test_ego_lane_never_returned(self, intersection_seq):
        same, opp = partition_lanes(intersection_seq.lane_graph)
        ids = {ln.id for ln in same} | {ln.id for ln in opp}
        assert intersection_seq.lane_graph.ego_lane_id not in ids

    def test_intersection_fixture_counts(self, intersection_seq):
        same, opp = partition_lanes(intersection_seq.lane_graph)
        assert len(same) == intersection_seq.meta["same_count"]
        assert len(opp) == intersection_seq.meta["opposite_count"]


def test_fixtures_validate_against_schema():
    jsonschema = pytest.importorskip("jsonschema")
    import pathlib

    schema = json.loads(
        (pathlib.Path(__file__).resolve().parents[1] / "docs" / "scenario.schema.json").read_text()
    )
    for name in list_fixtures():
        doc = json.loads(fixture_path(name).read_text())
        jsonschema.validate(doc, schema)
