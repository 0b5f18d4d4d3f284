"""Bundled toy scenarios used by the test suite and the docs examples.

The JSON files are generated by scripts/make_fixtures.py and shipped as
package data; they are small hand-designed scenes (cut-in, intersection
with a stopped oncoming car, pedestrian crossing, straight road, wall
occluder), not recordings.
"""

from importlib import resources
from pathlib import Path

from ..scenario import ScenarioSequence, load_scenario

_DATA = "data"


def fixture_path(name: str) -> Path:
    """Filesystem path of a bundled fixture (name with or without .json)."""
    if not name.endswith(".json"):
        name += ".json"
    base = resources.files(__package__) / _DATA / name
    p = Path(str(base))
    if not p.exists():
        raise FileNotFoundError(f"no bundled fixture named {name!r}; have: {list_fixtures()}")
    return p


def list_fixtures() -> list[str]:
    base = Path(str(resources.files(__package__) / _DATA))
    return sorted(p.stem for p in base.glob("*.json"))


def load_fixture(name: str) -> ScenarioSequence:
    return load_scenario(fixture_path(name))
