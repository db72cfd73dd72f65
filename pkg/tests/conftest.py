from __future__ import annotations

import json
from pathlib import Path

import pytest

from railcheck.config import default_config
from railcheck.faultlab import GenParams, generate_scene

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture
def minimal_doc() -> dict:
    return json.loads((FIXTURES / "minimal_scene.json").read_text())


@pytest.fixture(scope="session")
def rich_params() -> GenParams:
    return GenParams(seed=11, frames=3, tracks_per_frame=4, cameras=3, persons=2, poles=2, animals=1,
                     transitions=1)


@pytest.fixture(scope="session")
def rich_scene(rich_params):
    return generate_scene(rich_params)
