from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the oracles helper module

from motionlab import DEFAULT_PARAMS
from motionlab.maps import bundled_map


@pytest.fixture(scope="session")
def params():
    return DEFAULT_PARAMS


@pytest.fixture(scope="session")
def track():
    """The bundled loop-with-crossing map."""
    return bundled_map()


def straight_map_doc(length: float = 20.0, width: float = 0.3, name: str = "main") -> dict:
    """Single straight lanelet along +x, centered on y = 0."""
    half = width / 2.0
    return {
        "lanelets": [
            {
                "id": name,
                "left": [[0.0, half], [length, half]],
                "right": [[0.0, -half], [length, -half]],
                "center": [[0.0, 0.0], [length, 0.0]],
                "successors": [],
            }
        ],
        "reference_paths": [{"name": name, "lanelets": [name]}],
    }
