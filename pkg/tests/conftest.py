# conftest.py
import json

import numpy as np
import pytest

from config import ScenarioConfig
from lattice import Cloud, LatticeGeometry


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def small_geom():
    return LatticeGeometry(266e-9, 6, 4)


def cloud_from_rows(rows, labels=None):
    """Cloud from strings of '.' and '1'"""
    occ = np.array([[ch == '1' for ch in row] for row in rows])
    return Cloud(occ, labels)


@pytest.fixture
def write_scenario(tmp_path):
    """Write a scenario dict to a JSON file and load it"""
    def _write(values, name='scenario.json'):
        path = tmp_path / name
        path.write_text(json.dumps(values), encoding='utf-8')
        return ScenarioConfig(path)
    return _write
