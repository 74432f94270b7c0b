"""
Shared fixtures for the test suite.
"""

import math
import os
import sys

import numpy as np
import pytest

# Add the project root to Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from app.core.config import Settings  # noqa: E402
from app.models.distribution import DiscreteExchangeable  # noqa: E402

TABLE1 = {1: 0.3679, 2: 0.3238, 3: 0.3093, 4: 0.3021, 5: 0.2979, 10: 0.2896}
RESERVES = {2: 0.2031878700, 3: 0.1390830777, 4: 0.1055434797, 5: 0.0849914662}
INV_E = math.exp(-1.0)

MIXTURE_MATRIX = [["5/16", "7/64", "5/64"], ["7/64", "17/128", "9/128"], ["5/64", "9/128", "5/128"]]
AFFILIATED_MATRIX = [["112/503", "64/503", "32/503"], ["64/503", "38/503", "64/503"], ["32/503", "64/503", "33/503"]]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def mixture_example():
    return DiscreteExchangeable.from_matrix([1.0, 2.0, 3.0], MIXTURE_MATRIX)


@pytest.fixture
def affiliated_example():
    return DiscreteExchangeable.from_matrix([1.0, 2.0, 3.0], AFFILIATED_MATRIX)


@pytest.fixture
def fast_settings(monkeypatch):
    """Settings with small probe counts, patched into the saddle and mechanism services."""
    fast = Settings(
        SADDLE_IID_PROBES=12,
        SADDLE_MIXTURE_PROBES=4,
        SADDLE_AFFILIATED_PROBES=3,
        SADDLE_RESERVE_GRID=10,
        SADDLE_RANDOM_RESERVES=8,
        MC_CHUNK=4096,
        MC_WORKERS=2,
    )
    monkeypatch.setattr("app.services.saddle.get_settings", lambda: fast)
    monkeypatch.setattr("app.services.mechanisms.get_settings", lambda: fast)
    return fast
