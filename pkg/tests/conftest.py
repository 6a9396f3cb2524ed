import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fbh.forward import FrequencySweep, make_geometry
from fbh.quasioptics import BeamParams

settings.register_profile(
    "fbh", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("fbh")


@pytest.fixture
def small_sweep():
    # 16 tones across 24-30 GHz
    return FrequencySweep(24.0, 30.0, 0.4)


@pytest.fixture
def small_geometry():
    return make_geometry(32, 5.2)


@pytest.fixture
def wide_beam():
    # broad narrow-side beam so offsets in x barely matter
    return BeamParams(60.0, 11.11, 1200.0)


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))
