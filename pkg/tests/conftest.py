import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dirac_riesz import (
    constant_potential,
    nonnormal_potential,
    random_smooth_potential,
    trig_potential,
    zero_potential,
)

settings.register_profile(
    "default", deadline=None, max_examples=15, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def suite():
    """Test potentials used across modules: (label, potential)."""
    return [
        ("zero", zero_potential(1)),
        ("const", constant_potential(1.0)),
        ("trig", trig_potential()),
        ("nonnormal", nonnormal_potential(r=2)),
    ]
