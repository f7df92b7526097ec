import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("sped", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("sped")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


class ExactPilot:
    """Pilot whose transform is the exact contaminated transform g * f."""

    kind = "exact"
    band = None

    def __init__(self, target, error):
        self.target, self.error = target, error

    def ft(self, omega):
        return self.target.cf(omega) * self.error.cf(omega)

    def envelope(self, omega):
        return np.abs(self.error.cf(omega))

    def describe(self):
        return {"kind": self.kind}


@pytest.fixture
def exact_pilot():
    return ExactPilot
