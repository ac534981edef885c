import pytest
from hypothesis import HealthCheck, settings

from cryoeo.electromech import reference_device

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

REFERENCE_DUT_YAML = "dut: {f_cavity: 8.2e9, kappa: 3.0e6, f_mech: 6.0e6, gamma_m: 10.0, g0: 150.0}\n"


@pytest.fixture
def device():
    return reference_device()
