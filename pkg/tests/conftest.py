import time

import numpy as np
import pytest

from tiltobs.simulator import ImuNoiseModel, Scenario, run_scenario


@pytest.fixture(scope="session")
def standard_run():
    """The benchmark scenario (noisy, two pushes), run once per session.

    Returns (result, elapsed_seconds); several tests and most acceptance
    criteria read from this single run.
    """
    scenario = Scenario()
    t0 = time.perf_counter()
    result = run_scenario(scenario)
    return result, time.perf_counter() - t0


@pytest.fixture(scope="session")
def quiet_run():
    """Noiseless, push-free variant used for monotonicity checks."""
    scenario = Scenario(
        noise=ImuNoiseModel(gyro_sd=0.0, accel_sd=0.0, seed=0),
        pushes=(),
        duration=10.0,
    )
    return run_scenario(scenario)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
