import math

import numpy as np
import pytest

from bohmflow.analysis import distance_channels, detect_events
from bohmflow.integrate import IntegrationControls, integrate_with_deviation
from bohmflow.models import (OscillatorFrequencies, SingleNodeModel,
                             make_two_qubit)

SQRT1_2 = math.sqrt(0.5)


@pytest.fixture(scope="session")
def two_qubit_max():
    return make_two_qubit(SQRT1_2)


@pytest.fixture(scope="session")
def two_qubit_weak():
    return make_two_qubit(0.001)


@pytest.fixture(scope="session")
def two_qubit_mid():
    return make_two_qubit(0.3)


@pytest.fixture(scope="session")
def single_node():
    return SingleNodeModel(1.0, 1.0, SQRT1_2,
                           OscillatorFrequencies(1.0, math.sqrt(3.0)))


@pytest.fixture(scope="session")
def fig4_run(two_qubit_weak):
    """Weak-entanglement chaotic exemplar: c2=0.001 from (0, 3) on [0, 20]
    at 0.01 sampling/renormalization, with distance channels and events."""
    controls = IntegrationControls(t_final=20.0, dt_sample=0.01,
                                   renorm_dt=0.01)
    record = integrate_with_deviation(two_qubit_weak, 0.0, 3.0, controls)
    channels = distance_channels(record, two_qubit_weak)
    events = detect_events(channels)
    return record, channels, events


@pytest.fixture(scope="session")
def ordered_long(two_qubit_weak):
    """Ordered exemplar from (3.54, -2.69) integrated to t = 1e4."""
    controls = IntegrationControls(t_final=1e4, dt_sample=0.01,
                                   renorm_dt=0.01)
    return integrate_with_deviation(two_qubit_weak, 3.54, -2.69, controls)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260809)
