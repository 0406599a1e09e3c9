import sys
from pathlib import Path

import numpy as np
import pytest

from bsplan import CostModel, FailureRates, IntervalData, PriorSpec, SamplingPlan

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def prior1():
    return PriorSpec(2.8, 1.0, (1.5, 1.8))


@pytest.fixture
def costs1():
    return CostModel(c0=2.0, c_lin=(4.0, 4.0), c_quad=[[4.0, 4.0], [0.0, 4.0]], c_reject=40.0,
                     c_sample=0.5, salvage=0.25, c_time=0.3, c_inspect=0.1, t0=0.1)


@pytest.fixture
def costs2(costs1):
    return costs1.replace(c_sample=0.15, salvage=0.1, c_inspect=0.0)


@pytest.fixture
def plan_opt():
    return SamplingPlan.equal(4, 0.3, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# rows of the six published data sets on the (4, 0.30, 3) plan
TABLE8 = [
    [[0, 0], [0, 0], [0, 1]],
    [[0, 0], [0, 0], [0, 0]],
    [[0, 0], [1, 0], [2, 1]],
    [[1, 1], [1, 0], [1, 0]],
    [[2, 0], [2, 0]],
    [[2, 1], [0, 0], [0, 1]],
]


def table8_data(i):
    return IntervalData(np.array(TABLE8[i]), 4).padded(3)


def random_rates(rng, J=2):
    return FailureRates(rng.gamma(2.0, 0.5, size=J) + 0.01)
