import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from fmp.model import PomdpModel

DATA = Path(__file__).parent / "data"

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def random_model(rng, S, A, O, gamma=0.5, reward_max=1.0, sparse=False) -> PomdpModel:
    T = rng.random((A, S, S))
    Z = rng.random((S, O))
    if sparse:
        T *= rng.random((A, S, S)) < 0.5
        Z *= rng.random((S, O)) < 0.5
        T[..., 0] += 1e-3
        Z[:, 0] += 1e-3
    T /= T.sum(axis=2, keepdims=True)
    Z /= Z.sum(axis=1, keepdims=True)
    R = reward_max * rng.random((S, A))
    return PomdpModel(T, Z, R, reward_max, gamma)


def random_belief(rng, S):
    b = rng.random(S)
    return b / b.sum()


@st.composite
def models(draw, max_states=4, max_actions=2, max_obs=2, gamma=0.5):
    seed = draw(st.integers(0, 2**32 - 1))
    S = draw(st.integers(1, max_states))
    A = draw(st.integers(1, max_actions))
    O = draw(st.integers(1, max_obs))
    rng = np.random.default_rng(seed)
    return random_model(rng, S, A, O, gamma), random_belief(rng, S)


def sensor_model() -> PomdpModel:
    """Identity dynamics, one action, Z(o1|s1)=0.8, Z(o1|s2)=0.2."""
    T = np.eye(2)[None]
    Z = np.array([[0.8, 0.2], [0.2, 0.8]])
    R = np.zeros((2, 1))
    return PomdpModel(T, Z, R, 1.0, 0.95)


@pytest.fixture
def sensor():
    return sensor_model()


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in sorted(acceptance.RESULTS.items()):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
