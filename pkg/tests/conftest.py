import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from switchfb.channel import MacChannel, binary_adder

settings.register_profile(
    "switchfb", deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("switchfb")

ACCEPTANCE_LINES: list[str] = []


def random_channel(rng, k1=None, k2=None, ny=None) -> MacChannel:
    k1 = k1 or int(rng.integers(2, 4))
    k2 = k2 or int(rng.integers(2, 4))
    ny = ny or int(rng.integers(2, 5))
    W = rng.dirichlet(np.full(ny, 0.7), size=(k1, k2))
    # occasionally zero out cells to exercise 0 log 0 paths
    if rng.random() < 0.3:
        mask = rng.random(W.shape) < 0.2
        mask[..., 0] = False
        W = np.where(mask, 0.0, W)
        W /= W.sum(axis=2, keepdims=True)
    return MacChannel(W)


def random_class_channel(rng, k1=2, k2=2, extra=2) -> MacChannel:
    """Each input pair owns a disjoint set of outputs, so outputs reveal both inputs."""
    pairs = k1 * k2
    ny = pairs + extra
    owner = np.concatenate([np.arange(pairs), rng.integers(0, pairs, extra)])
    rng.shuffle(owner)
    W = np.zeros((k1, k2, ny))
    for c in range(pairs):
        ys = np.flatnonzero(owner == c)
        W[c // k2, c % k2, ys] = rng.dirichlet(np.ones(ys.size))
    return MacChannel(W)


@st.composite
def channels(draw, max_in=3, max_out=4):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    k1 = draw(st.integers(2, max_in))
    k2 = draw(st.integers(2, max_in))
    ny = draw(st.integers(2, max_out))
    return random_channel(rng, k1, k2, ny)


@st.composite
def class_channels(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_class_channel(np.random.default_rng(seed), extra=draw(st.integers(0, 3)))


@pytest.fixture(scope="session")
def adder():
    return binary_adder()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
