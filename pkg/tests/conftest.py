import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from visualmixer.imagecore import ImageTensor

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_tensor(gen, channels, height, width):
    return ImageTensor(gen.integers(0, 256, size=(channels, height, width), dtype=np.uint8))


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    lines = test_acceptance.summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
