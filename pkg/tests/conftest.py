import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def paste(shape, mask, at, fg=0, bg=255):
    """Gray image with ``mask`` drawn in ``fg`` on ``bg`` at (y, x)."""
    img = np.full(shape, bg, dtype=np.uint8)
    y, x = at
    h, w = mask.shape
    img[y:y + h, x:x + w][mask] = fg
    return img


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
