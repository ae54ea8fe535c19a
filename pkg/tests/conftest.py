import numpy as np
import pytest
from hypothesis import settings

from hris_uav.channels import sample_channels
from hris_uav.config import SystemConfig

settings.register_profile("pkg", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("pkg")


def small_config(**kw) -> SystemConfig:
    """Desk-sized scenario used across unit tests."""
    base = dict(K=2, Nt=2, Nx=4, Ny=1, Na=1, T=4, seed=3)
    base.update(kw)
    return SystemConfig(**base)


def centre(cfg):
    return np.array([cfg.D / 2, cfg.D / 2, cfg.z0])


@pytest.fixture
def static_setup():
    cfg = small_config()
    return cfg, sample_channels(cfg, centre(cfg))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
