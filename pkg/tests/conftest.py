import math

import numpy as np
import pytest

from kglab.spectral import Field, GridSpec, forward_transform


@pytest.fixture
def small_grid():
    return GridSpec(box_period=8 * math.pi, plane_points=16, mode_cutoff=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_real_field(grid: GridSpec, rng, scale: float = 1.0, dealias: bool = True) -> Field:
    f = forward_transform(scale * rng.standard_normal(grid.shape), grid)
    return f.dealiased() if dealias else f


def bump(grid: GridSpec, width: float = 1.5, eps: float = 1.0, y_amp: float = 0.5) -> Field:
    x1, x2, y = grid.mesh()
    v = eps * np.exp(-(x1 ** 2 + x2 ** 2) / (2 * width ** 2)) * (1 + y_amp * np.cos(y))
    return forward_transform(v, grid).dealiased()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
