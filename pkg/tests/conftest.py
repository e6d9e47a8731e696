import numpy as np
import pytest

from kernelid import spectral
from kernelid.kernel import TOY_KERNEL, ExpSumKernel, UniformGrid
from kernelid.measurement import downsample
from kernelid.pipeline import paper_config, run_forward

WAVE_KERNEL = ExpSumKernel([(1.0, 0.0)])


@pytest.fixture(scope="session")
def fine_grid():
    return UniformGrid.from_horizon(5.0, 1e-3)


@pytest.fixture(scope="session")
def toy_modes(fine_grid):
    return spectral.solve_modes_expsum(TOY_KERNEL, 400, fine_grid)


@pytest.fixture(scope="session")
def wave_modes(fine_grid):
    return spectral.solve_modes_expsum(WAVE_KERNEL, 400, fine_grid)


@pytest.fixture(scope="session")
def toy_sim():
    return run_forward(paper_config())


@pytest.fixture(scope="session")
def wave_sim():
    return run_forward(paper_config(kernel=((1.0, 0.0),)))


def coarse(sim, rate=10.0):
    """Noiseless measurement-grid view of a simulation."""
    return {
        name: downsample(getattr(sim, name), rate)
        for name in ("K", "Yf", "y_eta", "M", "N", "g")
    }


@pytest.fixture(scope="session")
def toy_data(toy_sim):
    return coarse(toy_sim)


@pytest.fixture(scope="session")
def wave_data(wave_sim):
    return coarse(wave_sim)


def max_abs(a):
    return float(np.max(np.abs(a)))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
