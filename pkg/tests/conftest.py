"""Shared fixtures. The expensive runs (fits, refinements) are session-scoped."""
import numpy as np
import pytest

from momentrecon import problems
from momentrecon.oracle import invariant_moments, occupation_moments
from momentrecon.pipeline import reconstruct_joint, reconstruct_process
from momentrecon.refine import local_optimize


@pytest.fixture(scope="session")
def di_prob():
    return problems.double_integrator()


@pytest.fixture(scope="session")
def di_moments(di_prob):
    return occupation_moments(problems.double_integrator_optimum(), 8, box=di_prob.box)


@pytest.fixture(scope="session")
def di_reconstruction(di_prob, di_moments):
    return reconstruct_process(di_moments, di_prob)


@pytest.fixture(scope="session")
def di_refined(di_prob, di_reconstruction):
    return local_optimize(di_prob, di_reconstruction.assembled, N=40)


@pytest.fixture(scope="session")
def nc_prob():
    return problems.nonconvex_integrator()


@pytest.fixture(scope="session")
def nc_moments(nc_prob):
    return occupation_moments(problems.nonconvex_coarse_process(), 8, box=nc_prob.box)


@pytest.fixture(scope="session")
def nc_reconstruction(nc_prob, nc_moments):
    return reconstruct_process(nc_moments, nc_prob)


@pytest.fixture(scope="session")
def nc_refined(nc_prob, nc_reconstruction):
    return local_optimize(nc_prob, nc_reconstruction.assembled, N=40)


@pytest.fixture(scope="session")
def vdp_moments():
    return invariant_moments(problems.van_der_pol_dynamics(), problems.VDP_X0, 200.0, 8, problems.VDP_BOX)


@pytest.fixture(scope="session")
def vdp_support(vdp_moments):
    return reconstruct_joint(vdp_moments, 101, 1e-3)


@pytest.fixture(scope="session")
def vdp_cycle():
    return problems.van_der_pol_cycle()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
