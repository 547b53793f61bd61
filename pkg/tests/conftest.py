import numpy as np
import pytest

from kirchlab import DissipationSpec, NonlinearitySpec, OperatorSpec, ProblemSetup, SolverConfig
from kirchlab.experiments import build_setup, load_config, scenario_dir


def make_setup(eps, lam, u0, u1, m=None, p=1.0):
    m = NonlinearitySpec.constant(1.0) if m is None else m
    return ProblemSetup(eps, OperatorSpec(np.asarray(lam, dtype=float)), m, DissipationSpec(p), u0, u1)


def bundled(name, eps=0.125):
    return build_setup(load_config(scenario_dir() / f"{name}.json"), eps)


@pytest.fixture(scope="session")
def critical_setup():
    """Coercive affine-m scenario used for the eps sweeps."""
    return bundled("critical_p1")


@pytest.fixture(scope="session")
def short_cfg():
    return SolverConfig(T=100.0)


# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
