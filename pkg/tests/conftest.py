import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from forch.constitutive import M0, FlowParams, GeneralizedPolynomial
from forch.linearize import CoefficientField
from forch.steady import integrate_profile

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("forch", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("forch")


def law(a=1.0, b=1.0, alpha=1.0):
    return GeneralizedPolynomial.two_term(a, b, alpha)


def params(n=3, c1=1.0, c2=1.0, s0=0.5, g1=None, g2=None, r0=1.0, model=M0):
    return FlowParams(n, r0, c1, c2, g1 or law(), g2 or law(), model, s0)


@pytest.fixture(scope="session")
def equilibrium_field_n2():
    """Constant profile S = 1/2 (c1 = c2 = 1, g = 1 + s, n = 2) on [1, 100]."""
    prof = integrate_profile(params(n=2), 100.0)
    return CoefficientField(prof)


@pytest.fixture(scope="session")
def equilibrium_field_n3():
    prof = integrate_profile(params(n=3), 1e4)
    return CoefficientField(prof)


@pytest.fixture(scope="session")
def case_d_profile():
    return integrate_profile(params(n=3, c1=1.0, c2=-1.0), 1e4)


@pytest.fixture(scope="session")
def case_d_field(case_d_profile):
    return CoefficientField(case_d_profile)


@pytest.fixture(scope="session")
def case_c_profile():
    return integrate_profile(params(n=3, c1=-1.0, c2=1.0), 1e4)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log
    if acceptance_log.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.lines():
            terminalreporter.write_line(line)
