import pytest

from cornerlayer.config import ProblemConfig

BASE = dict(mu0=1.0, mu1=2.0, rho0=1.0, rho1=1.5, omega=[1.0, 0.5])


def make_config(theta="pi/2", **kw):
    data = dict(BASE, theta=theta)
    data.update(kw)
    return ProblemConfig.from_mapping(data)


@pytest.fixture(params=["pi/2", "pi*2/3", 2.0], ids=["right", "two_thirds", "irrational"])
def config(request):
    return make_config(request.param)


@pytest.fixture
def right_angle():
    return make_config("pi/2")


@pytest.fixture
def irrational():
    return make_config(2.0)


TOML = """\
theta = "pi/2"
mu0 = 1.0
mu1 = 2.0
rho0 = 1.0
rho1 = 1.5
omega = [1.0, 0.5]
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "problem.toml"
    path.write_text(TOML)
    return path


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for r in sorted(results, key=lambda r: (r.criterion, str(r.theta))):
        terminalreporter.write_line(r.line())
