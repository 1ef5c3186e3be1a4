import json
from pathlib import Path

import pytest

from manipatch.logger import logger
from manipatch.parameterization import solve_homological
from manipatch.problems import load_problem

FIXTURES = Path(__file__).parent / "fixtures"


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "slow: end-to-end runs at full order (deselect with -m 'not slow')"
    )


@pytest.fixture(autouse=True)
def propagate_logs():
    # the CLI replaces the handlers and stops propagation
    logger.handlers[:] = []
    logger.propagate = True
    logger.setLevel("NOTSET")
    yield


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def lorenz():
    return load_problem("lorenz", N=12)


@pytest.fixture(scope="session")
def lorenz_par(lorenz):
    return solve_homological(lorenz)


@pytest.fixture(scope="session")
def lorenz_eye():
    return load_problem("lorenz_eye", N=10)


@pytest.fixture(scope="session")
def bridge():
    return load_problem("bridge", N=12, r_max=1e-5)


@pytest.fixture(scope="session")
def bridge_par(bridge):
    return solve_homological(bridge)


@pytest.fixture(scope="session")
def fhn():
    return load_problem("fhn", N=10)


@pytest.fixture(scope="session")
def fhn_par(fhn):
    return solve_homological(fhn)


@pytest.fixture
def make_problem(tmp_path):
    """Write a problem file from ``(target, exponents, coeff)`` terms."""

    def make(name, n, terms, parameters=None, guess=None, **extra):
        data = {
            "schema": 1,
            "name": name,
            "n": n,
            "parameters": parameters or {},
            "terms": [
                {"target": t, "exponents": list(e), "coeff": c} for t, e, c in terms
            ],
            "equilibrium_guess": guess or [0.0] * n,
            "stability": "stable",
            **extra,
        }
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(data, indent=2))
        return path

    return make
