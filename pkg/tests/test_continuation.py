import logging

import numpy as np
import pytest

from manipatch.continuation import ContinuationSettings, continuation, parameter_range
from manipatch.errors import ProblemSchemaError
from manipatch.problems import load_problem_file


@pytest.fixture(scope="module")
def bridge_spec():
    return load_problem_file("bridge")


def defect_settings(**kwargs):
    return ContinuationSettings(param="beta", N=6, mode="defect", tolerance=1e-2, **kwargs)


def test_parameter_range():
    assert parameter_range(0.5, 1.9, 8).tolist() == pytest.approx(
        [0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.7, 1.9]
    )
    assert parameter_range(2.0, 3.0, 1).tolist() == [2.0]
    with pytest.raises(ValueError):
        parameter_range(0.0, 1.0, 0)


def test_settings_reject_unknown_mode():
    with pytest.raises(ValueError):
        ContinuationSettings(param="beta", mode="area")


def test_defect_sweep(bridge_spec):
    table = continuation(bridge_spec, [0.8, 1.0, 1.2], defect_settings(), threads=1)
    assert table["beta"].tolist() == [0.8, 1.0, 1.2]
    assert table["ok"].all()
    assert (table["defect"] < 1e-5).all()
    assert np.array_equal(table["gamma_1"], table["gamma_2"])


def test_order_does_not_matter(bridge_spec):
    forward = continuation(bridge_spec, [0.8, 1.2], defect_settings(), threads=1)
    backward = continuation(bridge_spec, [1.2, 0.8], defect_settings(), threads=1)
    assert forward["gamma_1"].tolist() == backward["gamma_1"].tolist()[::-1]


def test_process_pool(bridge_spec):
    pooled = continuation(bridge_spec, [0.8, 1.0, 1.2], defect_settings(), threads=2)
    serial = continuation(bridge_spec, [0.8, 1.0, 1.2], defect_settings(), threads=1)
    assert pooled.equals(serial)


def test_failed_rows_are_recorded(make_problem, caplog):
    path = make_problem(
        "resonant",
        2,
        [(0, (1, 0), -1.0), (1, (0, 1), "-k"), (1, (2, 0), 1.0)],
        parameters={"k": 2.5},
    )
    spec = load_problem_file(path)
    settings = ContinuationSettings(param="k", N=6, mode="defect", tolerance=1e-2)
    with caplog.at_level(logging.WARNING):
        table = continuation(spec, [2.5, 2.0], settings, threads=1)
    assert table["ok"].tolist() == [True, False]
    failed = table.iloc[1]
    assert failed["error"] == "ResonanceDetected"
    assert failed["alpha"] == [0, 2]
    assert np.isnan(failed["gamma_1"])
    assert "k = 2 failed" in caplog.text


def test_unknown_parameter(bridge_spec):
    with pytest.raises(ProblemSchemaError) as info:
        continuation(bridge_spec, [1.0], ContinuationSettings(param="rho"))
    assert info.value.path == "parameters -> rho"
