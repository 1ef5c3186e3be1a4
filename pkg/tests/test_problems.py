import json

import numpy as np
import pytest

from manipatch.errors import ProblemSchemaError
from manipatch.problems import (
    build_field,
    evaluate_parameters,
    fixture_path,
    list_fixtures,
    load_problem,
    load_problem_file,
    parse_problem,
)


def lorenz_data():
    return json.loads(fixture_path("lorenz").read_text())


def test_fixtures():
    assert list_fixtures() == ["bridge", "fhn", "lorenz", "lorenz_eye"]


def test_load_lorenz(lorenz):
    assert lorenz.name == "lorenz"
    assert lorenz.n == 3 and lorenz.n_s == 2
    assert np.allclose(lorenz.spectral.p, 0.0)
    assert lorenz.field.parameters["beta"] == pytest.approx(8 / 3)
    assert lorenz.field.variables == ("x", "y", "z")


def test_load_bridge(bridge):
    assert bridge.spectral.pairing == ((0, 1),)
    assert bridge.spectral.normalization == "anchor"
    assert np.allclose(bridge.spectral.vectors[0], 1.0)


def test_unstable_problem_is_time_reversed(lorenz_eye):
    assert lorenz_eye.spectral.stability == "unstable"
    assert np.all(lorenz_eye.spectral.lambdas.real < 0)


def test_name_defaults_to_stem(tmp_path):
    data = lorenz_data()
    del data["name"]
    path = tmp_path / "butterfly.json"
    path.write_text(json.dumps(data))
    assert load_problem_file(path).name == "butterfly"


def test_bad_exponents_point_at_the_term():
    data = lorenz_data()
    data["terms"][3]["exponents"] = [0, 1]
    with pytest.raises(ProblemSchemaError) as info:
        parse_problem(data)
    assert info.value.path == "terms -> 3 -> exponents"


def test_bad_target():
    data = lorenz_data()
    data["terms"][1]["target"] = 3
    with pytest.raises(ProblemSchemaError) as info:
        parse_problem(data)
    assert info.value.path == "terms -> 1 -> target"


@pytest.mark.parametrize(
    "change, path",
    [
        ({"schema": 2}, "schema"),
        ({"stability": "neutral"}, "stability"),
        ({"equilibrium_guess": [0.0]}, "__root__"),
        ({"normalization": "anchor"}, "__root__"),
        ({"colour": "red"}, "colour"),
    ],
)
def test_schema_errors(change, path):
    data = {**lorenz_data(), **change}
    with pytest.raises(ProblemSchemaError) as info:
        parse_problem(data)
    assert info.value.path == path


def test_negative_exponent():
    data = lorenz_data()
    data["terms"][0]["exponents"] = [-1, 0, 0]
    with pytest.raises(ProblemSchemaError) as info:
        parse_problem(data)
    assert info.value.path.startswith("terms -> 0")


def test_bad_json_reports_the_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "schema": 1,\n  "n": 3,,\n}')
    with pytest.raises(ProblemSchemaError) as info:
        load_problem_file(path)
    assert info.value.path == "line 3"
    assert "broken.json:3:" in str(info.value)


def test_unknown_problem():
    with pytest.raises(ProblemSchemaError) as info:
        load_problem_file("no_such_problem")
    assert "lorenz" in str(info.value)


@pytest.mark.parametrize("coeff", ["sigma +* 2", "sqrt(-sigma)", "undefined_name"])
def test_bad_expression(coeff):
    data = lorenz_data()
    data["terms"][0]["coeff"] = coeff
    with pytest.raises(ProblemSchemaError) as info:
        build_field(parse_problem(data))
    assert info.value.path == "terms -> 0 -> coeff"


def test_parameters_refer_to_earlier_ones():
    data = lorenz_data()
    data["parameters"] = {"sigma": 10, "rho": "2*sigma + 8", "beta": "sigma/rho"}
    values = evaluate_parameters(parse_problem(data))
    assert values == {"sigma": 10.0, "rho": 28.0, "beta": pytest.approx(10 / 28)}


def test_overrides():
    spec = load_problem_file("lorenz")
    assert evaluate_parameters(spec, {"rho": 20})["rho"] == 20.0
    problem = load_problem("bridge", N=5, overrides={"beta": 0.5})
    assert problem.field.parameters["beta"] == 0.5
    with pytest.raises(ProblemSchemaError) as info:
        evaluate_parameters(spec, {"kappa": 1.0})
    assert info.value.path == "parameters -> kappa"
