"""Problem files: polynomial fields, equilibrium guesses and the bundled fixtures.

A problem file is JSON::

    {
      "schema": 1,
      "n": 3,
      "variables": ["x", "y", "z"],
      "parameters": {"sigma": 10, "rho": 28, "beta": "8/3"},
      "terms": [{"target": 0, "exponents": [1, 0, 0], "coeff": "-sigma"}, ...],
      "equilibrium_guess": [0.1, 0.1, 0.1],
      "stability": "stable"
    }

Coefficients are numbers or expressions in the parameters.
"""
import json
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import sympy
from pydantic import BaseModel, Field, ValidationError, root_validator, validator
from typing_extensions import Literal

from .errors import ProblemSchemaError
from .parameterization import ManifoldProblem
from .polyfield import PolyVectorField, find_equilibrium, jacobian
from .spectrum import eigenpairs, select_and_pair

FIXTURES = Path(__file__).parent / "data" / "problems"

Value = Union[float, str]


class TermSpec(BaseModel):
    target: int
    exponents: List[int]
    coeff: Value

    class Config:
        extra = "forbid"

    @validator("exponents")
    def non_negative(cls, exponents):
        if any(e < 0 for e in exponents):
            raise ValueError("exponents must be non-negative")
        return exponents


class ProblemFile(BaseModel):
    schema_: int = Field(1, alias="schema")
    name: str = ""
    n: int
    variables: List[str] = []
    parameters: Dict[str, Value] = {}
    terms: List[TermSpec]
    equilibrium_guess: List[float]
    stability: Literal["stable", "unstable"] = "stable"
    normalization: Literal["unit", "anchor"] = "unit"
    anchor_index: Optional[int] = None

    class Config:
        extra = "forbid"
        allow_population_by_field_name = True

    @validator("schema_")
    def supported_schema(cls, schema):
        if schema != 1:
            raise ValueError(f"unsupported schema version {schema}")
        return schema

    @validator("n")
    def positive(cls, n):
        if n < 1:
            raise ValueError("n must be at least 1")
        return n

    @validator("terms", each_item=False)
    def terms_fit(cls, terms, values):
        n = values.get("n")
        if n is None:
            return terms
        for term in terms:
            if len(term.exponents) != n:
                raise ValueError(
                    f"a term has {len(term.exponents)} exponents, expected {n}"
                )
            if not 0 <= term.target < n:
                raise ValueError(f"target {term.target} outside 0..{n - 1}")
        return terms

    @root_validator(skip_on_failure=True)
    def consistent(cls, values):
        n = values["n"]
        if len(values["equilibrium_guess"]) != n:
            raise ValueError(f"equilibrium_guess needs {n} entries")
        if values["variables"] and len(values["variables"]) != n:
            raise ValueError(f"variables needs {n} names")
        if values["normalization"] == "anchor":
            anchor = values.get("anchor_index")
            if anchor is None or not 0 <= anchor < n:
                raise ValueError("anchor normalization needs an anchor_index in 0..n-1")
        return values


def _location(error: ValidationError) -> str:
    first = error.errors()[0]
    return " -> ".join(str(part) for part in first["loc"])


def _term_location(error: ValidationError, data: Mapping[str, Any]) -> str:
    """Point at the offending term when a ``terms`` validator failed on the list."""
    location = _location(error)
    if location != "terms":
        return location
    n = data.get("n")
    for index, term in enumerate(data.get("terms") or []):
        if not isinstance(term, dict):
            return f"terms -> {index}"
        if len(term.get("exponents", [])) != n:
            return f"terms -> {index} -> exponents"
        if not 0 <= term.get("target", -1) < (n or 0):
            return f"terms -> {index} -> target"
    return location


def parse_problem(data: Mapping[str, Any], source: str = "<problem>") -> ProblemFile:
    try:
        return ProblemFile.parse_obj(data)
    except ValidationError as e:
        path = _term_location(e, data)
        message = e.errors()[0]["msg"]
        raise ProblemSchemaError(f"{source}: {path}: {message}", path) from e


def fixture_path(name: str) -> Path:
    return FIXTURES / f"{name}.json"


def list_fixtures() -> List[str]:
    return sorted(p.stem for p in FIXTURES.glob("*.json"))


def resolve_problem_path(problem: Union[str, Path]) -> Path:
    """A path to a problem file, or the name of a bundled fixture."""
    path = Path(problem)
    if path.is_file():
        return path
    if fixture_path(str(problem)).is_file():
        return fixture_path(str(problem))
    raise ProblemSchemaError(
        f"{problem}: no such file and no bundled fixture "
        f"(available: {', '.join(list_fixtures())})",
        str(problem),
    )


def load_problem_file(problem: Union[str, Path]) -> ProblemFile:
    path = resolve_problem_path(problem)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ProblemSchemaError(
            f"{path}:{e.lineno}:{e.colno}: {e.msg}", f"line {e.lineno}"
        ) from e
    spec = parse_problem(data, str(path))
    if not spec.name:
        spec = spec.copy(update={"name": path.stem})
    return spec


def evaluate_parameters(
    spec: ProblemFile, overrides: Optional[Mapping[str, float]] = None
) -> Dict[str, float]:
    """Numeric parameter values; a parameter may refer to those listed before it."""
    symbols = {name: sympy.Symbol(name) for name in spec.parameters}
    values: Dict[str, float] = {}
    for name, raw in spec.parameters.items():
        if overrides and name in overrides:
            values[name] = float(overrides[name])
        else:
            values[name] = _evaluate(raw, symbols, values, f"parameters -> {name}")
    for name in overrides or {}:
        if name not in values:
            raise ProblemSchemaError(f"unknown parameter {name!r}", f"parameters -> {name}")
    return values


def _evaluate(
    raw: Value, symbols: Dict[str, sympy.Symbol], values: Dict[str, float], path: str
) -> float:
    if isinstance(raw, (int, float)):
        return float(raw)
    try:
        expression = sympy.sympify(raw, locals=symbols)
        number = expression.subs({symbols[k]: v for k, v in values.items()})
        number = complex(sympy.N(number))
    except (sympy.SympifyError, TypeError, ValueError) as e:
        raise ProblemSchemaError(f"{path}: cannot evaluate {raw!r}", path) from e
    if number.imag != 0.0:
        raise ProblemSchemaError(f"{path}: {raw!r} is not real", path)
    return number.real


def build_field(
    spec: ProblemFile, overrides: Optional[Mapping[str, float]] = None
) -> PolyVectorField:
    parameters = evaluate_parameters(spec, overrides)
    symbols = {name: sympy.Symbol(name) for name in spec.parameters}
    entries = [
        (
            term.target,
            term.exponents,
            _evaluate(term.coeff, symbols, parameters, f"terms -> {index} -> coeff"),
        )
        for index, term in enumerate(spec.terms)
    ]
    return PolyVectorField.from_entries(spec.n, entries, parameters, spec.variables)


def build_problem(
    spec: ProblemFile,
    N: int = 30,
    epsilon_max: float = 1e-5,
    r_max: float = 1e-5,
    overrides: Optional[Mapping[str, float]] = None,
) -> ManifoldProblem:
    """Field, equilibrium, spectral data and non-resonance check for one problem.

    Unstable manifolds are computed as stable manifolds of ``-g``.
    """
    g = build_field(spec, overrides)
    p = find_equilibrium(g, spec.equilibrium_guess)
    anchor = spec.anchor_index if spec.normalization == "anchor" else None
    spectral = select_and_pair(eigenpairs(jacobian(g, p), anchor), spec.stability, p, anchor)
    field = g.negated() if spec.stability == "unstable" else g
    return ManifoldProblem(field, spectral, N, epsilon_max, r_max, spec.name)


def load_problem(
    path: Union[str, Path],
    N: int = 30,
    epsilon_max: float = 1e-5,
    r_max: float = 1e-5,
    overrides: Optional[Mapping[str, float]] = None,
) -> ManifoldProblem:
    return build_problem(load_problem_file(path), N, epsilon_max, r_max, overrides)
