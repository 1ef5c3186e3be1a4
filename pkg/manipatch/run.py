"""Orchestration of one command-line run.

``RunConfig`` is validated from the merged configuration mapping plus the
command-line flags. ``run`` writes its artifacts under ``output_dir`` and
returns the exit status instead of raising for domain errors.
"""
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ValidationError, root_validator, validator
from typing_extensions import Literal

from .continuation import ContinuationSettings, continuation, parameter_range
from .errors import (
    DimensionMismatch,
    ManipatchError,
    ProblemSchemaError,
    describe,
    exit_code_for,
)
from .geometry import conjugacy_errors, export_mesh, sample_surface
from .logger import logger
from .optimize import RayWeights, level_set_method1, proof_dichotomy, ray_method2
from .parameterization import ManifoldProblem, Parameterization, defect, solve
from .problems import build_problem, load_problem_file
from .reports import (
    read_coefficients,
    residual_summary,
    write_coefficients,
    write_json,
    write_table,
)
from .series import rescale
from .utils import resolve_output_dir
from .validation import (
    bounds_from_scratch,
    build_A,
    compute_bounds,
    radii_report,
    require_quadratic,
)

Command = Literal["solve", "validate", "optimize", "continue", "export", "check-conjugacy"]


class RunConfig(BaseModel):
    command: Command
    problem: str
    N: int = 30
    epsilon_max: float = 1e-5
    r_max: float = 1e-5
    output_dir: Path = Path("manipatch-out")
    seed: int = 0
    progress: bool = False
    parameters: Dict[str, float] = {}

    # solver
    method: Literal["homological", "newton"] = "homological"
    newton_tolerance: float = 1e-12
    newton_step_tolerance: float = 1e-13
    newton_max_iterations: int = 30
    coefficients: Optional[Path] = None

    # validate
    mode: Literal["defect", "proof"] = "defect"
    gamma: Optional[List[float]] = None
    interval: bool = True
    z0_fallback: Optional[float] = 1e-2
    from_scratch: bool = False

    # optimize
    optimize_method: Literal["area", "ray", "proof"] = "ray"
    weights: Optional[List[float]] = None
    samples: int = 64
    span: float = 32.0
    tolerance: float = 1e-3
    gamma_cap: float = 1e6
    area_grid: int = 33
    winner_grid: int = 65

    # continue
    param: Optional[str] = None
    start: Optional[float] = None
    stop: Optional[float] = None
    steps: int = 15
    threads: Optional[int] = None
    continuation_mode: Literal["proof", "defect"] = "proof"

    # export
    grid: int = 65
    format: Literal["obj", "csv"] = "obj"
    out: Optional[Path] = None

    # check-conjugacy
    conjugacy_samples: int = 100
    time: float = 0.5
    steps_per_unit_time: int = 64

    class Config:
        extra = "forbid"

    @validator("N")
    def order_at_least_two(cls, N):
        if N < 2:
            raise ValueError("N must be at least 2")
        return N

    @validator("epsilon_max", "r_max", "tolerance", "gamma_cap", "span")
    def positive(cls, value):
        if not value > 0:
            raise ValueError("must be positive")
        return value

    @validator("gamma", "weights")
    def positive_entries(cls, values):
        if values is not None and not all(v > 0 for v in values):
            raise ValueError("entries must be positive")
        return values

    @validator("grid", "area_grid", "winner_grid")
    def grid_size(cls, value):
        if value < 2:
            raise ValueError("grids need at least 2 points per axis")
        return value

    @validator("samples", "steps", "conjugacy_samples", "steps_per_unit_time")
    def count(cls, value):
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @validator("threads")
    def threads_positive(cls, value):
        if value is not None and value < 1:
            raise ValueError("must be at least 1")
        return value

    @validator("time")
    def non_negative_time(cls, value):
        if value < 0:
            raise ValueError("must be non-negative")
        return value

    @root_validator(skip_on_failure=True)
    def sweep_defined(cls, values):
        if values["command"] == "continue":
            missing = [k for k in ("param", "start", "stop") if values.get(k) is None]
            if missing:
                raise ValueError(f"continue needs {', '.join(missing)}")
        return values

    @classmethod
    def from_config(cls, config: Dict[str, Any], **flags: Any) -> "RunConfig":
        """Build from a merged configuration mapping; flags left at ``None`` keep
        the configured value."""
        solver = config.get("solver", {})
        proof = config.get("proof", {})
        optimizer = config.get("optimizer", {})
        geometry = config.get("geometry", {})
        conjugacy = config.get("conjugacy", {})
        values: Dict[str, Any] = {
            "N": config.get("order", 30),
            "epsilon_max": config.get("defect", {}).get("epsilon_max", 1e-5),
            "r_max": proof.get("r_max", 1e-5),
            "interval": proof.get("interval", True),
            "z0_fallback": proof.get("z0_fallback", 1e-2),
            "method": solver.get("method", "homological"),
            "newton_tolerance": solver.get("newton_tolerance", 1e-12),
            "newton_step_tolerance": solver.get("newton_step_tolerance", 1e-13),
            "newton_max_iterations": solver.get("newton_max_iterations", 30),
            "samples": optimizer.get("samples", 64),
            "span": optimizer.get("span", 32.0),
            "tolerance": optimizer.get("tolerance", 1e-3),
            "gamma_cap": optimizer.get("gamma_cap", 1e6),
            "area_grid": optimizer.get("area_grid", 33),
            "winner_grid": optimizer.get("winner_grid", 65),
            "grid": geometry.get("grid", 65),
            "format": geometry.get("format", "obj"),
            "steps_per_unit_time": geometry.get("steps_per_unit_time", 64),
            "conjugacy_samples": conjugacy.get("samples", 100),
            "time": conjugacy.get("time", 0.5),
            "threads": config.get("continuation", {}).get("threads"),
            "continuation_mode": config.get("continuation", {}).get("mode", "proof"),
            "seed": config.get("run", {}).get("seed", 0),
        }
        values.update({k: v for k, v in flags.items() if v is not None})
        values["output_dir"] = resolve_output_dir(config, flags.get("output_dir"))
        try:
            return cls(**values)
        except ValidationError as e:
            first = e.errors()[0]
            path = " -> ".join(str(part) for part in first["loc"])
            raise ProblemSchemaError(f"{path}: {first['msg']}", path) from e


@dataclass
class RunResult:
    command: str
    exit_code: int = 0
    artifacts: List[Path] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    error: Optional[Dict[str, Any]] = None


def _problem(config: RunConfig) -> ManifoldProblem:
    spec = load_problem_file(config.problem)
    return build_problem(spec, config.N, config.epsilon_max, config.r_max, config.parameters)


def _parameterization(config: RunConfig, problem: ManifoldProblem) -> Parameterization:
    if config.coefficients is not None:
        coeffs, gamma, header = read_coefficients(config.coefficients)
        if coeffs.n != problem.n or coeffs.n_s != problem.n_s:
            raise DimensionMismatch(
                f"{config.coefficients} holds a series with n = {coeffs.n}, "
                f"n_s = {coeffs.n_s} for a problem with n = {problem.n}, n_s = {problem.n_s}"
            )
        logger.info("Read order %d coefficients from %s", header["N"], config.coefficients)
        return Parameterization(coeffs, problem.with_order(header["N"]), gamma)
    options = {}
    if config.method == "newton":
        options = {
            "tol": config.newton_tolerance,
            "step_tol": config.newton_step_tolerance,
            "max_iterations": config.newton_max_iterations,
        }
    return solve(problem, config.method, config.progress, **options)


def _gamma(config: RunConfig, problem: ManifoldProblem):
    gamma = config.gamma if config.gamma is not None else [1.0] * problem.n_s
    if len(gamma) != problem.n_s:
        raise DimensionMismatch(f"{len(gamma)} scalings for {problem.n_s} directions")
    return problem.scaling(gamma)


def _path(config: RunConfig, problem: ManifoldProblem, suffix: str) -> Path:
    return config.output_dir / f"{problem.name}_{suffix}"


def _solve(config: RunConfig, result: RunResult) -> None:
    problem = _problem(config)
    par = _parameterization(config, problem)
    summary = residual_summary(par)
    spectral = {
        **problem.spectral.report(),
        "resonance": problem.resonance.report(),
        "field_degree": problem.field.d,
    }
    result.artifacts += [
        write_coefficients(par, _path(config, problem, "coefficients.json")),
        write_json(spectral, _path(config, problem, "spectrum.json")),
        write_json(summary, _path(config, problem, "residual.json")),
    ]
    result.summary = {"N": par.N, "n_s": problem.n_s, "defect": summary["defect"]}


def _validate(config: RunConfig, result: RunResult) -> None:
    problem = _problem(config)
    par = _parameterization(config, problem)
    gamma = _gamma(config, problem)
    if config.mode == "defect":
        value = defect(par, gamma)
        report = {
            "gamma": list(gamma.gamma),
            "defect": value,
            "epsilon_max": problem.epsilon_max,
            "verdict": value < problem.epsilon_max,
            "N": par.N,
        }
    else:
        require_quadratic(par)
        if config.from_scratch:
            bounds = bounds_from_scratch(par, gamma, config.interval)
        else:
            bounds = compute_bounds(
                par, build_A(par), gamma, config.interval, config.z0_fallback
            )
        report = radii_report(bounds, problem.r_max, par.N).as_dict()
    result.artifacts.append(write_json(report, _path(config, problem, f"{config.mode}.json")))
    result.summary = report
    if not report["verdict"]:
        result.exit_code = 5


def _optimize(config: RunConfig, result: RunResult) -> None:
    problem = _problem(config)
    par = _parameterization(config, problem)
    pairing = problem.spectral.pairing
    method = config.optimize_method
    if method == "area":
        outcome = level_set_method1(
            par,
            config.samples,
            config.span,
            config.tolerance,
            config.gamma_cap,
            config.area_grid,
            config.winner_grid,
            config.progress,
        )
    elif method == "ray":
        weights = (
            RayWeights(tuple(config.weights), pairing)
            if config.weights
            else RayWeights.uniform(problem.n_s, pairing)
        )
        outcome = ray_method2(
            par, weights, config.tolerance, config.gamma_cap, config.winner_grid
        )
    else:
        outcome = proof_dichotomy(
            par,
            build_A(par),
            config.tolerance,
            config.gamma_cap,
            interval=config.interval,
            z0_fallback=config.z0_fallback,
            area_grid=config.winner_grid,
        )
    result.artifacts += [
        write_json(outcome.as_dict(), _path(config, problem, f"optimize_{method}.json")),
        write_table(outcome.samples, _path(config, problem, f"optimize_{method}_samples.csv")),
    ]
    result.summary = outcome.as_dict()
    result.summary.pop("report", None)


def _continue(config: RunConfig, result: RunResult) -> None:
    spec = load_problem_file(config.problem)
    settings = ContinuationSettings(
        param=config.param,
        N=config.N,
        epsilon_max=config.epsilon_max,
        r_max=config.r_max,
        mode=config.continuation_mode,
        method=config.method,
        tolerance=config.tolerance,
        cap=config.gamma_cap,
        interval=config.interval,
        z0_fallback=config.z0_fallback,
        weights=tuple(config.weights) if config.weights else None,
        overrides=dict(config.parameters),
    )
    values = parameter_range(config.start, config.stop, config.steps)
    table = continuation(spec, values, settings, config.threads, config.progress)
    path = config.output_dir / f"{spec.name}_continuation_{config.param}.csv"
    result.artifacts.append(write_table(table, path))
    result.summary = {
        "rows": len(table),
        "failed": int((~table["ok"].astype(bool)).sum()),
    }


def _export(config: RunConfig, result: RunResult) -> None:
    problem = _problem(config)
    par = _parameterization(config, problem)
    gamma = _gamma(config, problem)
    mesh = sample_surface(
        rescale(par.coeffs, gamma), config.grid, pairing=problem.spectral.pairing
    )
    fmt = config.format
    if fmt == "obj" and problem.n_s > 2:
        logger.warning("%d parameters give a point cloud, exporting csv", problem.n_s)
        fmt = "csv"
    path = config.out or _path(config, problem, f"mesh.{fmt}")
    result.artifacts.append(export_mesh(mesh, path, fmt))
    result.summary = {
        "vertices": len(mesh.vertices),
        "triangles": len(mesh.triangles),
        "format": fmt,
    }


def sample_thetas(
    rng: np.random.Generator, n_s: int, pairing, count: int
) -> np.ndarray:
    """Random complex arguments in the closed unit polydisc.

    Real directions draw from ``[-1, 1]``; a conjugate pair draws one point of
    the unit disc and its conjugate.
    """
    thetas = rng.uniform(-1.0, 1.0, size=(count, n_s)).astype(np.complex128)
    for k, l in pairing:
        z = np.sqrt(rng.uniform(0.0, 1.0, count)) * np.exp(
            1j * rng.uniform(0.0, 2 * np.pi, count)
        )
        thetas[:, k], thetas[:, l] = z, np.conj(z)
    return thetas


def _check_conjugacy(config: RunConfig, result: RunResult) -> None:
    problem = _problem(config)
    par = _parameterization(config, problem)
    gamma = _gamma(config, problem)
    rng = np.random.default_rng(config.seed)
    thetas = sample_thetas(
        rng, problem.n_s, problem.spectral.pairing, config.conjugacy_samples
    )
    steps = max(config.steps_per_unit_time, math.ceil(config.steps_per_unit_time * config.time))
    errors = conjugacy_errors(
        rescale(par.coeffs, gamma),
        problem.field,
        problem.spectral.lambdas,
        thetas,
        config.time,
        steps,
    )
    report = {
        "gamma": list(gamma.gamma),
        "time": config.time,
        "samples": len(errors),
        "seed": config.seed,
        "max_error": float(errors.max()),
        "mean_error": float(errors.mean()),
    }
    result.artifacts.append(write_json(report, _path(config, problem, "conjugacy.json")))
    result.summary = report


COMMANDS = {
    "solve": _solve,
    "validate": _validate,
    "optimize": _optimize,
    "continue": _continue,
    "export": _export,
    "check-conjugacy": _check_conjugacy,
}


def run(config: RunConfig) -> RunResult:
    result = RunResult(config.command)
    try:
        COMMANDS[config.command](config, result)
    except ManipatchError as e:
        logger.error("%s: %s", type(e).__name__, e)
        result.exit_code = exit_code_for(e)
        result.error = describe(e)
    return result
