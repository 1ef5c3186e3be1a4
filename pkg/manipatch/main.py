import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import typer
from rich import print
from rich.logging import RichHandler
from rich.markup import escape
from rich.panel import Panel
from rich.table import Table
from typing_extensions import Annotated

from .config import get_config
from .errors import ManipatchError, exit_code_for
from .logger import logger
from .utils import parse_floats

app = typer.Typer(help="Validated parameterizations of stable and unstable manifolds.")

ProblemArg = Annotated[
    str,
    typer.Argument(
        help="A problem JSON file, or a bundled fixture: lorenz, lorenz_eye, fhn, bridge."
    ),
]
ConfigPath = Annotated[
    Optional[Path],
    typer.Option(
        "--config",
        "-c",
        help="The path to a manipatch.yml configuration file.",
    ),
]
Order = Annotated[
    Optional[int], typer.Option("--order", "-N", help="Truncation order N.")
]
EpsMax = Annotated[
    Optional[float], typer.Option("--eps-max", help="Defect threshold epsilon_max.")
]
RMax = Annotated[
    Optional[float], typer.Option("--r-max", help="Largest admissible proof radius.")
]
OutDir = Annotated[
    Optional[Path],
    typer.Option(
        "--out-dir",
        "-o",
        help="Output directory (overrides $MANIPATCH_OUTPUT_DIR and the configuration).",
    ),
]
Coefficients = Annotated[
    Optional[Path],
    typer.Option(
        "--coefficients",
        help="Read the coefficients written by `solve` instead of solving again.",
    ),
]
Gamma = Annotated[
    Optional[str],
    typer.Option("--gamma", help="Comma separated eigenvector scalings, e.g. 1.7,0.68."),
]
Set = Annotated[
    Optional[List[str]],
    typer.Option("--set", help="Override a problem parameter: name=value. Repeatable."),
]
Verbose = Annotated[bool, typer.Option("--verbose", "-v", help="Log progress.")]


def _setup_logging(verbose: bool) -> None:
    logger.handlers[:] = [RichHandler(show_path=False)]
    logger.setLevel(logging.INFO if verbose else logging.WARNING)
    logger.propagate = False


def _assignments(values: Optional[List[str]]) -> Optional[Dict[str, float]]:
    if not values:
        return None
    parameters = {}
    for value in values:
        name, sep, number = value.partition("=")
        try:
            if not sep:
                raise ValueError
            parameters[name.strip()] = float(number)
        except ValueError:
            raise typer.BadParameter(f"expected name=value, got {value!r}", param_hint="--set")
    return parameters


def _floats(text: Optional[str], option: str) -> Optional[List[float]]:
    try:
        return parse_floats(text)
    except ValueError:
        raise typer.BadParameter(f"expected comma separated numbers, got {text!r}", param_hint=option)


def _summary(title: str, summary: Dict[str, Any], artifacts: List[Path]) -> Panel:
    table = Table(show_header=False, box=None)
    table.add_column(style="bold")
    table.add_column()
    for key, value in summary.items():
        if isinstance(value, float):
            value = f"{value:.6g}"
        table.add_row(key, escape(str(value)))
    for path in artifacts:
        table.add_row("wrote", escape(str(path)))
    return Panel(table, title=title, expand=False)


def _execute(command: str, config_path: Optional[Path], verbose: bool, **flags: Any) -> None:
    from .run import RunConfig, run

    _setup_logging(verbose)
    try:
        config = get_config(config_path)
        run_config = RunConfig.from_config(config, command=command, progress=verbose, **flags)
        result = run(run_config)
    except ManipatchError as e:
        print(f"[red]{type(e).__name__}[/red]: {escape(str(e))}")
        raise typer.Exit(exit_code_for(e))
    except Exception as e:
        print(f"[red]Unexpected error[/red]: {escape(repr(e))}")
        raise typer.Exit(1)

    if result.error is not None:
        print(f"[red]{result.error['error']}[/red]: {escape(result.error['message'])}")
    else:
        style = "green" if result.exit_code == 0 else "yellow"
        print(
            _summary(f"[{style}]{command}[/{style}] {escape(run_config.problem)}",
                     result.summary, result.artifacts)
        )
    raise typer.Exit(result.exit_code)


@app.command()
def solve(
    problem: ProblemArg,
    order: Order = None,
    method: Annotated[
        Optional[str], typer.Option("--method", help="homological or newton.")
    ] = None,
    parameters: Set = None,
    out_dir: OutDir = None,
    config: ConfigPath = None,
    verbose: Verbose = False,
):
    """Compute the coefficients and write them with the spectral report."""
    _execute(
        "solve",
        config,
        verbose,
        problem=problem,
        N=order,
        method=method,
        parameters=_assignments(parameters),
        output_dir=out_dir,
    )


@app.command()
def validate(
    problem: ProblemArg,
    mode: Annotated[
        str, typer.Option("--mode", help="defect or proof.")
    ] = "defect",
    gamma: Gamma = None,
    order: Order = None,
    eps_max: EpsMax = None,
    r_max: RMax = None,
    interval: Annotated[
        Optional[bool],
        typer.Option("--interval/--no-interval", help="Rigorous interval bounds."),
    ] = None,
    from_scratch: Annotated[
        bool,
        typer.Option("--from-scratch", help="Recompute the bounds on the rescaled coefficients."),
    ] = False,
    coefficients: Coefficients = None,
    parameters: Set = None,
    out_dir: OutDir = None,
    config: ConfigPath = None,
    verbose: Verbose = False,
):
    """Check a scaling: defect below epsilon_max, or a radii polynomial proof."""
    _execute(
        "validate",
        config,
        verbose,
        problem=problem,
        mode=mode,
        gamma=_floats(gamma, "--gamma"),
        N=order,
        epsilon_max=eps_max,
        r_max=r_max,
        interval=interval,
        from_scratch=from_scratch,
        coefficients=coefficients,
        parameters=_assignments(parameters),
        output_dir=out_dir,
    )


@app.command()
def optimize(
    problem: ProblemArg,
    method: Annotated[
        str, typer.Option("--method", help="area, ray or proof.")
    ] = "ray",
    weights: Annotated[
        Optional[str],
        typer.Option("--weights", help="Ray direction for the ray method, e.g. 1,3.6."),
    ] = None,
    order: Order = None,
    eps_max: EpsMax = None,
    r_max: RMax = None,
    coefficients: Coefficients = None,
    parameters: Set = None,
    out_dir: OutDir = None,
    config: ConfigPath = None,
    verbose: Verbose = False,
):
    """Choose the eigenvector scalings automatically."""
    _execute(
        "optimize",
        config,
        verbose,
        problem=problem,
        optimize_method=method,
        weights=_floats(weights, "--weights"),
        N=order,
        epsilon_max=eps_max,
        r_max=r_max,
        coefficients=coefficients,
        parameters=_assignments(parameters),
        output_dir=out_dir,
    )


@app.command(name="continue")
def continue_(
    problem: ProblemArg,
    param: Annotated[str, typer.Option("--param", help="The parameter to sweep.")],
    start: Annotated[float, typer.Option("--from", help="First parameter value.")],
    stop: Annotated[float, typer.Option("--to", help="Last parameter value.")],
    steps: Annotated[int, typer.Option("--steps", help="Number of values.")] = 15,
    mode: Annotated[
        Optional[str], typer.Option("--mode", help="proof or defect.")
    ] = None,
    threads: Annotated[
        Optional[int], typer.Option("--threads", help="Worker processes.")
    ] = None,
    weights: Annotated[
        Optional[str], typer.Option("--weights", help="Ray direction in defect mode.")
    ] = None,
    order: Order = None,
    eps_max: EpsMax = None,
    r_max: RMax = None,
    out_dir: OutDir = None,
    config: ConfigPath = None,
    verbose: Verbose = False,
):
    """Sweep a parameter and tabulate the optimal scaling of each value."""
    _execute(
        "continue",
        config,
        verbose,
        problem=problem,
        param=param,
        start=start,
        stop=stop,
        steps=steps,
        continuation_mode=mode,
        threads=threads,
        weights=_floats(weights, "--weights"),
        N=order,
        epsilon_max=eps_max,
        r_max=r_max,
        output_dir=out_dir,
    )


@app.command()
def export(
    problem: ProblemArg,
    gamma: Gamma = None,
    grid: Annotated[
        Optional[int], typer.Option("--grid", help="Points per parameter axis.")
    ] = None,
    format: Annotated[
        Optional[str], typer.Option("--format", help="obj or csv.")
    ] = None,
    out: Annotated[
        Optional[Path], typer.Option("--out", help="The mesh file to write.")
    ] = None,
    order: Order = None,
    coefficients: Coefficients = None,
    parameters: Set = None,
    out_dir: OutDir = None,
    config: ConfigPath = None,
    verbose: Verbose = False,
):
    """Sample the patch and write it as a mesh."""
    _execute(
        "export",
        config,
        verbose,
        problem=problem,
        gamma=_floats(gamma, "--gamma"),
        grid=grid,
        format=format,
        out=out,
        N=order,
        coefficients=coefficients,
        parameters=_assignments(parameters),
        output_dir=out_dir,
    )


@app.command(name="check-conjugacy")
def check_conjugacy(
    problem: ProblemArg,
    gamma: Gamma = None,
    samples: Annotated[
        Optional[int], typer.Option("--samples", help="Number of random arguments.")
    ] = None,
    time: Annotated[
        Optional[float], typer.Option("--time", help="Integration time.")
    ] = None,
    seed: Annotated[Optional[int], typer.Option("--seed")] = None,
    order: Order = None,
    coefficients: Coefficients = None,
    parameters: Set = None,
    out_dir: OutDir = None,
    config: ConfigPath = None,
    verbose: Verbose = False,
):
    """Compare the flow of the field with the linear flow pushed through the patch."""
    _execute(
        "check-conjugacy",
        config,
        verbose,
        problem=problem,
        gamma=_floats(gamma, "--gamma"),
        conjugacy_samples=samples,
        time=time,
        seed=seed,
        N=order,
        coefficients=coefficients,
        parameters=_assignments(parameters),
        output_dir=out_dir,
    )
