"""Parameter sweeps: one optimal scaling per parameter value.

Rows are independent, so they run in a process pool and a failing row is
recorded without stopping the sweep.
"""
import os
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from .errors import ProblemSchemaError, describe
from .logger import logger
from .optimize import RayWeights, proof_dichotomy, ray_method2
from .parameterization import solve
from .problems import ProblemFile, build_problem
from .validation import build_A

MODES = ("proof", "defect")


@dataclass(frozen=True)
class ContinuationSettings:
    param: str
    N: int = 30
    epsilon_max: float = 1e-5
    r_max: float = 1e-5
    mode: str = "proof"
    method: str = "homological"
    tolerance: float = 1e-3
    cap: float = 1e6
    interval: bool = True
    z0_fallback: Optional[float] = 1e-2
    weights: Optional[Tuple[float, ...]] = None
    overrides: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown continuation mode {self.mode!r}")


def parameter_range(start: float, stop: float, steps: int) -> np.ndarray:
    """``steps`` equally spaced values from ``start`` to ``stop`` inclusive."""
    if steps < 1:
        raise ValueError(f"steps must be positive, got {steps}")
    if steps == 1:
        return np.array([float(start)])
    return np.linspace(start, stop, steps)


def _row(task: Tuple[int, float, ProblemFile, ContinuationSettings]) -> Dict[str, Any]:
    index, value, spec, settings = task
    row: Dict[str, Any] = {"index": index, settings.param: value}
    try:
        overrides = {**settings.overrides, settings.param: value}
        problem = build_problem(
            spec, settings.N, settings.epsilon_max, settings.r_max, overrides
        )
        par = solve(problem, settings.method)
        if settings.mode == "proof":
            result = proof_dichotomy(
                par,
                build_A(par),
                settings.tolerance,
                settings.cap,
                interval=settings.interval,
                z0_fallback=settings.z0_fallback,
            )
        else:
            weights = (
                RayWeights(settings.weights, problem.spectral.pairing)
                if settings.weights
                else RayWeights.uniform(problem.n_s, problem.spectral.pairing)
            )
            result = ray_method2(par, weights, settings.tolerance, settings.cap)
    except Exception as e:
        # exceptions cross the process boundary as plain dicts
        row.update({"ok": False, **describe(e)})
        return row
    for k, g in enumerate(result.gamma_opt.gamma):
        row[f"gamma_{k + 1}"] = g
    row["ok"] = True
    row["capped"] = result.capped
    if settings.mode == "proof":
        row["r_used"] = result.achieved
        row["r0"] = result.report.root_interval[0]
    else:
        row["defect"] = result.achieved
    return row


def continuation(
    spec: ProblemFile,
    values: Sequence[float],
    settings: ContinuationSettings,
    threads: Optional[int] = None,
    progress: bool = False,
) -> pd.DataFrame:
    """One row per parameter value, sorted by position in ``values``."""
    if settings.param not in spec.parameters:
        raise ProblemSchemaError(
            f"{spec.name} has no parameter {settings.param!r} "
            f"(parameters: {', '.join(spec.parameters)})",
            f"parameters -> {settings.param}",
        )
    tasks = [(i, float(v), spec, settings) for i, v in enumerate(values)]
    threads = threads or os.cpu_count() or 1
    rows: List[Dict[str, Any]] = []
    with tqdm(
        total=len(tasks),
        desc="Continuation",
        ncols=80,
        position=0,
        leave=True,
        disable=not progress,
    ) as pbar:
        if threads == 1 or len(tasks) == 1:
            for task in tasks:
                rows.append(_row(task))
                pbar.update()
        else:
            with Pool(processes=min(threads, len(tasks))) as pool:
                for row in pool.imap_unordered(_row, tasks):
                    rows.append(row)
                    pbar.update()

    for row in rows:
        if not row["ok"]:
            logger.warning(
                "%s = %g failed: %s: %s",
                settings.param,
                row[settings.param],
                row["error"],
                row["message"],
            )
    table = pd.DataFrame(rows).sort_values("index").reset_index(drop=True)
    return table.drop(columns="index")
