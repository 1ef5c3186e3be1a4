"""Automatic choice of the eigenvector scalings.

Every search relies on the validity criteria being monotone along rays: a
scaling that fails stays failed when any of its entries grows.
"""
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from .errors import EmptyLevelSet, ProofImpossible
from .geometry import patch_area
from .logger import logger
from .parameterization import Parameterization, defect
from .series import Scaling
from .validation import ApproxInverse, RadiiReport, compute_bounds, is_proof_valid, radii_report

MAX_HALVINGS = 200


@dataclass(frozen=True)
class RayWeights:
    """Directions ``gamma(t) = t * omega``."""

    omega: Tuple[float, ...]
    pairing: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        # Scaling validates positivity and pair equality
        Scaling(tuple(self.omega), self.pairing)
        object.__setattr__(self, "omega", tuple(float(w) for w in self.omega))

    @classmethod
    def uniform(cls, n_s: int, pairing=()) -> "RayWeights":
        return cls((1.0,) * n_s, pairing)

    def at(self, t: float) -> Scaling:
        return Scaling(tuple(t * w for w in self.omega), self.pairing)


@dataclass(frozen=True, eq=False)
class ScalingResult:
    gamma_opt: Scaling
    criterion: str
    achieved: float
    method: str
    area: Optional[float] = None
    samples: pd.DataFrame = field(default_factory=pd.DataFrame)
    capped: bool = False
    report: Optional[RadiiReport] = None

    def as_dict(self) -> Dict[str, Any]:
        info = {
            "method": self.method,
            "criterion": self.criterion,
            "gamma": list(self.gamma_opt.gamma),
            "achieved": self.achieved,
            "area": self.area,
            "capped": self.capped,
        }
        if self.report is not None:
            info["report"] = self.report.as_dict()
        return info


@dataclass
class _Bracket:
    valid: float
    invalid: Optional[float]
    capped: bool = False


def _bracket(
    is_valid: Callable[[float], bool],
    start: float,
    cap: float,
    floor: float = 0.0,
) -> _Bracket:
    """Grow or shrink ``start`` by factors of two until validity flips."""
    t = start
    if is_valid(t):
        while True:
            grown = 2.0 * t
            if grown > cap:
                if is_valid(cap):
                    return _Bracket(cap, None, capped=True)
                return _Bracket(t, cap)
            if not is_valid(grown):
                return _Bracket(t, grown)
            t = grown
    for _ in range(MAX_HALVINGS):
        shrunk = 0.5 * t
        if shrunk < floor:
            break
        if is_valid(shrunk):
            return _Bracket(shrunk, t)
        t = shrunk
    raise EmptyLevelSet(f"no valid scaling found down to {t:.3g}")


def _bisect(is_valid: Callable[[float], bool], bracket: _Bracket, tolerance: float) -> float:
    """Largest valid value to relative ``tolerance``, bisecting in log space."""
    if bracket.invalid is None:
        return bracket.valid
    lo, hi = bracket.valid, bracket.invalid
    while hi > lo * (1.0 + tolerance):
        mid = math.sqrt(lo * hi)
        if is_valid(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _largest_valid(
    is_valid: Callable[[float], bool],
    start: float,
    tolerance: float,
    cap: float,
    floor: float = 0.0,
) -> Tuple[float, bool]:
    bracket = _bracket(is_valid, start, cap, floor)
    return _bisect(is_valid, bracket, tolerance), bracket.capped


def ray_method2(
    par: Parameterization,
    weights: RayWeights,
    tolerance: float = 1e-3,
    cap: float = 1e6,
    area_grid: Optional[int] = None,
) -> ScalingResult:
    """Largest ``t`` with ``gamma(t) = t omega`` defect-valid."""
    epsilon_max = par.problem.epsilon_max
    probes: List[Dict[str, Any]] = []

    def is_valid(t: float) -> bool:
        value = defect(par, weights.at(t))
        probes.append({"t": t, "defect": value, "valid": value < epsilon_max})
        return value < epsilon_max

    t_cap = cap / max(weights.omega)
    t, capped = _largest_valid(is_valid, 1.0, tolerance, t_cap)
    if capped:
        logger.warning("Defect stays below %g up to the scaling cap %g", epsilon_max, cap)
    gamma = weights.at(t)
    area = None
    if area_grid and par.problem.n_s == 2:
        area = patch_area(par.coeffs, gamma, area_grid, par.problem.spectral.pairing)
    samples = pd.DataFrame(probes)
    for k, w in enumerate(weights.omega):
        samples[f"gamma_{k + 1}"] = samples["t"] * w
    return ScalingResult(
        gamma,
        "defect",
        defect(par, gamma),
        "ray",
        area,
        samples,
        capped,
    )


def level_set_method1(
    par: Parameterization,
    n_gamma1_samples: int = 64,
    span: float = 32.0,
    tolerance: float = 1e-3,
    cap: float = 1e6,
    area_grid: int = 33,
    winner_grid: int = 65,
    progress: bool = False,
) -> ScalingResult:
    """Maximise the patch area over the level set ``defect(gamma) = epsilon_max``.

    For each ``gamma_1`` of a log-spaced sample around the uniform optimum the
    largest defect-valid ``gamma_2`` is found by bisection.
    """
    problem = par.problem
    if problem.n_s != 2:
        raise ValueError(f"the area method needs two stable directions, got {problem.n_s}")
    if problem.spectral.pairing:
        raise ValueError(
            "the area method needs two independent real directions; use the ray method "
            "for conjugate pairs"
        )
    epsilon_max = problem.epsilon_max
    uniform = ray_method2(par, RayWeights.uniform(2), tolerance, cap)
    if uniform.capped:
        return ScalingResult(
            uniform.gamma_opt,
            "defect",
            uniform.achieved,
            "area",
            patch_area(par.coeffs, uniform.gamma_opt, winner_grid),
            uniform.samples,
            capped=True,
        )

    gamma_u = uniform.gamma_opt.gamma[0]
    rows: List[Dict[str, Any]] = []
    for gamma_1 in tqdm(
        np.geomspace(gamma_u / span, gamma_u * span, n_gamma1_samples),
        desc="Level set",
        ncols=80,
        position=0,
        leave=True,
        disable=not progress,
    ):
        gamma_1 = float(gamma_1)

        def is_valid(gamma_2: float) -> bool:
            return defect(par, (gamma_1, gamma_2)) < epsilon_max

        try:
            gamma_2, capped = _largest_valid(is_valid, gamma_u, tolerance, cap)
        except EmptyLevelSet:
            rows.append(
                {"gamma_1": gamma_1, "gamma_2": np.nan, "defect": np.nan, "area": np.nan}
            )
            continue
        rows.append(
            {
                "gamma_1": gamma_1,
                "gamma_2": gamma_2,
                "defect": defect(par, (gamma_1, gamma_2)),
                "area": patch_area(par.coeffs, (gamma_1, gamma_2), area_grid),
                "capped": capped,
            }
        )

    samples = pd.DataFrame(rows)
    if samples["area"].isna().all():
        raise EmptyLevelSet("no sampled gamma_1 admits a defect-valid gamma_2")
    best = samples.loc[samples["area"].idxmax()]
    gamma = Scaling((float(best["gamma_1"]), float(best["gamma_2"])))
    return ScalingResult(
        gamma,
        "defect",
        defect(par, gamma),
        "area",
        patch_area(par.coeffs, gamma, winner_grid),
        samples,
        bool(best.get("capped", False)),
    )


def proof_dichotomy(
    par: Parameterization,
    A: ApproxInverse,
    tolerance: float = 1e-3,
    cap: float = 1e6,
    floor: float = 1e-8,
    interval: bool = True,
    z0_fallback: Optional[float] = 1e-2,
    area_grid: Optional[int] = None,
) -> ScalingResult:
    """Largest uniform scaling whose radii polynomials have a root ``r0 <= r_max``.

    Probes use the floating point bounds; the winner is re-verified with
    interval bounds and shrunk until that verification passes.
    """
    problem = par.problem
    weights = RayWeights.uniform(problem.n_s, problem.spectral.pairing)
    probes: List[Dict[str, Any]] = []
    last: Dict[str, Any] = {}

    def probe(t: float, rigorous: bool) -> RadiiReport:
        bounds = compute_bounds(par, A, weights.at(t), rigorous, z0_fallback)
        report = radii_report(bounds, problem.r_max, par.N)
        probes.append(
            {
                "gamma": t,
                "interval": rigorous,
                "verdict": report.verdict,
                "r0": report.root_interval[0] if report.root_interval else np.nan,
                "r_used": report.r_used if report.r_used is not None else np.nan,
                "Y": float(bounds.Y.max()),
                "Z0": float(bounds.Z0.max()),
                "Z1": float(bounds.Z1.max()),
                "Z2": float(bounds.Z2.max()),
            }
        )
        last["bounds"] = bounds
        return report

    try:
        t, capped = _largest_valid(
            lambda t: probe(t, False).verdict, 1.0, tolerance, cap, floor
        )
    except EmptyLevelSet as e:
        bounds = last["bounds"]
        raise ProofImpossible(
            f"no proof-valid scaling down to gamma = {floor:g}",
            {key: bounds.as_dict()[key] for key in ("Y", "Z0", "Z1", "Z2")},
        ) from e

    report = probe(t, interval) if interval else None
    attempts = 0
    while report is not None and not report.verdict:
        attempts += 1
        if attempts > 50 or t * (1.0 - tolerance) < floor:
            raise ProofImpossible(
                f"interval verification fails below gamma = {t:.6g}",
                {"gamma": [t]},
            )
        t *= 1.0 - tolerance
        report = probe(t, True)
    if report is None:
        report = is_proof_valid(par, A, weights.at(t), False, z0_fallback)

    gamma = weights.at(t)
    area = None
    if area_grid and problem.n_s == 2:
        area = patch_area(par.coeffs, gamma, area_grid, problem.spectral.pairing)
    return ScalingResult(
        gamma,
        "proof",
        float(report.r_used),
        "proof",
        area,
        pd.DataFrame(probes),
        capped,
        report,
    )
