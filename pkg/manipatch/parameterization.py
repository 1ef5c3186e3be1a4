"""The invariance operator, its solvers and the defect."""
import functools
from dataclasses import dataclass
from typing import Optional

import numpy as np
from tqdm import tqdm

from .errors import NonConvergence, SingularHomological, SingularJacobian
from .logger import logger
from .polyfield import PolyVectorField, compose_field_series, jacobian, jacobian_series
from .series import (
    GradedOrdering,
    Scaling,
    ScalingLike,
    VectorSeq,
    convolution_matrix,
    enumerate_multiindices,
    rescale,
)
from .spectrum import ResonanceCheck, SpectralData, check_nonresonance

HOMOLOGICAL_DET_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ManifoldProblem:
    """A field (already time reversed for unstable manifolds) with its spectral data."""

    field: PolyVectorField
    spectral: SpectralData
    N: int
    epsilon_max: float = 1e-5
    r_max: float = 1e-5
    name: str = ""
    resonance: Optional[ResonanceCheck] = None

    def __post_init__(self):
        if self.N < 2:
            raise ValueError(f"truncation order N must be >= 2, got {self.N}")
        if self.epsilon_max <= 0 or self.r_max <= 0:
            raise ValueError("epsilon_max and r_max must be positive")
        if self.resonance is None:
            object.__setattr__(
                self, "resonance", check_nonresonance(self.spectral.lambdas)
            )

    @property
    def n(self) -> int:
        return self.field.n

    @property
    def n_s(self) -> int:
        return self.spectral.n_s

    @property
    def ordering(self) -> GradedOrdering:
        return enumerate_multiindices(self.n_s, self.N)

    def scaling(self, gamma: ScalingLike) -> Scaling:
        """A scaling carrying this problem's conjugate pairing."""
        if isinstance(gamma, Scaling):
            gamma = gamma.gamma
        return Scaling(tuple(np.ravel(gamma)), self.spectral.pairing)

    def with_order(self, N: int) -> "ManifoldProblem":
        return ManifoldProblem(
            self.field, self.spectral, N, self.epsilon_max, self.r_max, self.name,
            self.resonance,
        )


@dataclass(frozen=True, eq=False)
class Parameterization:
    """Coefficients ``a`` with ``a_alpha = 0`` for ``|alpha| >= N``.

    ``gamma`` is the scaling of the eigenvectors relative to ``problem.spectral``,
    so ``a_{e_i} = gamma_i V_i``.
    """

    coeffs: VectorSeq
    problem: ManifoldProblem
    gamma: Scaling = None

    def __post_init__(self):
        if self.gamma is None:
            object.__setattr__(self, "gamma", Scaling.ones(self.problem.n_s))
        object.__setattr__(self, "gamma", self.problem.scaling(self.gamma))

    @property
    def N(self) -> int:
        return self.coeffs.max_order

    @property
    def residual_order(self) -> int:
        """Residual coefficients vanish for ``|alpha| >= residual_order``."""
        return max(self.problem.field.d, 1) * (self.N - 1) + 1

    @functools.cached_property
    def residual_values(self) -> VectorSeq:
        return _residual(self.problem, self.coeffs, self.gamma, self.residual_order)

    def symmetry_residue(self) -> float:
        mirror = conjugate_mirror(self.coeffs, self.problem.spectral.conjugate_permutation())
        return float(np.abs(self.coeffs.values - mirror.values).max(initial=0.0))


def frequencies(problem: ManifoldProblem, ordering: GradedOrdering) -> np.ndarray:
    """``alpha . lambda`` for every multi-index."""
    return ordering.indices @ problem.spectral.lambdas


def linear_jet(problem: ManifoldProblem, gamma: Optional[ScalingLike] = None) -> VectorSeq:
    """``p + sum_i gamma_i V_i theta_i`` padded with zeros up to order N."""
    gamma = problem.scaling(gamma if gamma is not None else np.ones(problem.n_s))
    ordering = problem.ordering
    values = np.zeros((problem.n, ordering.count), dtype=np.complex128)
    values[:, 0] = problem.spectral.p
    if problem.N > 1:
        values[:, 1 : 1 + problem.n_s] = problem.spectral.vectors * gamma.as_array()
    return VectorSeq(ordering, values)


def conjugate_mirror(a: VectorSeq, perm: np.ndarray) -> VectorSeq:
    """``b_alpha = conj(a_{sigma(alpha)})`` with ``sigma`` swapping paired exponents."""
    if np.array_equal(perm, np.arange(len(perm))):
        return VectorSeq(a.ordering, np.conj(a.values))
    mirrored = a.ordering.positions(a.ordering.indices[:, perm])
    return VectorSeq(a.ordering, np.conj(a.values[:, mirrored]))


def _symmetrize(problem: ManifoldProblem, a: VectorSeq) -> VectorSeq:
    mirror = conjugate_mirror(a, problem.spectral.conjugate_permutation())
    return VectorSeq(a.ordering, 0.5 * (a.values + mirror.values))


def solve_homological(
    problem: ManifoldProblem,
    gamma: Optional[ScalingLike] = None,
    progress: bool = False,
) -> Parameterization:
    """Solve ``((alpha . lambda) I - Dg(p)) a_alpha = R_alpha`` order by order."""
    gamma = problem.scaling(gamma if gamma is not None else np.ones(problem.n_s))
    ordering = problem.ordering
    n, n_s = problem.n, problem.n_s
    values = np.array(linear_jet(problem, gamma).values)
    Dg = jacobian(problem.field, problem.spectral.p)
    identity = np.eye(n)

    for order in tqdm(
        range(2, problem.N),
        desc="Homological equations",
        ncols=80,
        position=0,
        leave=True,
        disable=not progress,
    ):
        lower = enumerate_multiindices(n_s, order)
        truncated = VectorSeq(lower, values[:, : lower.count])
        rhs = compose_field_series(problem.field, truncated, order + 1)
        sl = ordering.order_slice(order)
        mus = frequencies(problem, ordering)[sl]
        systems = mus[:, None, None] * identity[None] - Dg[None]
        dets = np.abs(np.linalg.det(systems))
        if dets.min() < HOMOLOGICAL_DET_TOL:
            k = int(np.argmin(dets))
            alpha = ordering.index(sl.start + k)
            raise SingularHomological(
                f"homological system at {alpha} is singular (|det| = {dets[k]:.3g})",
                alpha,
            )
        if dets.min() < 1e3 * HOMOLOGICAL_DET_TOL:
            logger.warning("Near-singular homological system at order %d", order)
        solution = np.linalg.solve(systems, rhs.values[:, sl].T[..., None])[..., 0]
        values[:, sl] = solution.T

    a = _symmetrize(problem, VectorSeq(ordering, values))
    return Parameterization(a, problem, gamma)


def _residual(
    problem: ManifoldProblem, a: VectorSeq, gamma: Scaling, out_order: int
) -> VectorSeq:
    ordering = enumerate_multiindices(problem.n_s, out_order)
    composed = compose_field_series(problem.field, a, out_order)
    padded = a.with_order(out_order).values
    values = frequencies(problem, ordering)[None, :] * padded - composed.values
    values[:, 0] = padded[:, 0] - problem.spectral.p
    if out_order > 1:
        values[:, 1 : 1 + problem.n_s] = padded[:, 1 : 1 + problem.n_s] - (
            problem.spectral.vectors * gamma.as_array()
        )
    return VectorSeq(ordering, values)


def residual(par: Parameterization) -> VectorSeq:
    """``F(a)`` for every ``|alpha| <= d (N - 1)``; zero beyond.

    Orders 0 and 1 hold the constraints ``a_0 - p`` and ``a_{e_i} - gamma_i V_i``.
    """
    return par.residual_values


def operator_jacobian(par: Parameterization, absolute: bool = False) -> np.ndarray:
    """``DF^[N](a)`` in the flat layout ``position * n + component``.

    Rows of orders 0 and 1 are identity rows (the constraints are affine). With
    ``absolute`` every product is replaced by the product of absolute values,
    an entrywise majorant used for rounding error bounds.
    """
    problem, a = par.problem, par.coeffs
    n, count, N = problem.n, a.ordering.count, par.N
    mus = frequencies(problem, a.ordering)
    if absolute:
        a = VectorSeq(a.ordering, np.abs(a.values))
        D = jacobian_series(problem.field.absolute(), a, N)
        sign, mus = 1.0, np.abs(mus)
    else:
        D = jacobian_series(problem.field, a, N)
        sign = -1.0
    DF = np.zeros((count, n, count, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            if np.any(D[i, j]):
                DF[:, i, :, j] = sign * convolution_matrix(D[i, j], problem.n_s, N)
    positions = np.arange(count)
    for i in range(n):
        DF[positions, i, positions, i] += mus
    constrained = min(1 + problem.n_s, count)
    DF[:constrained] = 0.0
    for k in range(constrained):
        DF[k, :, k, :] = np.eye(n)
    DF = DF.reshape(count * n, count * n)
    return DF.real if absolute else DF


def newton_solve(
    problem: ManifoldProblem,
    initial: Optional[VectorSeq] = None,
    gamma: Optional[ScalingLike] = None,
    tol: float = 1e-12,
    step_tol: float = 1e-13,
    max_iterations: int = 30,
    progress: bool = False,
) -> Parameterization:
    """Newton's method on ``F^[N](a) = 0`` with the order 0 and 1 rows eliminated."""
    gamma = problem.scaling(gamma if gamma is not None else np.ones(problem.n_s))
    a = initial if initial is not None else linear_jet(problem, gamma)
    a = a.with_order(problem.N)
    fixed = (1 + problem.n_s) * problem.n
    residual_norm, step = np.inf, np.inf

    with tqdm(
        total=max_iterations,
        desc="Newton",
        ncols=80,
        position=0,
        leave=True,
        disable=not progress,
    ) as pbar:
        for iteration in range(max_iterations + 1):
            F = _residual(problem, a, gamma, problem.N)
            scale = max(1.0, float(np.abs(a.values).max()))
            residual_norm = float(
                np.abs(F.values[:, 1 + problem.n_s :]).sum(axis=1).max(initial=0.0)
            )
            if residual_norm <= tol * scale and (
                iteration == 0 or step <= step_tol * scale
            ):
                break
            if iteration == max_iterations:
                raise NonConvergence(
                    f"Newton did not converge in {max_iterations} iterations "
                    f"(residual {residual_norm:.3g})",
                    iteration,
                    residual_norm,
                )
            DF = operator_jacobian(Parameterization(a, problem, gamma))[fixed:, fixed:]
            rhs = F.values.T.reshape(-1)[fixed:]
            try:
                delta = np.linalg.solve(DF, -rhs)
            except np.linalg.LinAlgError as e:
                raise SingularJacobian(
                    "singular DF^[N] in Newton's method", iteration, residual_norm
                ) from e
            step = float(np.abs(delta).max(initial=0.0))
            flat = a.values.T.reshape(-1).copy()
            flat[fixed:] += delta
            a = _symmetrize(problem, VectorSeq(a.ordering, flat.reshape(-1, problem.n).T))
            pbar.update(1)
            logger.info(
                "Newton iteration %d: residual %.3g, step %.3g",
                iteration,
                residual_norm,
                step,
            )

    return Parameterization(a, problem, gamma)


def defect(par: Parameterization, gamma: Optional[ScalingLike] = None) -> float:
    """``||F~(L(a))||_X = max_i sum_alpha |F_alpha(a)^(i)| gamma^alpha``."""
    F = par.residual_values
    if gamma is None:
        return F.norm()
    weights = par.problem.scaling(gamma).weights(F.ordering)
    return float((np.abs(F.values) @ weights).max(initial=0.0))


def is_defect_valid(par: Parameterization, gamma: Optional[ScalingLike] = None) -> bool:
    return defect(par, gamma) < par.problem.epsilon_max


def rescaled_problem(par: Parameterization, gamma: ScalingLike) -> Parameterization:
    """The parameterization ``L(a)`` with constraints ``gamma_i V_i``, for bounds
    recomputed without the rescaling identities."""
    gamma = par.problem.scaling(gamma)
    return Parameterization(rescale(par.coeffs, gamma), par.problem, par.gamma * gamma)


def solve(
    problem: ManifoldProblem,
    method: str = "homological",
    progress: bool = False,
    **newton_options,
) -> Parameterization:
    if method == "homological":
        return solve_homological(problem, progress=progress)
    if method == "newton":
        return newton_solve(problem, progress=progress, **newton_options)
    raise ValueError(f"unknown solver method {method!r}")


def residual_majorant(par: Parameterization) -> np.ndarray:
    """Entrywise majorant of the products summed in ``residual(par)``:
    ``|alpha . lambda| |a_alpha| + (|g| o |a|)_alpha``, plus ``|a| + |target|`` on
    the constraint rows."""
    problem, out_order = par.problem, par.residual_order
    ordering = enumerate_multiindices(problem.n_s, out_order)
    a = VectorSeq(par.coeffs.ordering, np.abs(par.coeffs.values))
    composed = compose_field_series(problem.field.absolute(), a, out_order).values.real
    padded = a.with_order(out_order).values.real
    majorant = np.abs(frequencies(problem, ordering))[None, :] * padded + composed
    majorant[:, 0] = padded[:, 0] + np.abs(problem.spectral.p)
    if out_order > 1:
        majorant[:, 1 : 1 + problem.n_s] = padded[:, 1 : 1 + problem.n_s] + np.abs(
            problem.spectral.vectors * par.gamma.as_array()
        )
    return majorant
