"""Radii polynomial bounds for rescaled parameterizations.

The expensive artifacts (``A F(a)``, ``B = I - A DF``, ``|A|``) are computed once
for the unscaled coefficients and re-weighted by ``gamma ** alpha`` for any
scaling. With ``interval=True`` every quantity is replaced by a rigorous upper
bound that accounts for floating point rounding.
"""
import functools
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import SingularBlock, UnsupportedDegree
from .intervals import (
    UNIT_ROUNDOFF,
    Interval,
    add_up,
    down,
    enclose_matmul,
    gamma_n,
    up,
    upper_dot,
    upper_sum,
)
from .logger import logger
from .parameterization import (
    Parameterization,
    operator_jacobian,
    rescaled_problem,
    residual_majorant,
)
from .series import GradedOrdering, Scaling, ScalingLike, VectorSeq

R_USED_FACTOR = 1.0 + 1e-6


def _flat(values: np.ndarray) -> np.ndarray:
    return values.T.reshape(-1)


def _unflat(flat: np.ndarray, n: int) -> np.ndarray:
    return flat.reshape(-1, n).T


def _abs_upper(x: np.ndarray) -> np.ndarray:
    return up(np.abs(x) * (1.0 + 2 * UNIT_ROUNDOFF))


def _rounding_terms(par: Parameterization) -> int:
    """Number of roundings a residual or Jacobian entry accumulates, at most."""
    count = par.coeffs.ordering.count
    d = max(par.problem.field.d, 1)
    return d * (2 * count + 2) + len(par.problem.field.terms) + 4


def require_quadratic(par: Parameterization) -> None:
    d = par.problem.field.d
    if d > 2:
        raise UnsupportedDegree(
            f"proof bounds are derived for fields of degree <= 2, this field has "
            f"degree {d}; use the defect mode instead",
            d,
        )


@dataclass(eq=False)
class ApproxInverse:
    """``A``: the inverse of ``DF^[N](a)`` on orders below N and
    ``1 / (alpha . lambda)`` on the tail."""

    par: Parameterization
    finite_block: np.ndarray
    derivative: np.ndarray

    @property
    def N(self) -> int:
        return self.par.N

    @property
    def n(self) -> int:
        return self.par.problem.n

    @property
    def n_s(self) -> int:
        return self.par.problem.n_s

    @property
    def size(self) -> int:
        return self.finite_block.shape[0]

    @property
    def ordering(self) -> GradedOrdering:
        return self.par.coeffs.ordering

    @property
    def lambdas(self) -> np.ndarray:
        return self.par.problem.spectral.lambdas

    def apply(self, u: VectorSeq) -> VectorSeq:
        u = u.with_order(max(u.max_order, self.N))
        count = self.ordering.count
        values = np.empty_like(u.values)
        values[:, :count] = _unflat(self.finite_block @ _flat(u.values[:, :count]), self.n)
        values[:, count:] = u.values[:, count:] / (u.ordering.indices[count:] @ self.lambdas)
        return VectorSeq(u.ordering, values)

    @functools.cached_property
    def applied_residual(self) -> VectorSeq:
        return self.apply(self.par.residual_values)

    @functools.cached_property
    def block_abs(self) -> np.ndarray:
        return np.abs(self.finite_block)

    @functools.cached_property
    def block_abs_upper(self) -> np.ndarray:
        return _abs_upper(self.finite_block)

    @functools.cached_property
    def _rounding(self) -> float:
        k = _rounding_terms(self.par)
        return float(up(gamma_n(k) * (1.0 + gamma_n(k))))

    @functools.cached_property
    def applied_residual_upper(self) -> np.ndarray:
        """Entrywise upper bound of ``|A F(a)|`` for the exact residual."""
        F = self.par.residual_values
        radius = up(self._rounding * residual_majorant(self.par))
        count = self.ordering.count
        center, error = enclose_matmul(self.finite_block, _flat(F.values[:, :count]))
        error = add_up(error, upper_dot(self.block_abs_upper, _flat(radius[:, :count])))
        upper = np.empty(F.values.shape)
        upper[:, :count] = _unflat(add_up(_abs_upper(center), error), self.n)
        mus = np.abs(F.ordering.indices[count:] @ self.lambdas)
        mus = down(mus * (1.0 - 4 * UNIT_ROUNDOFF))
        numerator = add_up(_abs_upper(F.values[:, count:]), radius[:, count:])
        upper[:, count:] = up(up(numerator / mus) * (1.0 + 2 * UNIT_ROUNDOFF))
        return upper

    @functools.cached_property
    def defect_matrix(self) -> np.ndarray:
        """``B = I - A^[N] DF^[N](a)``."""
        return np.eye(self.size) - self.finite_block @ self.derivative

    @functools.cached_property
    def defect_matrix_upper(self) -> np.ndarray:
        product, error = enclose_matmul(self.finite_block, self.derivative)
        majorant = operator_jacobian(self.par, absolute=True)
        radius = up(self._rounding * majorant)
        del majorant
        error = add_up(error, upper_dot(self.block_abs_upper, radius))
        del radius
        B = np.eye(self.size) - product
        return add_up(up(np.abs(B) * (1.0 + 4 * UNIT_ROUNDOFF)), error)


def build_A(par: Parameterization) -> ApproxInverse:
    DF = operator_jacobian(par)
    try:
        block = np.linalg.inv(DF)
    except np.linalg.LinAlgError as e:
        raise SingularBlock(f"DF^[N] of size {DF.shape[0]} is singular") from e
    if not np.all(np.isfinite(block)):
        raise SingularBlock(f"DF^[N] of size {DF.shape[0]} could not be inverted")
    logger.info("Built A^[N] of size %d", DF.shape[0])
    return ApproxInverse(par, block, DF)


def _weights(
    gamma: Optional[Scaling], ordering: GradedOrdering, nu: float, interval: bool
) -> Tuple[np.ndarray, np.ndarray]:
    w = float(nu) ** ordering.orders.astype(np.float64)
    if gamma is not None:
        w = w * gamma.weights(ordering)
    inverse = 1.0 / w
    if interval:
        slack = 1.0 + gamma_n(ordering.max_order + ordering.n_s + 3)
        w, inverse = up(w * slack), up(inverse * slack)
    return w, inverse


def operator_norm_K(
    B: np.ndarray,
    ordering: GradedOrdering,
    nu: float = 1.0,
    gamma: Optional[ScalingLike] = None,
    interval: bool = False,
) -> np.ndarray:
    """``K^(i,j) = max_beta w_beta^-1 sum_alpha |B^(i,j)_(alpha,beta)| w_alpha`` with
    ``w_alpha = nu^|alpha| gamma^alpha``: the induced norms of the blocks of ``B``
    on the weighted l1 spaces."""
    count = ordering.count
    n = B.shape[0] // count
    if gamma is not None and not isinstance(gamma, Scaling):
        gamma = Scaling(tuple(np.ravel(gamma)))
    w, inverse = _weights(gamma, ordering, nu, interval)
    blocks = np.abs(B).reshape(count, n, count, n)
    columns = np.einsum("aibj,a->ibj", blocks, w)
    if interval:
        columns = up(columns * (1.0 + gamma_n(count + 2)))
        return up(columns * inverse[None, :, None]).max(axis=1)
    return (columns * inverse[None, :, None]).max(axis=1)


@dataclass(frozen=True, eq=False)
class BoundSet:
    Y: np.ndarray
    Z0: np.ndarray
    Z1: np.ndarray
    Z2: np.ndarray
    gamma: Scaling
    interval: bool = False
    from_scratch: bool = False

    @property
    def slope(self) -> np.ndarray:
        return self.Z0 + self.Z1 - 1.0

    def polynomials(self) -> List[Tuple[float, float, float]]:
        """Coefficients ``(Y, Z0 + Z1 - 1, Z2)`` of each radii polynomial."""
        return [
            (float(y), float(s), float(z2))
            for y, s, z2 in zip(self.Y, self.slope, self.Z2)
        ]

    def evaluate(self, r: float) -> np.ndarray:
        return self.Y + self.slope * r + self.Z2 * r * r

    def as_dict(self) -> Dict[str, Any]:
        return {
            "Y": self.Y.tolist(),
            "Z0": self.Z0.tolist(),
            "Z1": self.Z1.tolist(),
            "Z2": self.Z2.tolist(),
            "gamma": list(self.gamma.gamma),
            "interval": self.interval,
            "from_scratch": self.from_scratch,
        }


def bound_Y(A: ApproxInverse, gamma: ScalingLike, interval: bool = False) -> np.ndarray:
    """``Y^(i) = sum_alpha |(A F(a))^(i)_alpha| gamma^alpha``."""
    gamma = A.par.problem.scaling(gamma)
    v = A.applied_residual
    w, _ = _weights(gamma, v.ordering, 1.0, interval)
    if interval:
        return upper_dot(A.applied_residual_upper, w)
    return np.abs(v.values) @ w


def bound_Z0(A: ApproxInverse, gamma: ScalingLike, interval: bool = False) -> np.ndarray:
    """``Z0^(i) = sum_j K^(i,j)`` of ``B`` conjugated by the scaling."""
    gamma = A.par.problem.scaling(gamma)
    B = A.defect_matrix_upper if interval else A.defect_matrix
    K = operator_norm_K(B, A.ordering, gamma=gamma, interval=interval)
    return upper_sum(K, axis=1) if interval else K.sum(axis=1)


def _tail_factor(par: Parameterization, interval: bool) -> float:
    """``1 / (N min |Re lambda|)``."""
    m = par.N * par.problem.spectral.min_abs_re
    return float(up(1.0 / down(m))) if interval else 1.0 / m


def bound_Z1(par: Parameterization, gamma: ScalingLike, interval: bool = False) -> np.ndarray:
    """Tail action of ``A`` on ``Dg(a) * h``:
    ``(sum_i |L[k, i]| + sum_(i,j) |b^(k)_ij| (||a_i|| + ||a_j||)) / (N min |Re lambda|)``."""
    require_quadratic(par)
    g = par.problem.field
    gamma = par.problem.scaling(gamma)
    w, _ = _weights(gamma, par.coeffs.ordering, 1.0, interval)
    if interval:
        norms = upper_dot(_abs_upper(par.coeffs.values), w)
    else:
        norms = np.abs(par.coeffs.values) @ w
    numerator = np.abs(g.linear_coefficients()).sum(axis=1)
    for i, j, b in g.quadratic_coefficients():
        numerator = numerator + np.abs(b) * (norms[i] + norms[j])
    if interval:
        numerator = up(numerator * (1.0 + gamma_n(3 * g.n + 3 * len(g.terms))))
        return up(numerator * _tail_factor(par, True))
    return numerator * _tail_factor(par, False)


def _quadratic_weights(par: Parameterization) -> np.ndarray:
    """``Q^(k) = sum over quadratic terms of 2 |b^(k)|``."""
    Q = np.zeros(par.problem.n)
    for _, _, b in par.problem.field.quadratic_coefficients():
        Q = Q + 2.0 * np.abs(b)
    return Q


def bound_Z2(A: ApproxInverse, gamma: ScalingLike, interval: bool = False) -> np.ndarray:
    """``Z2^(k) = max(1/(N m), K^(k,k)) Q^(k) + sum_(l != k) K^(k,l) Q^(l)`` with the
    norms ``K`` of the conjugated finite block of ``A``."""
    par = A.par
    require_quadratic(par)
    Q = _quadratic_weights(par)
    if not Q.any():
        return np.zeros(par.problem.n)
    gamma = par.problem.scaling(gamma)
    block = A.block_abs_upper if interval else A.block_abs
    K = operator_norm_K(block, A.ordering, gamma=gamma, interval=interval)
    diagonal = np.maximum(np.diag(K), _tail_factor(par, interval))
    K = K.copy()
    np.fill_diagonal(K, diagonal)
    if interval:
        return up((K @ Q) * (1.0 + gamma_n(par.problem.n + 2)))
    return K @ Q


def compute_bounds(
    par: Parameterization,
    A: ApproxInverse,
    gamma: ScalingLike,
    interval: bool = False,
    z0_fallback: Optional[float] = None,
) -> BoundSet:
    """All four bounds at ``gamma``, recomputed from scratch on ``L(a)`` when the
    conjugated ``Z0`` reaches ``z0_fallback``."""
    require_quadratic(par)
    gamma = par.problem.scaling(gamma)
    bounds = BoundSet(
        Y=bound_Y(A, gamma, interval),
        Z0=bound_Z0(A, gamma, interval),
        Z1=bound_Z1(par, gamma, interval),
        Z2=bound_Z2(A, gamma, interval),
        gamma=gamma,
        interval=interval,
    )
    if (
        z0_fallback is not None
        and not gamma.is_identity()
        and float(bounds.Z0.max()) >= z0_fallback
    ):
        logger.warning(
            "Z0 = %.3g at gamma = %s, recomputing the bounds from scratch",
            float(bounds.Z0.max()),
            list(gamma.gamma),
        )
        return bounds_from_scratch(par, gamma, interval)
    return bounds


def bounds_from_scratch(
    par: Parameterization, gamma: ScalingLike, interval: bool = False
) -> BoundSet:
    """Bounds of ``L(a)`` with a fresh ``A``, without the rescaling identities."""
    gamma = par.problem.scaling(gamma)
    scaled = rescaled_problem(par, gamma)
    A = build_A(scaled)
    ones = Scaling.ones(par.problem.n_s, par.problem.spectral.pairing)
    bounds = compute_bounds(scaled, A, ones, interval)
    return BoundSet(
        bounds.Y, bounds.Z0, bounds.Z1, bounds.Z2, gamma, interval, from_scratch=True
    )


def radii_root_interval(bounds: BoundSet) -> Optional[Tuple[float, float]]:
    """The interval ``(r0, r1)`` on which every radii polynomial is negative,
    shrunk inward so that it is certain under outward rounding."""
    r0, r1 = 0.0, np.inf
    for Y, Z0, Z1, Z2 in zip(bounds.Y, bounds.Z0, bounds.Z1, bounds.Z2):
        slope = Interval.point(Z0) + Interval.point(Z1) - 1.0
        if not slope.is_negative():
            return None
        Y = Interval.point(Y)
        if Z2 == 0.0:
            lo, hi = Y / (-slope), Interval.point(np.inf)
        else:
            Z2 = Interval.point(Z2)
            disc = slope.square() - 4.0 * Z2 * Y
            if not disc.is_positive():
                return None
            root = -slope + disc.sqrt()
            lo = (2.0 * Y) / root
            hi = root / (2.0 * Z2)
        if Y.hi == 0.0:
            lo = Interval.point(0.0)
        r0, r1 = max(r0, lo.hi), min(r1, hi.lo)
    if not r0 < r1:
        return None
    return float(r0), float(r1)


@dataclass(frozen=True, eq=False)
class RadiiReport:
    bounds: BoundSet
    root_interval: Optional[Tuple[float, float]]
    verdict: bool
    r_used: Optional[float]
    r_max: float
    injective: bool
    N: int
    notes: List[str] = field(default_factory=list)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict,
            "N": self.N,
            "r_max": self.r_max,
            "r_used": self.r_used,
            "root_interval": list(self.root_interval) if self.root_interval else None,
            "injective": self.injective,
            "polynomials": [list(p) for p in self.bounds.polynomials()],
            "bounds": self.bounds.as_dict(),
            "notes": list(self.notes),
        }


def _certainly_negative(bounds: BoundSet, r: float) -> bool:
    r = Interval.point(r)
    for Y, Z0, Z1, Z2 in zip(bounds.Y, bounds.Z0, bounds.Z1, bounds.Z2):
        slope = Interval.point(Z0) + Interval.point(Z1) - 1.0
        value = Interval.point(Y) + slope * r + Interval.point(Z2) * r * r
        if not value.is_negative():
            return False
    return True


def radii_report(bounds: BoundSet, r_max: float, N: int) -> RadiiReport:
    notes = [
        "injectivity of A follows from Z0 < 1 on the finite block and non-resonance "
        "on the tail",
    ]
    injective = bool(bounds.Z0.max() < 1.0)
    roots = radii_root_interval(bounds) if injective else None
    if roots is None:
        return RadiiReport(bounds, None, False, None, r_max, injective, N, notes)
    r0, r1 = roots
    r_used = r0 * R_USED_FACTOR if r0 > 0 else min(r_max, r1) * 1e-3
    if r_used >= r1:
        r_used = 0.5 * (r0 + r1)
    r_used = min(r_used, r_max)
    verdict = r0 <= r_max and _certainly_negative(bounds, r_used)
    return RadiiReport(bounds, roots, verdict, r_used, r_max, injective, N, notes)


def is_proof_valid(
    par: Parameterization,
    A: ApproxInverse,
    gamma: ScalingLike,
    interval: bool = True,
    z0_fallback: Optional[float] = None,
) -> RadiiReport:
    bounds = compute_bounds(par, A, gamma, interval, z0_fallback)
    return radii_report(bounds, par.problem.r_max, par.N)


def newton_like_map(A: ApproxInverse, x: VectorSeq) -> VectorSeq:
    """``T(x) = x - A F(x)``."""
    par = Parameterization(x, A.par.problem, A.par.gamma)
    Ax = A.apply(par.residual_values)
    padded = x.with_order(Ax.max_order)
    return VectorSeq(Ax.ordering, padded.values - Ax.values)
