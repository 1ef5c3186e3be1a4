from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, NonConvergence, SingularJacobian
from .logger import logger
from .series import VectorSeq, convolve, enumerate_multiindices


@dataclass(frozen=True, eq=False)
class PolyTerm:
    exponent: Tuple[int, ...]
    coeff: np.ndarray

    def __post_init__(self):
        exponent = tuple(int(e) for e in self.exponent)
        if any(e < 0 for e in exponent):
            raise ValueError(f"negative exponent in {exponent}")
        coeff = np.array(self.coeff, dtype=np.float64)
        coeff.flags.writeable = False
        object.__setattr__(self, "exponent", exponent)
        object.__setattr__(self, "coeff", coeff)

    @property
    def degree(self) -> int:
        return sum(self.exponent)


@dataclass(frozen=True, eq=False)
class PolyVectorField:
    """``g(y) = sum_beta b_beta y^beta`` with real coefficient vectors ``b_beta``.

    Terms sharing an exponent are merged on construction.
    """

    n: int
    terms: Tuple[PolyTerm, ...]
    parameters: Mapping[str, float] = field(default_factory=dict)
    variables: Tuple[str, ...] = ()

    def __post_init__(self):
        merged: Dict[Tuple[int, ...], np.ndarray] = {}
        for term in self.terms:
            if len(term.exponent) != self.n or term.coeff.shape != (self.n,):
                raise DimensionMismatch(
                    f"term {term.exponent} does not fit a field in {self.n} variables"
                )
            merged[term.exponent] = merged.get(term.exponent, 0.0) + term.coeff
        terms = tuple(PolyTerm(e, c) for e, c in merged.items())
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "parameters", dict(self.parameters))
        if not self.variables:
            object.__setattr__(
                self, "variables", tuple(f"y{i + 1}" for i in range(self.n))
            )

    @classmethod
    def from_entries(
        cls,
        n: int,
        entries: Iterable[Tuple[int, Sequence[int], float]],
        parameters: Optional[Mapping[str, float]] = None,
        variables: Sequence[str] = (),
    ) -> "PolyVectorField":
        """Build a field from ``(target component, exponents, coefficient)`` entries."""
        terms = []
        for target, exponents, value in entries:
            coeff = np.zeros(n)
            coeff[target] = value
            terms.append(PolyTerm(tuple(exponents), coeff))
        return cls(n, tuple(terms), parameters or {}, tuple(variables))

    @property
    def d(self) -> int:
        return max((t.degree for t in self.terms), default=0)

    @property
    def exponents(self) -> np.ndarray:
        return np.array([t.exponent for t in self.terms], dtype=np.int64).reshape(-1, self.n)

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([t.coeff for t in self.terms]).reshape(-1, self.n)

    def negated(self) -> "PolyVectorField":
        """Time reversal: the field ``-g``."""
        terms = tuple(PolyTerm(t.exponent, -t.coeff) for t in self.terms)
        return PolyVectorField(self.n, terms, self.parameters, self.variables)

    def absolute(self) -> "PolyVectorField":
        """The field with coefficients ``|b_beta|``, used for rounding error bounds."""
        terms = tuple(PolyTerm(t.exponent, np.abs(t.coeff)) for t in self.terms)
        return PolyVectorField(self.n, terms, self.parameters, self.variables)

    def terms_of_degree(self, degree: int) -> List[PolyTerm]:
        return [t for t in self.terms if t.degree == degree]

    def linear_coefficients(self) -> np.ndarray:
        """``L[k, i]``: coefficient of ``y_i`` in component ``k``."""
        L = np.zeros((self.n, self.n))
        for term in self.terms_of_degree(1):
            L[:, term.exponent.index(1)] += term.coeff
        return L

    def quadratic_coefficients(self) -> List[Tuple[int, int, np.ndarray]]:
        """``(i, j, b)`` with ``i <= j`` for every ``y_i y_j`` term."""
        out = []
        for term in self.terms_of_degree(2):
            support = [i for i, e in enumerate(term.exponent) for _ in range(e)]
            out.append((support[0], support[1], term.coeff))
        return out


def _monomials(exponents: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.prod(y[None, :] ** exponents, axis=1)


def eval_field(g: PolyVectorField, y: Sequence[complex]) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (g.n,):
        raise DimensionMismatch(f"point of shape {y.shape} for a field in {g.n} variables")
    if not g.terms:
        return np.zeros(g.n, dtype=y.dtype)
    return _monomials(g.exponents, y) @ g.coeffs


def eval_field_many(g: PolyVectorField, ys: np.ndarray) -> np.ndarray:
    """``g`` at every row of ``ys``."""
    ys = np.atleast_2d(ys)
    if not g.terms:
        return np.zeros_like(ys)
    monomials = np.prod(ys[:, None, :] ** g.exponents[None, :, :], axis=2)
    return monomials @ g.coeffs


def jacobian(g: PolyVectorField, y: Sequence[complex]) -> np.ndarray:
    y = np.asarray(y)
    if not g.terms:
        return np.zeros((g.n, g.n), dtype=y.dtype)
    exponents, coeffs = g.exponents, g.coeffs
    J = np.zeros((g.n, g.n), dtype=np.result_type(y.dtype, np.float64))
    for j in range(g.n):
        power = exponents[:, j]
        lowered = exponents.copy()
        lowered[:, j] = np.maximum(power - 1, 0)
        factor = np.where(power > 0, power * _monomials(lowered, y), 0.0)
        J[:, j] = factor @ coeffs
    return J


def find_equilibrium(
    g: PolyVectorField,
    y0: Sequence[float],
    tol: float = 1e-13,
    max_iterations: int = 50,
) -> np.ndarray:
    """Newton's method on ``g(p) = 0`` with the exact Jacobian."""
    y = np.array(y0, dtype=np.float64)
    residual = np.inf
    for iteration in range(max_iterations + 1):
        value = eval_field(g, y)
        residual = float(np.abs(value).max(initial=0.0))
        if residual <= tol:
            logger.info("Equilibrium found after %d Newton steps", iteration)
            return y
        J = jacobian(g, y)
        try:
            step = np.linalg.solve(J, -value)
        except np.linalg.LinAlgError as e:
            raise SingularJacobian(
                f"singular Jacobian at {y.tolist()}", iteration, residual
            ) from e
        if not np.all(np.isfinite(step)) or np.linalg.cond(J) > 1e14:
            raise SingularJacobian(
                f"ill-conditioned Jacobian at {y.tolist()}", iteration, residual
            )
        y = y + step
    raise NonConvergence(
        f"equilibrium Newton did not reach {tol:g} in {max_iterations} steps",
        max_iterations,
        residual,
    )


class _Powers:
    """Memoised products ``a^beta`` truncated to one output order."""

    def __init__(self, a: VectorSeq, out_order: int):
        self.a = a
        self.out_order = out_order
        self.n_s = a.n_s
        self.cache: Dict[Tuple[int, ...], np.ndarray] = {
            (0,) * a.n: np.ones(1, dtype=np.complex128)
        }

    def __call__(self, beta: Tuple[int, ...]) -> np.ndarray:
        if beta not in self.cache:
            j = max(i for i, e in enumerate(beta) if e > 0)
            lower = beta[:j] + (beta[j] - 1,) + beta[j + 1 :]
            self.cache[beta] = convolve(
                self(lower), self.a.values[j], self.n_s, self.out_order
            )
        return self.cache[beta]

    def padded(self, beta: Tuple[int, ...], count: int) -> np.ndarray:
        values = self(beta)
        if len(values) < count:
            values = np.pad(values, (0, count - len(values)))
        return values


def compose_field_series(g: PolyVectorField, a: VectorSeq, out_order: int) -> VectorSeq:
    """Coefficients of ``g(f(theta))`` for ``|alpha| < out_order``."""
    if a.n != g.n:
        raise DimensionMismatch(f"series with {a.n} components for a field in {g.n}")
    ordering = enumerate_multiindices(a.n_s, out_order)
    powers = _Powers(a, out_order)
    values = np.zeros((g.n, ordering.count), dtype=np.complex128)
    for term in g.terms:
        values += term.coeff[:, None] * powers.padded(term.exponent, ordering.count)[None, :]
    return VectorSeq(ordering, values)


def jacobian_series(g: PolyVectorField, a: VectorSeq, out_order: int) -> np.ndarray:
    """``D[i, j]``: coefficients of ``d g_i / d y_j`` along ``f(theta)``."""
    ordering = enumerate_multiindices(a.n_s, out_order)
    powers = _Powers(a, out_order)
    D = np.zeros((g.n, g.n, ordering.count), dtype=np.complex128)
    for term in g.terms:
        for j, e in enumerate(term.exponent):
            if e == 0:
                continue
            lower = term.exponent[:j] + (e - 1,) + term.exponent[j + 1 :]
            D[:, j, :] += e * term.coeff[:, None] * powers.padded(lower, ordering.count)
    return D
