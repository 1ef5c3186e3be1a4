"""Graded multivariate Taylor coefficient sequences.

Coefficients are stored densely, ordered by growing total order ``|alpha|`` and
lexicographically (first exponent descending) inside one order, e.g. for two
variables ``(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...``. The position of a
multi-index does not depend on the truncation order, so padding a sequence to a
higher order is just appending zeros.
"""
import functools
from dataclasses import dataclass
from math import comb
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DimensionMismatch, SizeError
from .logger import logger

MultiIndex = Tuple[int, ...]

MAX_INDICES = 5_000_000


def index_count(n_s: int, N: int) -> int:
    """Number of multi-indices in ``n_s`` variables with ``|alpha| < N``."""
    return comb(N + n_s - 1, n_s)


def _compositions(order: int, n_s: int) -> Iterator[MultiIndex]:
    if n_s == 1:
        yield (order,)
        return
    for first in range(order, -1, -1):
        for rest in _compositions(order - first, n_s - 1):
            yield (first,) + rest


@functools.lru_cache(maxsize=None)
def _binomials(top: int, bottom: int) -> np.ndarray:
    table = np.zeros((top + 1, bottom + 1), dtype=np.int64)
    for a in range(top + 1):
        for b in range(min(a, bottom) + 1):
            table[a, b] = comb(a, b)
    return table


@dataclass(frozen=True, eq=False)
class GradedOrdering:
    n_s: int
    max_order: int
    indices: np.ndarray
    offsets: np.ndarray

    @property
    def count(self) -> int:
        return len(self.indices)

    def __len__(self) -> int:
        return self.count

    @functools.cached_property
    def orders(self) -> np.ndarray:
        return self.indices.sum(axis=1)

    def index(self, k: int) -> MultiIndex:
        return tuple(int(e) for e in self.indices[k])

    def order_slice(self, k: int) -> slice:
        return slice(int(self.offsets[k]), int(self.offsets[k + 1]))

    def positions(self, alphas: np.ndarray) -> np.ndarray:
        """Vectorised rank of multi-indices (rows of ``alphas``) in the ordering."""
        alphas = np.atleast_2d(np.asarray(alphas, dtype=np.int64))
        if alphas.shape[-1] != self.n_s:
            raise DimensionMismatch(
                f"multi-index of length {alphas.shape[-1]} for n_s = {self.n_s}"
            )
        order = alphas.sum(axis=1)
        top = int(order.max(initial=0)) + self.n_s
        binom = _binomials(top, self.n_s)
        pos = binom[order + self.n_s - 1, self.n_s].copy()
        remaining = order.copy()
        for j in range(self.n_s - 1):
            parts = self.n_s - j
            m = remaining - alphas[:, j] - 1
            ahead = np.where(m >= 0, binom[np.maximum(m, 0) + parts - 1, parts - 1], 0)
            pos += ahead
            remaining = remaining - alphas[:, j]
        return pos

    def position(self, alpha: Sequence[int]) -> int:
        alpha = tuple(int(e) for e in alpha)
        if any(e < 0 for e in alpha):
            raise ValueError(f"negative exponent in {alpha}")
        if sum(alpha) >= self.max_order:
            raise KeyError(f"{alpha} has order >= {self.max_order}")
        return int(self.positions(np.array([alpha]))[0])

    @functools.cached_property
    def parents(self) -> Tuple[np.ndarray, np.ndarray]:
        """For every position k > 0: the position of ``alpha - e_j`` and ``j``,
        with ``j`` the first variable whose exponent is positive."""
        if self.count <= 1:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        rest = self.indices[1:]
        var = np.argmax(rest > 0, axis=1)
        lowered = rest.copy()
        lowered[np.arange(len(rest)), var] -= 1
        return self.positions(lowered), var

    def compatible(self, other: "GradedOrdering") -> bool:
        return self.n_s == other.n_s


@functools.lru_cache(maxsize=64)
def enumerate_multiindices(n_s: int, N: int) -> GradedOrdering:
    if n_s < 1 or N < 1:
        raise ValueError(f"need n_s >= 1 and N >= 1, got n_s={n_s}, N={N}")
    count = index_count(n_s, N)
    if count > MAX_INDICES:
        raise SizeError(
            f"{count} multi-indices for n_s={n_s}, N={N} exceeds {MAX_INDICES}"
        )
    rows: List[MultiIndex] = []
    offsets = [0]
    for order in range(N):
        rows.extend(_compositions(order, n_s))
        offsets.append(len(rows))
    indices = np.array(rows, dtype=np.int64).reshape(count, n_s)
    indices.flags.writeable = False
    return GradedOrdering(n_s, N, indices, np.array(offsets, dtype=np.int64))


@dataclass(frozen=True)
class _ProductTable:
    out: np.ndarray
    left: np.ndarray
    right: np.ndarray


@functools.lru_cache(maxsize=16)
def _full_product_table(n_s: int, out_order: int) -> _ProductTable:
    ordering = enumerate_multiindices(n_s, out_order)
    outs, lefts, rights = [], [], []
    for b in range(ordering.count):
        beta = ordering.indices[b]
        room = out_order - int(beta.sum())
        span = index_count(n_s, room)
        left = np.arange(span, dtype=np.int64)
        outs.append(ordering.positions(ordering.indices[:span] + beta))
        lefts.append(left)
        rights.append(np.full(span, b, dtype=np.int64))
    return _ProductTable(
        np.concatenate(outs).astype(np.int32),
        np.concatenate(lefts).astype(np.int32),
        np.concatenate(rights).astype(np.int32),
    )


@functools.lru_cache(maxsize=64)
def product_table(n_s: int, out_order: int, len_u: int, len_v: int) -> _ProductTable:
    """Triples ``(alpha, alpha - beta, beta)`` of the Cauchy product restricted to
    factors stored with ``len_u`` and ``len_v`` coefficients."""
    full = _full_product_table(n_s, out_order)
    count = index_count(n_s, out_order)
    if len_u >= count and len_v >= count:
        return full
    keep = (full.left < len_u) & (full.right < len_v)
    return _ProductTable(full.out[keep], full.left[keep], full.right[keep])


def convolve(u: np.ndarray, v: np.ndarray, n_s: int, out_order: int) -> np.ndarray:
    """Cauchy product of two coefficient arrays, truncated to ``|alpha| < out_order``."""
    table = product_table(n_s, out_order, len(u), len(v))
    count = index_count(n_s, out_order)
    products = u[table.left] * v[table.right]
    if np.iscomplexobj(products):
        return np.bincount(table.out, weights=products.real, minlength=count) + 1j * (
            np.bincount(table.out, weights=products.imag, minlength=count)
        )
    return np.bincount(table.out, weights=products, minlength=count)


def convolution_matrix(p: np.ndarray, n_s: int, N: int) -> np.ndarray:
    """Matrix of ``c -> p * c`` acting on coefficients with ``|alpha| < N``."""
    count = index_count(n_s, N)
    table = product_table(n_s, N, min(len(p), count), count)
    matrix = np.zeros((count, count), dtype=np.result_type(p.dtype, np.float64))
    matrix[table.out, table.right] = p[table.left]
    return matrix


def _pad(values: np.ndarray, count: int) -> np.ndarray:
    length = values.shape[-1]
    if length == count:
        return values
    if length > count:
        return values[..., :count]
    pad = [(0, 0)] * (values.ndim - 1) + [(0, count - length)]
    return np.pad(values, pad)


@dataclass(frozen=True, eq=False)
class CoeffSeq:
    ordering: GradedOrdering
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128)
        if values.shape != (self.ordering.count,):
            raise DimensionMismatch(
                f"{values.shape[0] if values.ndim else 0} values for an ordering of "
                f"{self.ordering.count} indices"
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def delta(
        cls, ordering: GradedOrdering, alpha: Sequence[int], value: complex = 1.0
    ) -> "CoeffSeq":
        values = np.zeros(ordering.count, dtype=np.complex128)
        values[ordering.position(alpha)] = value
        return cls(ordering, values)

    def __getitem__(self, alpha: Sequence[int]) -> complex:
        return complex(self.values[self.ordering.position(alpha)])

    def norm(self, nu: float = 1.0) -> float:
        return ell1_norm(self, nu)


@dataclass(frozen=True, eq=False)
class VectorSeq:
    ordering: GradedOrdering
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128)
        if values.ndim != 2 or values.shape[1] != self.ordering.count:
            raise DimensionMismatch(
                f"values of shape {values.shape} do not match an ordering of "
                f"{self.ordering.count} indices"
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, n: int, ordering: GradedOrdering) -> "VectorSeq":
        return cls(ordering, np.zeros((n, ordering.count), dtype=np.complex128))

    @classmethod
    def from_components(cls, components: Sequence[CoeffSeq]) -> "VectorSeq":
        ordering = components[0].ordering
        for component in components:
            if component.ordering.count != ordering.count:
                raise DimensionMismatch("components do not share one ordering")
        return cls(ordering, np.stack([c.values for c in components]))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def n_s(self) -> int:
        return self.ordering.n_s

    @property
    def max_order(self) -> int:
        return self.ordering.max_order

    def component(self, i: int) -> CoeffSeq:
        return CoeffSeq(self.ordering, self.values[i])

    @property
    def components(self) -> List[CoeffSeq]:
        return [self.component(i) for i in range(self.n)]

    def coefficient(self, alpha: Sequence[int]) -> np.ndarray:
        return self.values[:, self.ordering.position(alpha)].copy()

    def with_order(self, max_order: int) -> "VectorSeq":
        """Zero-pad or truncate to ``|alpha| < max_order``."""
        ordering = enumerate_multiindices(self.n_s, max_order)
        return VectorSeq(ordering, _pad(self.values, ordering.count))

    def component_norms(self, nu: float = 1.0) -> np.ndarray:
        weights = float(nu) ** self.ordering.orders
        return np.abs(self.values) @ weights

    def norm(self, nu: float = 1.0) -> float:
        """Norm of the product space: max over components of the l1_nu norms."""
        return float(self.component_norms(nu).max(initial=0.0))


@dataclass(frozen=True)
class Scaling:
    gamma: Tuple[float, ...]
    pairing: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        gamma = tuple(float(g) for g in np.ravel(self.gamma))
        if not gamma:
            raise ValueError("a scaling needs at least one entry")
        if any(not np.isfinite(g) or g <= 0 for g in gamma):
            raise ValueError(f"scaling entries must be positive, got {gamma}")
        for k, l in self.pairing:
            if not np.isclose(gamma[k], gamma[l], rtol=1e-14, atol=0.0):
                raise ValueError(
                    f"conjugate directions {k} and {l} need equal scalings, got "
                    f"{gamma[k]} and {gamma[l]}"
                )
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "pairing", tuple(tuple(p) for p in self.pairing))

    @classmethod
    def ones(cls, n_s: int, pairing=()) -> "Scaling":
        return cls((1.0,) * n_s, pairing)

    @classmethod
    def uniform(cls, n_s: int, value: float, pairing=()) -> "Scaling":
        return cls((float(value),) * n_s, pairing)

    def __len__(self) -> int:
        return len(self.gamma)

    def as_array(self) -> np.ndarray:
        return np.array(self.gamma)

    def inverse(self) -> "Scaling":
        return Scaling(tuple(1.0 / g for g in self.gamma), self.pairing)

    def __mul__(self, other: "Scaling") -> "Scaling":
        return Scaling(
            tuple(a * b for a, b in zip(self.gamma, other.gamma)),
            self.pairing or other.pairing,
        )

    def weights(self, ordering: GradedOrdering) -> np.ndarray:
        """``gamma ** alpha`` for every multi-index of the ordering."""
        if len(self.gamma) != ordering.n_s:
            raise DimensionMismatch(
                f"scaling of length {len(self.gamma)} for n_s = {ordering.n_s}"
            )
        return np.prod(self.as_array() ** ordering.indices, axis=1)

    def is_identity(self) -> bool:
        return all(g == 1.0 for g in self.gamma)


ScalingLike = Union[Scaling, Sequence[float], np.ndarray]


def as_scaling(gamma: ScalingLike, pairing=()) -> Scaling:
    if isinstance(gamma, Scaling):
        return gamma
    return Scaling(tuple(np.ravel(gamma)), pairing)


def cauchy_product(u: CoeffSeq, v: CoeffSeq, out_order: int) -> CoeffSeq:
    if u.ordering.n_s != v.ordering.n_s:
        raise DimensionMismatch(
            f"cannot multiply series in {u.ordering.n_s} and {v.ordering.n_s} variables"
        )
    n_s = u.ordering.n_s
    values = convolve(u.values, v.values, n_s, out_order)
    return CoeffSeq(enumerate_multiindices(n_s, out_order), values)


def ell1_norm(u: CoeffSeq, nu: float = 1.0) -> float:
    if nu <= 0:
        raise ValueError(f"nu must be positive, got {nu}")
    return float(np.abs(u.values) @ (float(nu) ** u.ordering.orders))


def x_norm(a: VectorSeq, nu: float = 1.0) -> float:
    return a.norm(nu)


def rescale(a: VectorSeq, gamma: ScalingLike) -> VectorSeq:
    gamma = as_scaling(gamma)
    return VectorSeq(a.ordering, a.values * gamma.weights(a.ordering))


def monomials(ordering: GradedOrdering, thetas: np.ndarray) -> np.ndarray:
    """``theta ** alpha`` for each row of ``thetas``, built order by order."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.complex128))
    mono = np.empty((thetas.shape[0], ordering.count), dtype=np.complex128)
    mono[:, 0] = 1.0
    parent, var = ordering.parents
    for order in range(1, ordering.max_order):
        sl = ordering.order_slice(order)
        k = np.arange(sl.start, sl.stop) - 1
        mono[:, sl] = mono[:, parent[k]] * thetas[:, var[k]]
    return mono


def evaluate_many(a: VectorSeq, thetas: np.ndarray) -> np.ndarray:
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.complex128))
    if thetas.shape[1] != a.n_s:
        raise DimensionMismatch(f"theta of length {thetas.shape[1]} for n_s = {a.n_s}")
    if thetas.size and np.abs(thetas).max() > 1.0 + 1e-12:
        logger.warning("Evaluating outside the unit polydisc, max |theta| = %g",
                       np.abs(thetas).max())
    return monomials(a.ordering, thetas) @ a.values.T


def evaluate(a: VectorSeq, theta: Sequence[complex]) -> np.ndarray:
    return evaluate_many(a, np.asarray(theta, dtype=np.complex128)[None, :])[0]

