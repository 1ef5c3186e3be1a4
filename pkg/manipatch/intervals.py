"""Outward rounded interval arithmetic without rounding-mode control.

Every primitive result is widened by one ulp on each side with
``numpy.nextafter``. Array computations use a priori error bounds of the form
``|fl(x) - x| <= gamma_k * |x|_abs`` with ``gamma_k = k u / (1 - k u)``.
"""
import math
import operator
from dataclasses import dataclass
from typing import Callable, Dict, Tuple, Union

import numpy as np

from .errors import DivisionByZeroInterval, NegativeSqrt

UNIT_ROUNDOFF = 2.0 ** -53

Number = Union[int, float]


def up(x):
    return np.nextafter(x, np.inf)


def down(x):
    return np.nextafter(x, -np.inf)


def gamma_n(k: int) -> float:
    """Upper bound of ``k u / (1 - k u)``."""
    ku = k * UNIT_ROUNDOFF
    if ku >= 0.5:
        raise ValueError(f"error bound gamma_{k} is not meaningful")
    return float(up(up(ku) / down(1.0 - ku)))


def add_up(x, y):
    return up(np.add(x, y))


def upper_sum(values: np.ndarray, axis=None) -> np.ndarray:
    """Upper bound of the exact sum of non-negative floats."""
    values = np.asarray(values, dtype=np.float64)
    k = values.size if axis is None else values.shape[axis]
    return up(np.sum(values, axis=axis) * (1.0 + gamma_n(max(k, 1) + 1)))


def upper_dot(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Upper bound of ``x @ y`` for non-negative operands."""
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    k = x.shape[-1]
    return up((x @ y) * (1.0 + gamma_n(k + 2)))


def enclose_matmul(A: np.ndarray, B: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Floating product ``C = A @ B`` and an upper bound of ``|A @ B - C|``.

    Complex products cost two real products and a sum per term, hence the
    ``2k + 2`` in the error constant.
    """
    C = A @ B
    k = A.shape[-1]
    bound = upper_dot(np.abs(A), np.abs(B))
    abs_error = up(up(bound * (2.0 * gamma_n(2 * k + 2))) * (1.0 + 4 * UNIT_ROUNDOFF))
    return C, abs_error


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi) or lo > hi:
            raise ValueError(f"invalid interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, x: Number) -> "Interval":
        return cls(x, x)

    @staticmethod
    def widened(lo: float, hi: float) -> "Interval":
        return Interval(down(lo), up(hi))

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def __contains__(self, x: Number) -> bool:
        return self.lo <= x <= self.hi

    def contains_zero(self) -> bool:
        return self.lo <= 0.0 <= self.hi

    def __add__(self, other) -> "Interval":
        other = as_interval(other)
        return Interval.widened(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __sub__(self, other) -> "Interval":
        other = as_interval(other)
        return Interval.widened(self.lo - other.hi, self.hi - other.lo)

    def __rsub__(self, other) -> "Interval":
        return as_interval(other) - self

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __mul__(self, other) -> "Interval":
        other = as_interval(other)
        products = (
            self.lo * other.lo,
            self.lo * other.hi,
            self.hi * other.lo,
            self.hi * other.hi,
        )
        return Interval.widened(min(products), max(products))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Interval":
        other = as_interval(other)
        if other.contains_zero():
            raise DivisionByZeroInterval(f"division by {other}, which contains 0")
        quotients = (
            self.lo / other.lo,
            self.lo / other.hi,
            self.hi / other.lo,
            self.hi / other.hi,
        )
        return Interval.widened(min(quotients), max(quotients))

    def __rtruediv__(self, other) -> "Interval":
        return as_interval(other) / self

    def __abs__(self) -> "Interval":
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return Interval(0.0, max(-self.lo, self.hi))

    def sqrt(self) -> "Interval":
        if self.lo < 0:
            raise NegativeSqrt(f"square root of {self}, which has negative part")
        return Interval(max(0.0, down(math.sqrt(self.lo))), up(math.sqrt(self.hi)))

    def square(self) -> "Interval":
        return abs(self) * abs(self)

    def is_negative(self) -> bool:
        """Certainly negative."""
        return self.hi < 0

    def is_positive(self) -> bool:
        return self.lo > 0

    def __repr__(self) -> str:
        return f"[{self.lo!r}, {self.hi!r}]"


def as_interval(x) -> Interval:
    if isinstance(x, Interval):
        return x
    return Interval.point(float(x))


_BINARY: Dict[str, Callable[[Interval, Interval], Interval]] = {
    "add": operator.add,
    "sub": operator.sub,
    "mul": operator.mul,
    "div": operator.truediv,
}


def interval_ops(a, b=None, op: str = "add") -> Interval:
    """Apply ``op`` (add, sub, mul, div, abs, sqrt) with outward rounding."""
    a = as_interval(a)
    if op == "abs":
        return abs(a)
    if op == "sqrt":
        return a.sqrt()
    if op not in _BINARY:
        raise ValueError(f"unknown interval operation {op!r}")
    return _BINARY[op](a, as_interval(b))


@dataclass(frozen=True)
class ComplexInterval:
    """Axis-aligned rectangle ``re + i im``."""

    re: Interval
    im: Interval

    @classmethod
    def point(cls, z: complex) -> "ComplexInterval":
        z = complex(z)
        return cls(Interval.point(z.real), Interval.point(z.imag))

    def __add__(self, other: "ComplexInterval") -> "ComplexInterval":
        return ComplexInterval(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "ComplexInterval") -> "ComplexInterval":
        return ComplexInterval(self.re - other.re, self.im - other.im)

    def __mul__(self, other: "ComplexInterval") -> "ComplexInterval":
        return ComplexInterval(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    def __contains__(self, z: complex) -> bool:
        z = complex(z)
        return z.real in self.re and z.imag in self.im

    def abs_upper(self) -> float:
        """Upper bound of ``|z|`` over the rectangle."""
        x = max(abs(self.re.lo), abs(self.re.hi))
        y = max(abs(self.im.lo), abs(self.im.hi))
        return float(up(up(math.hypot(x, y)) * (1.0 + 2 * UNIT_ROUNDOFF)))
