from typing import Any, Dict, Optional, Sequence, Tuple


class ManipatchError(Exception):
    """Base class for every error raised by manipatch.

    ``exit_code`` is what the command-line interface returns when the error
    escapes a command.
    """

    exit_code = 1


class ProblemSchemaError(ManipatchError):
    """Raised when a problem file or configuration does not match its schema."""

    exit_code = 2

    def __init__(self, msg: str, path: Optional[str] = None):
        super().__init__(msg)
        self.path = path


class SizeError(ManipatchError):
    """Raised when a graded index table would be too large to store."""

    exit_code = 2


class DimensionMismatch(ManipatchError):
    """Raised when series with different numbers of variables are combined."""

    exit_code = 2


class NonConvergence(ManipatchError):
    """Raised when an iterative method did not reach its tolerance.

    ``iterations`` and ``residual`` describe the last iterate.
    """

    exit_code = 3

    def __init__(self, msg: str, iterations: int = 0, residual: float = float("nan")):
        super().__init__(msg)
        self.iterations = iterations
        self.residual = residual


class SingularJacobian(NonConvergence):
    """Raised when Newton's method meets a (numerically) singular Jacobian."""


class SingularHomological(NonConvergence):
    """Raised when a homological system is numerically singular at ``alpha``."""

    def __init__(self, msg: str, alpha: Tuple[int, ...]):
        super().__init__(msg)
        self.alpha = alpha


class SingularBlock(NonConvergence):
    """Raised when the finite block of DF cannot be inverted."""


class DefectiveMatrix(NonConvergence):
    """Raised when a Jacobian lacks a full set of eigenvectors."""


class NonHyperbolic(ManipatchError):
    """Raised when an eigenvalue lies on (or too close to) the imaginary axis."""

    exit_code = 4

    def __init__(self, msg: str, eigenvalue: complex):
        super().__init__(msg)
        self.eigenvalue = eigenvalue


class ResonanceDetected(ManipatchError):
    """Raised when ``alpha . lambda`` matches ``lambda[j]`` within tolerance."""

    exit_code = 4

    def __init__(self, msg: str, alpha: Tuple[int, ...], j: int, gap: float):
        super().__init__(msg)
        self.alpha = alpha
        self.j = j
        self.gap = gap


class UnsupportedDegree(ManipatchError):
    """Raised when the proof path is asked to handle a field of degree > 2."""

    exit_code = 6

    def __init__(self, msg: str, degree: int):
        super().__init__(msg)
        self.degree = degree


class DivisionByZeroInterval(ManipatchError, ZeroDivisionError):
    pass


class NegativeSqrt(ManipatchError, ValueError):
    pass


class EmptyLevelSet(ManipatchError):
    """Raised when no scaling at all satisfies the defect threshold."""

    exit_code = 5


class ProofImpossible(ManipatchError):
    """Raised when even tiny scalings fail the radii polynomial test.

    ``bounds`` holds the failing bound values keyed by name.
    """

    exit_code = 5

    def __init__(self, msg: str, bounds: Optional[Dict[str, Sequence[float]]] = None):
        super().__init__(msg)
        self.bounds = bounds or {}


class SymmetryViolated(ManipatchError):
    """Raised when a paired parameterization does not evaluate to real values."""

    exit_code = 7

    def __init__(self, msg: str, residue: float):
        super().__init__(msg)
        self.residue = residue


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, ManipatchError):
        return error.exit_code
    return 1


def describe(error: BaseException) -> Dict[str, Any]:
    """Flatten an error and its diagnostic attributes for reports."""
    info: Dict[str, Any] = {"error": type(error).__name__, "message": str(error)}
    for key in ("alpha", "j", "gap", "degree", "residue", "iterations", "path"):
        if hasattr(error, key):
            value = getattr(error, key)
            info[key] = list(value) if isinstance(value, tuple) else value
    return info
