import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DefectiveMatrix, NonConvergence, NonHyperbolic, ResonanceDetected
from .logger import logger
from .series import enumerate_multiindices

Eigenpair = Tuple[complex, np.ndarray]

HYPERBOLICITY_TOL = 1e-10
RESONANCE_TOL = 1e-8
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Equilibrium with the selected eigenvalues and eigenvectors.

    ``vectors[:, k]`` is ``V_k``. ``pairing`` lists positions ``(k, k + 1)`` of
    complex conjugate pairs, the member with positive imaginary part first.
    """

    p: np.ndarray
    lambdas: np.ndarray
    vectors: np.ndarray
    pairing: Tuple[Tuple[int, int], ...] = ()
    stability: str = "stable"
    normalization: str = "unit"
    spectrum: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))

    @property
    def n(self) -> int:
        return len(self.p)

    @property
    def n_s(self) -> int:
        return len(self.lambdas)

    @property
    def min_abs_re(self) -> float:
        return float(np.abs(self.lambdas.real).min())

    @property
    def max_abs_re(self) -> float:
        return float(np.abs(self.lambdas.real).max())

    def conjugate_permutation(self) -> np.ndarray:
        """Positions swapped by complex conjugation."""
        perm = np.arange(self.n_s)
        for k, l in self.pairing:
            perm[k], perm[l] = l, k
        return perm

    def report(self) -> Dict[str, Any]:
        return {
            "stability": self.stability,
            "normalization": self.normalization,
            "equilibrium": self.p.tolist(),
            "eigenvalues": [[z.real, z.imag] for z in self.lambdas],
            "eigenvectors": [
                [[z.real, z.imag] for z in self.vectors[:, k]] for k in range(self.n_s)
            ],
            "pairing": [list(p) for p in self.pairing],
            "spectrum": [[z.real, z.imag] for z in self.spectrum],
        }


def _polish(J: np.ndarray, lam: complex, iterations: int = 3) -> complex:
    """Newton on ``det(J - lam I)`` using ``d log det / d lam = -tr((J - lam I)^-1)``."""
    identity = np.eye(len(J))
    for _ in range(iterations):
        try:
            trace = np.trace(np.linalg.inv(J - lam * identity))
        except np.linalg.LinAlgError:
            break
        if not np.isfinite(trace) or trace == 0:
            break
        step = 1.0 / trace
        if abs(step) > 1e-6 * max(1.0, abs(lam)):
            break
        lam = lam + step
    return lam


def _clusters(lambdas: np.ndarray, tol: float = 1e-6) -> List[List[int]]:
    groups: List[List[int]] = []
    for k, lam in enumerate(lambdas):
        for group in groups:
            if abs(lambdas[group[0]] - lam) <= tol * max(1.0, abs(lam)):
                group.append(k)
                break
        else:
            groups.append([k])
    return groups


def _fix_phase(v: np.ndarray, anchor: Optional[int] = None) -> np.ndarray:
    if anchor is not None:
        if abs(v[anchor]) < 1e-12 * np.abs(v).max():
            raise ValueError(f"eigenvector entry {anchor} vanishes, cannot anchor")
        return v / v[anchor]
    k = int(np.argmax(np.abs(v)))
    v = v * (np.conj(v[k]) / abs(v[k]))
    return v / np.linalg.norm(v)


def _inverse_iteration(
    J: np.ndarray, lam: complex, start: np.ndarray, iterations: int = 4
) -> np.ndarray:
    n = len(J)
    shift = 1e-12 * max(1.0, np.abs(J).max())
    M = J - (lam + shift) * np.eye(n)
    v = start.astype(np.complex128)
    for _ in range(iterations):
        try:
            v = np.linalg.solve(M, v)
        except np.linalg.LinAlgError:
            _, _, vh = np.linalg.svd(J - lam * np.eye(n))
            return np.conj(vh[-1])
        v = v / np.linalg.norm(v)
    return v


def eigenpairs(J: np.ndarray, anchor: Optional[int] = None) -> List[Eigenpair]:
    """All eigenpairs of a small dense matrix.

    Eigenvalues are polished by Newton on the determinant; vectors come from
    inverse iteration, with distinct starting vectors orthogonalised inside a
    cluster of repeated eigenvalues.
    """
    J = np.asarray(J, dtype=np.float64)
    n = len(J)
    lambdas = np.array([_polish(J, lam) for lam in np.linalg.eigvals(J)])
    real = np.abs(lambdas.imag) <= 1e-12 * np.maximum(1.0, np.abs(lambdas))
    lambdas[real] = lambdas[real].real

    vectors = np.zeros((n, n), dtype=np.complex128)
    starts = np.eye(n) + 1.0 / np.sqrt(n)
    for group in _clusters(lambdas):
        lam = lambdas[group].mean()
        basis: List[np.ndarray] = []
        for s, k in enumerate(group):
            v = _inverse_iteration(J, lam, starts[s % n])
            for b in basis:
                v = v - np.vdot(b, v) * b
            size = np.linalg.norm(v)
            if size < 1e-8:
                raise DefectiveMatrix(
                    f"eigenvalue {lam:.6g} has fewer independent eigenvectors than "
                    "its multiplicity"
                )
            v = v / size
            basis.append(v)
            lambdas[k] = lam
            vectors[:, k] = v

    if np.linalg.cond(vectors) > 1e10:
        raise DefectiveMatrix("eigenvectors are numerically dependent")

    pairs: List[Eigenpair] = []
    for k in range(n):
        lam, v = complex(lambdas[k]), _fix_phase(vectors[:, k], anchor)
        if lam.imag == 0.0:
            v = v.real.astype(np.complex128)
            v = _fix_phase(v, anchor)
        scale = np.abs(v).max()
        residual = np.abs(J @ v - lam * v).max()
        if residual > RESIDUAL_TOL * scale:
            raise NonConvergence(
                f"eigenpair residual {residual:.3g} for eigenvalue {lam:.6g}",
                residual=float(residual),
            )
        pairs.append((lam, v))
    return pairs


def select_and_pair(
    eigs: Sequence[Eigenpair],
    stability: str = "stable",
    p: Optional[np.ndarray] = None,
    anchor: Optional[int] = None,
) -> SpectralData:
    """Pick the stable half of the spectrum of ``J(p)`` (of ``-J(p)`` when the
    unstable manifold is requested) and arrange conjugate pairs.

    Complex pairs come first, each as ``(lambda, conj(lambda))``, then real
    eigenvalues in increasing order.
    """
    if stability not in ("stable", "unstable"):
        raise ValueError(f"stability must be 'stable' or 'unstable', got {stability!r}")
    sign = -1.0 if stability == "unstable" else 1.0
    all_lambdas = np.array([sign * lam for lam, _ in eigs])
    for lam in all_lambdas:
        if abs(lam.real) < HYPERBOLICITY_TOL:
            raise NonHyperbolic(f"eigenvalue {lam:.6g} is on the imaginary axis", lam)

    chosen = [(sign * lam, v) for lam, v in eigs if (sign * lam).real < 0]
    if not chosen:
        raise NonHyperbolic(f"no {stability} eigenvalues", complex("nan"))

    complex_up = [(lam, v) for lam, v in chosen if lam.imag > 0]
    complex_down = [(lam, v) for lam, v in chosen if lam.imag < 0]
    reals = [(lam, v) for lam, v in chosen if lam.imag == 0]
    if len(complex_up) != len(complex_down):
        raise NonConvergence("complex eigenvalues do not come in conjugate pairs")

    lambdas: List[complex] = []
    vectors: List[np.ndarray] = []
    pairing: List[Tuple[int, int]] = []
    for lam, v in sorted(complex_up, key=lambda e: (e[0].real, -e[0].imag)):
        partner = min(complex_down, key=lambda e: abs(e[0] - np.conj(lam)))
        complex_down = [e for e in complex_down if e is not partner]
        lam = 0.5 * (lam + np.conj(partner[0]))
        w = np.conj(partner[1])
        overlap = np.vdot(w, v)
        if abs(overlap) > 0:
            w = w * (overlap / abs(overlap)) * (np.linalg.norm(v) / np.linalg.norm(w))
        v = _fix_phase(0.5 * (v + w), anchor)
        pairing.append((len(lambdas), len(lambdas) + 1))
        lambdas.extend([lam, np.conj(lam)])
        vectors.extend([v, np.conj(v)])
    for lam, v in sorted(reals, key=lambda e: e[0].real):
        lambdas.append(complex(lam.real, 0.0))
        vectors.append(v)

    n = len(vectors[0])
    return SpectralData(
        p=np.zeros(n) if p is None else np.asarray(p, dtype=np.float64),
        lambdas=np.array(lambdas, dtype=np.complex128),
        vectors=np.stack(vectors, axis=1),
        pairing=tuple(pairing),
        stability=stability,
        normalization="unit" if anchor is None else "anchor",
        spectrum=all_lambdas,
    )


@dataclass(frozen=True)
class ResonanceCheck:
    max_order: int
    min_gap: float
    tolerance: float

    def report(self) -> Dict[str, Any]:
        return {
            "nonresonant": True,
            "max_order": self.max_order,
            "min_gap": self.min_gap,
            "tolerance": self.tolerance,
        }


def resonance_order(lambdas: Sequence[complex]) -> int:
    re = np.abs(np.real(lambdas))
    return math.ceil(re.max() / re.min()) + 1


def check_nonresonance(
    lambdas: Sequence[complex], tol: float = RESONANCE_TOL
) -> ResonanceCheck:
    """Look for ``alpha . lambda = lambda_j`` with ``2 <= |alpha| <= M``.

    Beyond ``M = ceil(max|Re| / min|Re|) + 1`` the real part of ``alpha . lambda``
    is below every ``Re lambda_j`` and no resonance can occur.
    """
    lambdas = np.asarray(lambdas, dtype=np.complex128)
    if np.any(lambdas.real >= 0):
        raise ValueError("non-resonance is checked on stable eigenvalues only")
    max_order = resonance_order(lambdas)
    ordering = enumerate_multiindices(len(lambdas), max_order + 1)
    start = int(ordering.offsets[2]) if max_order >= 2 else ordering.count
    alphas = ordering.indices[start:]
    combos = alphas @ lambdas
    gaps = np.abs(combos[:, None] - lambdas[None, :])
    if gaps.size == 0:
        return ResonanceCheck(max_order, float("inf"), tol)
    flat = int(np.argmin(gaps))
    row, j = divmod(flat, len(lambdas))
    gap = float(gaps[row, j])
    if gap < tol:
        alpha = tuple(int(e) for e in alphas[row])
        raise ResonanceDetected(
            f"resonance {alpha} . lambda = lambda_{j} (gap {gap:.3g})", alpha, j, gap
        )
    logger.info("Non-resonance verified up to order %d, min gap %.3g", max_order, gap)
    return ResonanceCheck(max_order, gap, tol)
