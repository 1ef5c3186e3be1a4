import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import SymmetryViolated
from .logger import logger
from .polyfield import PolyVectorField, eval_field_many
from .series import ScalingLike, VectorSeq, evaluate_many, rescale

SYMMETRY_WARN = 1e-10
SYMMETRY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Vertices in phase space with the parameters they were evaluated at.

    ``triangles`` is empty for polylines (one parameter) and point clouds
    (three or more parameters).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    parameter_grid: np.ndarray

    def __post_init__(self):
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise ValueError("triangle references a missing vertex")

    @property
    def n(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_s(self) -> int:
        return self.parameter_grid.shape[1]


@dataclass(frozen=True, eq=False)
class RealMap:
    """Evaluates a conjugate symmetric series at real parameters.

    For every pair ``(k, l)`` the series is evaluated at
    ``theta_k + i theta_l`` and ``theta_k - i theta_l``.
    """

    coeffs: VectorSeq
    pairing: Tuple[Tuple[int, int], ...] = ()

    def complex_arguments(self, thetas: np.ndarray) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        z = thetas.astype(np.complex128)
        for k, l in self.pairing:
            z[:, k] = thetas[:, k] + 1j * thetas[:, l]
            z[:, l] = thetas[:, k] - 1j * thetas[:, l]
        return z

    def __call__(self, thetas: np.ndarray) -> np.ndarray:
        values = evaluate_many(self.coeffs, self.complex_arguments(thetas))
        scale = max(1.0, float(np.abs(values.real).max(initial=0.0)))
        residue = float(np.abs(values.imag).max(initial=0.0)) / scale
        if residue > SYMMETRY_TOL:
            raise SymmetryViolated(
                f"imaginary residue {residue:.3g} evaluating a paired parameterization",
                residue,
            )
        if residue > SYMMETRY_WARN:
            logger.warning("Imaginary residue %.3g discarded", residue)
        return values.real


def real_recovery(a: VectorSeq, pairing: Sequence[Tuple[int, int]] = ()) -> RealMap:
    return RealMap(a, tuple(tuple(p) for p in pairing))


def _axis(domain: Optional[Sequence[Tuple[float, float]]], k: int, grid_n: int) -> np.ndarray:
    lo, hi = (-1.0, 1.0) if domain is None else domain[k]
    return np.linspace(lo, hi, grid_n)


def sample_surface(
    a: VectorSeq,
    grid_n: int = 65,
    domain: Optional[Sequence[Tuple[float, float]]] = None,
    pairing: Sequence[Tuple[int, int]] = (),
) -> SurfaceMesh:
    """Evaluate the real form of ``a`` on a ``grid_n`` per axis grid.

    Two parameters give a row-major grid split into ``2 (grid_n - 1)^2`` triangles.
    """
    if grid_n < 2:
        raise ValueError(f"grid_n must be at least 2, got {grid_n}")
    n_s = a.n_s
    if n_s == 2 and pairing and domain is None:
        # polar grid over the unit disc |theta_1 + i theta_2| <= 1
        radius, angle = np.meshgrid(
            np.linspace(0.0, 1.0, grid_n), np.linspace(0.0, 2 * np.pi, grid_n)
        )
        mesh = [radius * np.cos(angle), radius * np.sin(angle)]
    else:
        axes = [_axis(domain, k, grid_n) for k in range(n_s)]
        mesh = np.meshgrid(*axes[::-1], indexing="ij")[::-1]
    thetas = np.stack([m.reshape(-1) for m in mesh], axis=1)
    vertices = real_recovery(a, pairing)(thetas)

    if n_s == 2:
        rows, cols = np.meshgrid(np.arange(grid_n - 1), np.arange(grid_n - 1), indexing="ij")
        v0 = (rows * grid_n + cols).reshape(-1)
        v1, v2 = v0 + 1, v0 + grid_n
        v3 = v2 + 1
        triangles = np.concatenate(
            [np.stack([v0, v1, v3], axis=1), np.stack([v0, v3, v2], axis=1)]
        )
    else:
        triangles = np.zeros((0, 3), dtype=np.int64)
    return SurfaceMesh(vertices, triangles.astype(np.int64), thetas)


def surface_area(mesh: SurfaceMesh) -> float:
    """Sum of triangle areas, ``|u ^ v| / 2`` computed as
    ``sqrt(|u|^2 |v|^2 - (u . v)^2) / 2`` so it holds in any dimension."""
    if not mesh.triangles.size:
        raise ValueError("surface area needs a triangulated mesh")
    corners = mesh.vertices[mesh.triangles]
    u = corners[:, 1] - corners[:, 0]
    v = corners[:, 2] - corners[:, 0]
    uu = np.einsum("ij,ij->i", u, u)
    vv = np.einsum("ij,ij->i", v, v)
    uv = np.einsum("ij,ij->i", u, v)
    return float(0.5 * np.sqrt(np.maximum(uu * vv - uv * uv, 0.0)).sum())


def patch_area(
    a: VectorSeq,
    gamma: ScalingLike,
    grid_n: int = 33,
    pairing: Sequence[Tuple[int, int]] = (),
) -> float:
    """Area of the image of ``[-1, 1]^2`` under the rescaled parameterization."""
    return surface_area(sample_surface(rescale(a, gamma), grid_n, pairing=pairing))


def patch_extent(
    mesh: SurfaceMesh, direction: Sequence[float], p: Optional[Sequence[float]] = None
) -> float:
    """``max |<x - p, direction>|`` over the vertices, ``direction`` normalised."""
    direction = np.real(np.asarray(direction, dtype=np.complex128))
    direction = direction / np.linalg.norm(direction)
    p = np.zeros(mesh.n) if p is None else np.asarray(p, dtype=np.float64)
    return float(np.abs((mesh.vertices - p) @ direction).max())


def find_fold(
    mesh: SurfaceMesh,
    basis: np.ndarray,
    p: Sequence[float],
    proj_tol: float = 1e-3,
    dist_tol: float = 1e-2,
) -> Optional[Tuple[int, int]]:
    """Two vertices with the same projection onto ``span(basis)`` (within
    ``proj_tol``) but more than ``dist_tol`` apart in phase space.

    Such a pair shows the patch is not a graph over the eigenplane.
    """
    basis = np.real(np.asarray(basis, dtype=np.complex128))
    coords = (mesh.vertices - np.asarray(p, dtype=np.float64)) @ np.linalg.pinv(basis).T
    cells = np.floor(coords / proj_tol).astype(np.int64)
    buckets = {}
    for index, cell in enumerate(map(tuple, cells)):
        buckets.setdefault(cell, []).append(index)
    offsets = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)]
    for cell, members in buckets.items():
        neighbours = [
            j
            for dx, dy in offsets
            for j in buckets.get((cell[0] + dx, cell[1] + dy), ())
        ]
        for i in members:
            for j in neighbours:
                if j <= i:
                    continue
                if np.abs(coords[i] - coords[j]).max() > proj_tol:
                    continue
                if np.linalg.norm(mesh.vertices[i] - mesh.vertices[j]) > dist_tol:
                    return i, j
    return None


def rk4(
    g: PolyVectorField, y0: np.ndarray, t: float, steps: Optional[int] = None
) -> np.ndarray:
    """Classical fourth order Runge-Kutta from ``y0`` (one state per row) to time ``t``."""
    if steps is None:
        steps = max(64, math.ceil(64 * t))
    y = np.array(np.atleast_2d(y0))
    dt = t / steps
    for _ in range(steps):
        k1 = eval_field_many(g, y)
        k2 = eval_field_many(g, y + k1 * dt / 2.0)
        k3 = eval_field_many(g, y + k2 * dt / 2.0)
        k4 = eval_field_many(g, y + k3 * dt)
        y = y + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * dt / 6.0
    return y


def conjugacy_errors(
    a: VectorSeq,
    g: PolyVectorField,
    lambdas: np.ndarray,
    thetas: np.ndarray,
    t: float,
    steps: Optional[int] = None,
) -> np.ndarray:
    """``|phi(t, f(theta)) - f(exp(Lambda t) theta)|_inf`` for each row of ``thetas``."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.complex128))
    start = evaluate_many(a, thetas)
    flowed = rk4(g, start, t, steps)
    linear = evaluate_many(a, thetas * np.exp(np.asarray(lambdas) * t)[None, :])
    return np.abs(flowed - linear).max(axis=1)


def conjugacy_error(
    a: VectorSeq,
    g: PolyVectorField,
    lambdas: np.ndarray,
    theta: Sequence[complex],
    t: float,
) -> float:
    return float(conjugacy_errors(a, g, lambdas, np.asarray(theta)[None, :], t)[0])


def export_mesh(mesh: SurfaceMesh, path: Union[str, Path], format: str = "obj") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "obj":
        if mesh.n_s > 2:
            raise ValueError("point clouds are exported as csv only")
        if mesh.n < 3:
            raise ValueError(f"obj export needs at least 3 coordinates, got {mesh.n}")
        if mesh.n > 3:
            logger.warning(
                "OBJ export keeps the first 3 of %d coordinates", mesh.n
            )
        lines = [
            "v {:.17g} {:.17g} {:.17g}".format(*vertex[:3]) for vertex in mesh.vertices
        ]
        if mesh.n_s == 1:
            lines.append("l " + " ".join(str(i + 1) for i in range(len(mesh.vertices))))
        lines.extend("f {} {} {}".format(*(t + 1)) for t in mesh.triangles)
        path.write_text("\n".join(lines) + "\n")
    elif format == "csv":
        columns = [f"x{i + 1}" for i in range(mesh.n)]
        columns += [f"theta{k + 1}" for k in range(mesh.n_s)]
        frame = pd.DataFrame(np.hstack([mesh.vertices, mesh.parameter_grid]), columns=columns)
        frame.to_csv(path, index=False, float_format="%.17g")
        if mesh.triangles.size:
            triangles = pd.DataFrame(mesh.triangles, columns=["i", "j", "k"])
            triangles.to_csv(_triangles_path(path), index=False)
    else:
        raise ValueError(f"unknown mesh format {format!r}")
    return path


def _triangles_path(path: Path) -> Path:
    return path.with_name(path.stem + "_triangles.csv")


def read_mesh_csv(path: Union[str, Path]) -> SurfaceMesh:
    path = Path(path)
    frame = pd.read_csv(path, float_precision="round_trip")
    x = [c for c in frame.columns if c.startswith("x")]
    theta = [c for c in frame.columns if c.startswith("theta")]
    triangles_path = _triangles_path(path)
    if triangles_path.is_file():
        triangles = pd.read_csv(triangles_path).to_numpy(dtype=np.int64)
    else:
        triangles = np.zeros((0, 3), dtype=np.int64)
    return SurfaceMesh(frame[x].to_numpy(), triangles, frame[theta].to_numpy())
