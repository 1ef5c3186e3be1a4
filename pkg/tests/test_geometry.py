import logging
import math

import numpy as np
import pytest

from manipatch.errors import SymmetryViolated
from manipatch.geometry import (
    SurfaceMesh,
    conjugacy_error,
    conjugacy_errors,
    export_mesh,
    find_fold,
    patch_extent,
    read_mesh_csv,
    real_recovery,
    rk4,
    sample_surface,
    surface_area,
)
from manipatch.parameterization import solve_homological
from manipatch.polyfield import PolyVectorField
from manipatch.problems import load_problem
from manipatch.series import VectorSeq, enumerate_multiindices


def embedding(n=3):
    """``theta -> (theta_1, theta_2, 0, ...)``."""
    ordering = enumerate_multiindices(2, 1)
    values = np.zeros((n, ordering.count))
    values[0, ordering.position((1, 0))] = 1.0
    values[1, ordering.position((0, 1))] = 1.0
    return VectorSeq(ordering, values)


def test_grid_and_triangles():
    mesh = sample_surface(embedding(), grid_n=2)
    assert mesh.vertices.shape == (4, 3)
    assert mesh.triangles.tolist() == [[0, 1, 3], [0, 3, 2]]
    assert mesh.parameter_grid[1].tolist() == [1.0, -1.0]
    assert mesh.parameter_grid[2].tolist() == [-1.0, 1.0]


def test_flat_area():
    assert surface_area(sample_surface(embedding(), grid_n=5)) == pytest.approx(4.0)
    assert surface_area(sample_surface(embedding(4), grid_n=3)) == pytest.approx(4.0)


def test_sphere_octant_area():
    mesh = sample_surface(embedding(), grid_n=129)
    phi = (mesh.parameter_grid[:, 0] + 1) * math.pi / 4
    psi = (mesh.parameter_grid[:, 1] + 1) * math.pi / 4
    sphere = np.stack(
        [np.sin(phi) * np.cos(psi), np.sin(phi) * np.sin(psi), np.cos(phi)], axis=1
    )
    octant = SurfaceMesh(sphere, mesh.triangles, mesh.parameter_grid)
    assert surface_area(octant) == pytest.approx(math.pi / 2, rel=1e-2)


def test_area_needs_triangles():
    a = VectorSeq.zeros(3, enumerate_multiindices(1, 1))
    with pytest.raises(ValueError):
        surface_area(sample_surface(a, grid_n=4))


def test_mesh_rejects_missing_vertex():
    with pytest.raises(ValueError):
        SurfaceMesh(np.zeros((3, 3)), np.array([[0, 1, 3]]), np.zeros((3, 2)))


def test_export_obj(tmp_path):
    mesh = sample_surface(embedding(), grid_n=3)
    path = export_mesh(mesh, tmp_path / "patch.obj")
    lines = path.read_text().splitlines()
    assert sum(line.startswith("v ") for line in lines) == 9
    assert sum(line.startswith("f ") for line in lines) == 8
    assert "f 1 2 5" in lines


def test_export_obj_dimensions(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        export_mesh(sample_surface(embedding(4), grid_n=2), tmp_path / "four.obj")
    assert "first 3 of 4" in caplog.text
    with pytest.raises(ValueError):
        export_mesh(sample_surface(embedding(2), grid_n=2), tmp_path / "two.obj")
    with pytest.raises(ValueError):
        export_mesh(sample_surface(embedding(), grid_n=2), tmp_path / "x.ply", format="ply")


def test_export_csv(tmp_path):
    mesh = sample_surface(embedding(), grid_n=4)
    path = export_mesh(mesh, tmp_path / "patch.csv", format="csv")
    assert (tmp_path / "patch_triangles.csv").is_file()
    back = read_mesh_csv(path)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.triangles, mesh.triangles)
    assert np.array_equal(back.parameter_grid, mesh.parameter_grid)


def test_real_recovery(bridge_par):
    pairing = bridge_par.problem.spectral.pairing
    f = real_recovery(bridge_par.coeffs, pairing)
    thetas = np.random.default_rng(0).uniform(-0.5, 0.5, (20, 2))
    values = f(thetas)
    assert values.shape == (20, 4)
    assert np.isrealobj(values)
    assert np.allclose(f(np.zeros((1, 2))), bridge_par.problem.spectral.p)


def test_broken_symmetry(bridge_par):
    a = bridge_par.coeffs
    values = a.values.copy()
    values[:, a.ordering.position((2, 0))] += 0.1
    f = real_recovery(VectorSeq(a.ordering, values), bridge_par.problem.spectral.pairing)
    with pytest.raises(SymmetryViolated) as info:
        f(np.array([[0.5, 0.5]]))
    assert info.value.residue > 1e-8


def test_paired_surface_is_a_disc(bridge_par):
    mesh = sample_surface(bridge_par.coeffs, grid_n=9, pairing=bridge_par.problem.spectral.pairing)
    assert np.hypot(*mesh.parameter_grid.T).max() == pytest.approx(1.0)


def test_rk4():
    g = PolyVectorField.from_entries(1, [(0, (1,), -1.0)])
    y = rk4(g, np.array([[1.0]]), 1.0)
    assert y[0, 0] == pytest.approx(math.exp(-1.0), rel=1e-9)


def test_conjugacy_at_equilibrium(lorenz_par):
    problem = lorenz_par.problem
    error = conjugacy_error(
        lorenz_par.coeffs, problem.field, problem.spectral.lambdas, [0.0, 0.0], 0.5
    )
    assert error <= 1e-10


def test_conjugacy_of_linear_field(make_problem):
    path = make_problem("linear", 2, [(0, (1, 0), -1.0), (1, (0, 1), -1.5)])
    par = solve_homological(load_problem(path, N=5))
    thetas = np.random.default_rng(1).uniform(-1, 1, (10, 2))
    errors = conjugacy_errors(
        par.coeffs, par.problem.field, par.problem.spectral.lambdas, thetas, 0.5, steps=256
    )
    assert errors.max() <= 1e-10


def test_fold_detection():
    vertices = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    mesh = SurfaceMesh(vertices, np.zeros((0, 3), dtype=np.int64), np.zeros((3, 2)))
    basis = np.eye(3)[:, :2]
    assert find_fold(mesh, basis, np.zeros(3)) == (0, 2)
    assert find_fold(sample_surface(embedding(), grid_n=9), basis, np.zeros(3)) is None


def test_patch_extent():
    mesh = sample_surface(embedding(), grid_n=5)
    assert patch_extent(mesh, [2.0, 0.0, 0.0]) == pytest.approx(1.0)
    assert patch_extent(mesh, [1.0, 1.0, 0.0]) == pytest.approx(math.sqrt(2))
    assert patch_extent(mesh, [0.0, 0.0, 1.0], p=[0.0, 0.0, -3.0]) == pytest.approx(3.0)
