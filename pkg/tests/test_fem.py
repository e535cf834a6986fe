import math

import numpy as np
import pytest

from platelab.exceptions import NoConvergence
from platelab.fem_service import FemService

from conftest import clamped_field


def test_mass_integrates_the_domain(square_ops, disk_ops, disk):
    one = np.ones(square_ops.n)
    assert one @ (square_ops.M_scalar @ one) == pytest.approx(1.0, rel=1e-13)
    one = np.ones(disk_ops.n)
    assert one @ (disk_ops.M_scalar @ one) == pytest.approx(disk.areas.sum(), rel=1e-13)
    assert disk_ops.lumped.sum() == pytest.approx(disk.areas.sum(), rel=1e-13)


def test_matrices_are_symmetric(disk_ops):
    for A in (disk_ops.M_scalar, disk_ops.A_lap, disk_ops.A_veclap, disk_ops.A_korn):
        assert abs(A - A.T).max() < 1e-13


def test_laplacian_kills_constants_and_integrates_linears(square_ops, square):
    np.testing.assert_allclose(square_ops.A_lap @ np.ones(square_ops.n), 0.0, atol=1e-12)
    x = square.vertices[:, 0]
    assert x @ (square_ops.A_lap @ x) == pytest.approx(1.0, rel=1e-13)


def test_gradient_divergence_duality(disk_ops, disk, rng):
    w = clamped_field(disk, rng, vector=False)
    v = rng.normal(size=(disk.n_vertices, 2))
    flat_v = FemService.flat(v)
    lhs = flat_v @ (disk_ops.G_grad @ w)
    rhs = w @ (disk_ops.B_div @ flat_v)
    assert abs(lhs + rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_korn_form_splits_into_laplacian_and_divergence(disk_ops, disk, params, rng):
    v = clamped_field(disk, rng)
    flat_v = FemService.flat(v)
    korn = flat_v @ (disk_ops.A_korn @ flat_v)
    lap = flat_v @ (disk_ops.A_veclap @ flat_v)
    div_sq = FemService.div_norm(disk_ops, v) ** 2
    expected = params.Dflex * (0.5 * (1 - params.mu) * lap + 0.5 * (1 + params.mu) * div_sq)
    assert korn == pytest.approx(expected, rel=1e-10)


def test_rot_matches_cell_rotation(disk_ops, disk, rng):
    v = clamped_field(disk, rng)
    phi = rng.normal(size=disk.n_vertices)
    weak = phi @ (disk_ops.R_rot @ FemService.flat(v))
    cell = (disk_ops.cell_load.T @ phi) @ FemService.cell_rot(disk_ops, v)
    assert weak == pytest.approx(cell, rel=1e-10)


def test_solve_spd(disk_ops, disk, rng):
    interior = disk_ops.free_dofs('w')
    A = FemService.restrict(disk_ops.A_lap, interior)
    b = rng.normal(size=interior.size)
    x, iterations = FemService.solve_spd(A, b, tol=1e-12, return_iterations=True)
    assert np.linalg.norm(A @ x - b) <= 1e-11 * np.linalg.norm(b)
    assert iterations > 0
    np.testing.assert_array_equal(FemService.solve_spd(A, np.zeros(interior.size)), 0.0)


def test_solve_spd_reports_no_convergence(fine_disk_ops, rng):
    interior = fine_disk_ops.free_dofs('w')
    A = FemService.restrict(fine_disk_ops.A_lap, interior)
    with pytest.raises(NoConvergence) as e:
        FemService.solve_spd(A, rng.normal(size=interior.size), tol=1e-14, maxiter=2)
    assert e.value.iterations <= 2
    assert e.value.exit_code == 3


def test_solve_mass_inverts_the_projection(disk_ops, disk):
    f = np.sin(disk.vertices[:, 0]) + disk.vertices[:, 1] ** 2
    np.testing.assert_allclose(FemService.solve_mass(disk_ops, disk_ops.M_scalar @ f), f, atol=1e-8)
    v = np.column_stack([f, 2 * f])
    recovered = FemService.solve_mass(disk_ops, disk_ops.M_vec @ FemService.flat(v), vector=True)
    np.testing.assert_allclose(recovered, v, atol=1e-8)


def test_project_l2_shapes(disk):
    assert FemService.project_l2(disk, lambda x, y: 2.5).shape == (disk.n_vertices,)
    np.testing.assert_array_equal(FemService.project_l2(disk, lambda x, y: x), disk.vertices[:, 0])
    field = FemService.project_l2(disk, lambda x, y: np.array([x, y]))
    np.testing.assert_array_equal(field, disk.vertices)


def test_weak_div_and_rot_of_linear_fields(disk_ops, disk):
    x, y = disk.vertices[:, 0], disk.vertices[:, 1]
    np.testing.assert_allclose(FemService.weak_div(disk_ops, np.column_stack([x, y])), 2.0, atol=1e-12)
    np.testing.assert_allclose(FemService.weak_rot(disk_ops, np.column_stack([-y, x])), 2.0, atol=1e-12)
    np.testing.assert_allclose(FemService.weak_rot(disk_ops, np.column_stack([x, y])), 0.0, atol=1e-12)


def test_lumped_norm_of_one_is_root_area(disk_ops, disk):
    assert FemService.lumped_norm(disk_ops, np.ones(disk.n_vertices)) \
        == pytest.approx(math.sqrt(disk.areas.sum()), rel=1e-12)
    assert FemService.lumped_norm(disk_ops, np.zeros(disk.n_vertices)) == 0.0


def test_trace_norm_of_one_is_root_perimeter(square_ops):
    assert FemService.trace_norm(square_ops, np.ones(square_ops.n)) == pytest.approx(2.0, rel=1e-13)
    assert FemService.trace_norm(square_ops, np.ones((square_ops.n, 2))) \
        == pytest.approx(2.0 * math.sqrt(2.0), rel=1e-13)


def test_dirichlet_masks(disk_ops, disk):
    assert disk_ops.free_dofs('w').size == disk.n_vertices - disk.boundary_vertices.size
    assert disk_ops.free_dofs('theta', 'neumann').size == disk.n_vertices
    assert disk_ops.free_dofs('theta', 'dirichlet').size == disk_ops.free_dofs('w').size
    assert disk_ops.free_dofs('q').size == 2 * disk.n_vertices
