import math

import numpy as np
import pytest

from platelab.exceptions import ConfigError, DegenerateResolution
from platelab.mesh_service import MeshService


def test_rectangle_counts():
    mesh = MeshService.mesh_rectangle(2.0, 1.0, 0.25)
    assert mesh.n_vertices == 77
    assert mesh.n_triangles == 128
    assert mesh.boundary_vertices.size == 24
    assert mesh.h == pytest.approx(0.25)
    assert mesh.areas.sum() == pytest.approx(2.0, rel=1e-14)


def test_coarse_disk_area():
    mesh = MeshService.mesh_disk(1.0, 0.5)
    area = mesh.areas.sum()
    assert area < math.pi
    assert abs(area - math.pi) / math.pi < 0.1


@pytest.mark.parametrize('h', [0.3, 0.2, 0.1])
def test_disk_is_a_conforming_triangulation(h):
    mesh = MeshService.mesh_disk(1.0, h)
    assert np.all(mesh.areas > 0)
    assert mesh.h <= 1.5 * h

    edges, counts = MeshService.edges(mesh)
    assert set(np.unique(counts)) <= {1, 2}
    # simply connected: V - E + T = 1
    assert mesh.n_vertices - len(edges) + mesh.n_triangles == 1

    radii = MeshService.radial_coordinates(mesh)
    np.testing.assert_allclose(radii[mesh.boundary_vertices], 1.0, atol=1e-12)
    assert np.all(radii[mesh.interior_vertices] < 1.0 - 1e-6)


def test_disk_is_point_symmetric(disk):
    for ring in disk.rings:
        half = len(ring) // 2
        np.testing.assert_array_equal(disk.vertices[ring[half:]], -disk.vertices[ring[:half]])


def test_disk_area_converges():
    errors = [math.pi - MeshService.mesh_disk(1.0, h).areas.sum() for h in (0.2, 0.1)]
    assert 0 < errors[1] < errors[0] / 2


def test_rectangle_lumped_areas_sum_to_area(square):
    assert square.lumped_areas.sum() == pytest.approx(1.0, rel=1e-14)
    assert np.all(square.lumped_areas > 0)


def test_aspect_ratios(square, disk):
    # right isosceles triangles of the cut grid
    np.testing.assert_allclose(MeshService.aspect_ratios(square), (1.0 + math.sqrt(2.0)) / math.sqrt(3.0),
                               rtol=1e-12)
    assert np.all(MeshService.aspect_ratios(disk) >= 1.0 - 1e-12)
    assert np.all(np.isfinite(MeshService.aspect_ratios(disk)))


def test_radial_coordinate(disk, square):
    assert MeshService.radial_coordinate(disk, 0) == 0.0
    boundary = int(disk.boundary_vertices[0])
    assert MeshService.radial_coordinate(disk, boundary) == pytest.approx(1.0)
    corner = 0
    assert MeshService.radial_coordinate(square, corner) == pytest.approx(math.sqrt(0.5))


def test_radial_coordinate_out_of_range(disk):
    with pytest.raises(IndexError):
        MeshService.radial_coordinate(disk, disk.n_vertices)
    with pytest.raises(IndexError):
        MeshService.radial_coordinate(disk, -1)


def test_invalid_resolution():
    with pytest.raises(ConfigError):
        MeshService.mesh_disk(1.0, -0.1)
    with pytest.raises(ConfigError):
        MeshService.mesh_rectangle(1.0, 0.0, 0.1)
    with pytest.raises(DegenerateResolution):
        MeshService.mesh_disk(1.0, 1.0)


def test_boundary_edges_close_the_polygon(disk):
    edges = MeshService.boundary_edges(disk)
    assert len(edges) == disk.boundary_vertices.size
    lengths = np.linalg.norm(disk.vertices[edges[:, 0]] - disk.vertices[edges[:, 1]], axis=1)
    assert lengths.sum() == pytest.approx(2.0 * math.pi, rel=0.02)


def test_mesh_from_geometry():
    mesh = MeshService.mesh_from_geometry({'kind': 'rectangle', 'lx': 2.0, 'ly': 1.0, 'h_target': 0.25})
    assert mesh.kind == 'rectangle'
    assert mesh.to_dict()['n_vertices'] == 77


def test_polar_disk_is_a_conforming_triangulation():
    mesh = MeshService.mesh_disk_polar(1.0, 0.2)
    assert mesh.geometry_tag['mesh'] == 'polar'
    assert np.all(mesh.areas > 0)
    assert mesh.h <= 1.5 * 0.2
    edges, counts = MeshService.edges(mesh)
    assert set(np.unique(counts)) <= {1, 2}
    assert mesh.n_vertices - len(edges) + mesh.n_triangles == 1
    assert {len(ring) for ring in mesh.rings} == {2 * math.ceil(math.pi / 0.2)}
    radii = MeshService.radial_coordinates(mesh)
    np.testing.assert_allclose(radii[mesh.boundary_vertices], 1.0, atol=1e-12)


@pytest.mark.parametrize('axis', [0, 1])
def test_polar_disk_is_mirror_symmetric_about_vertex_lines(axis):
    mesh = MeshService.mesh_disk_polar(1.0, 0.25)
    count = len(mesh.rings[0])
    permutation = np.zeros(mesh.n_vertices, dtype=np.int64)
    for ring in mesh.rings:
        permutation[ring] = ring[(2 * axis - np.arange(count)) % count]

    angle = 2 * math.pi * axis / count
    normal = np.array([-math.sin(angle), math.cos(angle)])
    mirrored = mesh.vertices - 2.0 * np.outer(mesh.vertices @ normal, normal)
    np.testing.assert_allclose(mirrored, mesh.vertices[permutation], atol=1e-12)

    original = {tuple(t) for t in np.sort(mesh.triangles, axis=1)}
    image = {tuple(t) for t in np.sort(permutation[mesh.triangles], axis=1)}
    assert image == original


def test_boundary_cells_own_their_edges(disk):
    cells = MeshService.boundary_cells(disk)
    assert cells.shape == (len(disk.boundary_edges),)
    for edge, cell in zip(disk.boundary_edges, cells):
        assert set(edge) <= set(disk.triangles[cell])


def test_mesh_from_geometry_polar_variant():
    mesh = MeshService.mesh_from_geometry({'kind': 'disk', 'radius': 1.0, 'h_target': 0.25, 'mesh': 'polar'})
    assert mesh.geometry_tag['mesh'] == 'polar'
    assert 'mesh' not in MeshService.mesh_from_geometry({'kind': 'disk', 'radius': 1.0,
                                                         'h_target': 0.25}).geometry_tag
