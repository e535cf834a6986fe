"""Triangulations of the disk and of axis-aligned rectangles.

Both generators are deterministic. The disk is built from concentric rings
with an even vertex count per ring; the second half of every ring is the
exact negation of the first half and the ring-to-ring strips are triangulated
by the same integer rule in both halves, so the mesh is symmetric under the
point reflection x -> -x. The polar variant puts the same 2k angles on every
ring and alternates the strip diagonals, which makes reflection in every line
through the centre and a vertex a symmetry of the mesh.
"""
import logging
import math

import numpy as np

from platelab.exceptions import ConfigError, DegenerateResolution
from platelab.models import Mesh

logger = logging.getLogger(__name__)

MAX_REFINE_ATTEMPTS = 8


class MeshService:
    """Service layer for mesh generation and queries"""

    @staticmethod
    def mesh_disk(radius, h_target):
        """Ring mesh of the disk of given radius centred at the origin"""
        MeshService._check_positive(radius=radius, h_target=h_target)
        if h_target >= radius:
            raise DegenerateResolution(f"h_target={h_target} must be smaller than radius={radius}")

        n_rings = math.ceil(radius / h_target)
        for _ in range(MAX_REFINE_ATTEMPTS):
            mesh = MeshService._build_disk(radius, n_rings, h_target)
            if mesh.h <= 1.5 * h_target:
                break
            logger.debug("disk mesh h=%.4f too coarse, adding a ring", mesh.h)
            n_rings += 1
        logger.info("Built disk mesh: %d vertices, %d triangles, h=%.4f",
                    mesh.n_vertices, mesh.n_triangles, mesh.h)
        return mesh

    @staticmethod
    def _ring_counts(radius, n_rings, h_target):
        # even counts keep every ring symmetric under x -> -x
        return [2 * max(3, round(math.pi * k * radius / (n_rings * h_target)))
                for k in range(1, n_rings + 1)]

    @staticmethod
    def _build_disk(radius, n_rings, h_target):
        counts = MeshService._ring_counts(radius, n_rings, h_target)
        dr = radius / n_rings

        points = [np.zeros((1, 2))]
        rings = []
        offset = 1
        for k, count in enumerate(counts, start=1):
            r = radius if k == n_rings else k * dr
            half = count // 2
            angles = 2.0 * np.pi * np.arange(half) / count
            first = np.column_stack([r * np.cos(angles), r * np.sin(angles)])
            points.append(np.vstack([first, -first]))
            rings.append(np.arange(offset, offset + count))
            offset += count
        vertices = np.vstack(points)

        triangles = [(0, int(rings[0][j]), int(rings[0][(j + 1) % counts[0]]))
                     for j in range(counts[0])]
        for inner, outer in zip(rings[:-1], rings[1:]):
            triangles.extend(MeshService._zip_rings(inner, outer))

        triangles = MeshService._orient_ccw(vertices, np.array(triangles, dtype=np.int64))
        return MeshService._finish(vertices, triangles, {'kind': 'disk', 'radius': float(radius)},
                                   centroid=np.zeros(2), rings=rings)

    @staticmethod
    def _zip_rings(inner, outer):
        """Strip between two rings, built on one half and copied to the other"""
        n_in, n_out = len(inner), len(outer)
        half_in, half_out = n_in // 2, n_out // 2
        half = []
        i = o = 0
        while i < half_in or o < half_out:
            if o == half_out:
                advance_inner = True
            elif i == half_in:
                advance_inner = False
            else:
                # compare (i+1)/n_in with (o+1)/n_out exactly
                advance_inner = (i + 1) * n_out <= (o + 1) * n_in
            if advance_inner:
                half.append((i, i + 1, None, o))
                i += 1
            else:
                half.append((i, None, o + 1, o))
                o += 1

        triangles = []
        for shift_in, shift_out in ((0, 0), (half_in, half_out)):
            for a, a_next, b_next, b in half:
                if a_next is not None:
                    tri = (inner[(a + shift_in) % n_in], inner[(a_next + shift_in) % n_in],
                           outer[(b + shift_out) % n_out])
                else:
                    tri = (inner[(a + shift_in) % n_in], outer[(b_next + shift_out) % n_out],
                           outer[(b + shift_out) % n_out])
                triangles.append(tuple(int(x) for x in tri))
        return triangles

    @staticmethod
    def mesh_disk_polar(radius, h_target):
        """Dihedrally symmetric disk mesh with 2k vertices on every ring"""
        MeshService._check_positive(radius=radius, h_target=h_target)
        if h_target >= radius:
            raise DegenerateResolution(f"h_target={h_target} must be smaller than radius={radius}")

        n_rings = math.ceil(radius / h_target)
        k = max(3, math.ceil(math.pi * radius / h_target))
        count = 2 * k
        angles = np.pi * np.arange(count) / k
        radii = radius * np.arange(1, n_rings + 1) / n_rings
        ring_points = radii[:, None, None] * np.stack([np.cos(angles), np.sin(angles)], axis=1)[None]
        vertices = np.vstack([np.zeros((1, 2)), ring_points.reshape(-1, 2)])
        rings = [1 + i * count + np.arange(count) for i in range(n_rings)]

        j = np.arange(count)
        nxt = (j + 1) % count
        first = rings[0]
        triangles = [np.column_stack([np.zeros(count, dtype=np.int64), first[j], first[nxt]])]
        even = j % 2 == 0
        for inner, outer in zip(rings[:-1], rings[1:]):
            a, b, c, d = inner[j], inner[nxt], outer[j], outer[nxt]
            # even quads are cut along a-d, odd ones along b-c
            triangles.append(np.where(even[:, None], np.column_stack([a, b, d]), np.column_stack([a, b, c])))
            triangles.append(np.where(even[:, None], np.column_stack([a, d, c]), np.column_stack([b, d, c])))

        triangles = MeshService._orient_ccw(vertices, np.vstack(triangles).astype(np.int64))
        tag = {'kind': 'disk', 'radius': float(radius), 'mesh': 'polar'}
        mesh = MeshService._finish(vertices, triangles, tag, centroid=np.zeros(2), rings=rings)
        logger.info("Built polar disk mesh: %d vertices, %d triangles, h=%.4f",
                    mesh.n_vertices, mesh.n_triangles, mesh.h)
        return mesh

    @staticmethod
    def mesh_rectangle(lx, ly, h_target):
        """Uniform grid on [0, lx] x [0, ly], each cell cut into 4 by its centre"""
        MeshService._check_positive(lx=lx, ly=ly, h_target=h_target)
        nx = math.ceil(lx / h_target)
        ny = math.ceil(ly / h_target)
        xs = np.linspace(0.0, lx, nx + 1)
        ys = np.linspace(0.0, ly, ny + 1)
        gx, gy = np.meshgrid(xs, ys, indexing='ij')
        corners = np.column_stack([gx.ravel(), gy.ravel()])
        cx = 0.5 * (xs[:-1] + xs[1:])
        cy = 0.5 * (ys[:-1] + ys[1:])
        mx, my = np.meshgrid(cx, cy, indexing='ij')
        centres = np.column_stack([mx.ravel(), my.ravel()])
        vertices = np.vstack([corners, centres])

        node = lambda i, j: i * (ny + 1) + j
        ci, cj = np.meshgrid(np.arange(nx), np.arange(ny), indexing='ij')
        ci, cj = ci.ravel(), cj.ravel()
        c = corners.shape[0] + ci * ny + cj
        sw, se = node(ci, cj), node(ci + 1, cj)
        ne, nw = node(ci + 1, cj + 1), node(ci, cj + 1)
        triangles = np.vstack([
            np.column_stack([sw, se, c]),
            np.column_stack([se, ne, c]),
            np.column_stack([ne, nw, c]),
            np.column_stack([nw, sw, c]),
        ]).astype(np.int64)

        tag = {'kind': 'rectangle', 'lx': float(lx), 'ly': float(ly)}
        mesh = MeshService._finish(vertices, triangles, tag, centroid=np.array([0.5 * lx, 0.5 * ly]))
        logger.info("Built rectangle mesh: %d vertices, %d triangles, h=%.4f",
                    mesh.n_vertices, mesh.n_triangles, mesh.h)
        return mesh

    @staticmethod
    def mesh_from_geometry(geometry):
        """Dispatch on a RunConfig geometry block"""
        if geometry['kind'] == 'disk':
            if geometry.get('mesh', 'rings') == 'polar':
                return MeshService.mesh_disk_polar(geometry['radius'], geometry['h_target'])
            return MeshService.mesh_disk(geometry['radius'], geometry['h_target'])
        return MeshService.mesh_rectangle(geometry['lx'], geometry['ly'], geometry['h_target'])

    @staticmethod
    def radial_coordinate(m, vertex):
        """Distance of one vertex from the domain centroid"""
        if isinstance(vertex, (bool, np.bool_)) or not 0 <= int(vertex) < m.n_vertices:
            raise IndexError(f"vertex {vertex} out of range 0..{m.n_vertices - 1}")
        return float(np.hypot(*(m.vertices[int(vertex)] - m.centroid)))

    @staticmethod
    def radial_coordinates(m):
        return np.hypot(m.vertices[:, 0] - m.centroid[0], m.vertices[:, 1] - m.centroid[1])

    @staticmethod
    def edges(m):
        """Unique undirected edges and the number of triangles sharing each"""
        return MeshService._edge_counts(m.triangles)

    @staticmethod
    def boundary_edges(m):
        return m.boundary_edges

    @staticmethod
    def boundary_cells(m):
        """Index of the triangle that owns each row of m.boundary_edges"""
        n = m.n_vertices
        local = np.sort(m.triangles[:, [[0, 1], [1, 2], [2, 0]]], axis=2)
        keys = (local[..., 0] * n + local[..., 1]).ravel()
        owners = np.repeat(np.arange(m.n_triangles), 3)
        order = np.argsort(keys, kind='stable')
        wanted = m.boundary_edges[:, 0] * n + m.boundary_edges[:, 1]
        return owners[order[np.searchsorted(keys[order], wanted)]]

    @staticmethod
    def aspect_ratios(m):
        """Longest edge over 2*sqrt(3)*inradius; 1 for equilateral triangles"""
        p = m.vertices[m.triangles]
        lengths = np.linalg.norm(p[:, [1, 2, 0]] - p, axis=2)
        inradius = 2.0 * m.areas / lengths.sum(axis=1)
        return lengths.max(axis=1) / (2.0 * math.sqrt(3.0) * inradius)

    @staticmethod
    def _finish(vertices, triangles, tag, centroid, rings=None):
        """Tag boundary and measure h from the actual edges"""
        edges, counts = MeshService._edge_counts(triangles)
        boundary_edges = edges[counts == 1]
        boundary_vertices = np.unique(boundary_edges)
        lengths = np.linalg.norm(vertices[edges[:, 0]] - vertices[edges[:, 1]], axis=1)
        return Mesh(vertices=vertices, triangles=triangles, boundary_vertices=boundary_vertices,
                    h=float(lengths.max()), geometry_tag=tag, centroid=np.asarray(centroid, float),
                    boundary_edges=boundary_edges, rings=rings)

    @staticmethod
    def _edge_counts(triangles):
        all_edges = np.vstack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
        all_edges = np.sort(all_edges, axis=1)
        return np.unique(all_edges, axis=0, return_counts=True)

    @staticmethod
    def _orient_ccw(vertices, triangles):
        p = vertices[triangles]
        signed = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
        flipped = triangles.copy()
        flipped[signed < 0] = flipped[signed < 0][:, [0, 2, 1]]
        return flipped

    @staticmethod
    def _check_positive(**values):
        for name, value in values.items():
            if isinstance(value, bool) or not isinstance(value, (int, float, np.floating)) \
                    or not math.isfinite(value) or value <= 0:
                raise ConfigError(name, f"must be positive, got {value!r}")
