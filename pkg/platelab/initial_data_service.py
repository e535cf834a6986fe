"""Initial-condition presets.

Radial fields are functions of r = |x - centroid| only and vector fields
have the form f(r) e_r. Every preset vanishes exactly on the clamped
boundary nodes for w, v and their velocities.
"""
import logging

import numpy as np

from platelab.exceptions import ConfigError, GeometryMismatch, MissingEigenmode
from platelab.models import State

logger = logging.getLogger(__name__)


class InitialDataService:
    """Service layer for initial data"""

    @staticmethod
    def mean_zero_project(theta, m):
        """theta minus its lumped mean"""
        theta = np.asarray(theta, dtype=float)
        lumped = m.lumped_areas
        return theta - float(lumped @ theta / lumped.sum())

    @staticmethod
    def _local_coordinates(m):
        x = m.vertices[:, 0] - m.centroid[0]
        y = m.vertices[:, 1] - m.centroid[1]
        if m.kind == 'disk':
            scale = m.geometry_tag['radius']
        else:
            scale = 0.5 * max(m.geometry_tag['lx'], m.geometry_tag['ly'])
        return x, y, scale

    @staticmethod
    def boundary_profile(m):
        """b with b = 0 on the boundary, max 1, and its gradient and Laplacian"""
        x, y, _ = InitialDataService._local_coordinates(m)
        if m.kind == 'disk':
            r2 = m.geometry_tag['radius'] ** 2
            b = 1.0 - (x * x + y * y) / r2
            grad = np.column_stack([-2.0 * x / r2, -2.0 * y / r2])
            lap = np.full(m.n_vertices, -4.0 / r2)
        else:
            lx, ly = m.geometry_tag['lx'], m.geometry_tag['ly']
            X, Y = m.vertices[:, 0], m.vertices[:, 1]
            c = 16.0 / (lx * lx * ly * ly)
            bx, by = X * (lx - X), Y * (ly - Y)
            b = c * bx * by
            grad = np.column_stack([c * (lx - 2.0 * X) * by, c * bx * (ly - 2.0 * Y)])
            lap = -2.0 * c * (bx + by)
        b[m.boundary_vertices] = 0.0
        return b, grad, lap

    @staticmethod
    def _quadratic(m, coeffs):
        """p = c0 + c1 X + c2 Y + c3 X^2 + c4 XY + c5 Y^2 in scaled local coordinates"""
        x, y, scale = InitialDataService._local_coordinates(m)
        X, Y = x / scale, y / scale
        c0, c1, c2, c3, c4, c5 = coeffs
        p = c0 + c1 * X + c2 * Y + c3 * X * X + c4 * X * Y + c5 * Y * Y
        grad = np.column_stack([c1 + 2.0 * c3 * X + c4 * Y, c2 + c4 * X + 2.0 * c5 * Y]) / scale
        lap = np.full(m.n_vertices, 2.0 * (c3 + c5) / scale ** 2)
        return p, grad, lap

    @staticmethod
    def clamped_potential(m, coeffs):
        """g = b^2 p with grad g and Lap g in closed form.

        grad g vanishes on the boundary, so grad g is a clamped irrotational
        field whose divergence is exactly Lap g.
        """
        b, grad_b, lap_b = InitialDataService.boundary_profile(m)
        p, grad_p, lap_p = InitialDataService._quadratic(m, coeffs)
        a = b * b
        grad_a = 2.0 * b[:, None] * grad_b
        lap_a = 2.0 * np.sum(grad_b * grad_b, axis=1) + 2.0 * b * lap_b
        g = a * p
        grad = p[:, None] * grad_a + a[:, None] * grad_p
        lap = p * lap_a + 2.0 * np.sum(grad_a * grad_p, axis=1) + a * lap_p
        grad[m.boundary_vertices] = 0.0
        return g, grad, lap

    @staticmethod
    def build_initial(preset, m, eig=None, thermal_bc='neumann', p=None):
        """State for one InitialPreset on mesh m"""
        builders = {
            'zero': lambda: State.zeros(m.n_vertices),
            'radial-gaussian': lambda: InitialDataService._radial_gaussian(preset, m, thermal_bc),
            'solenoidal-eigenmode': lambda: InitialDataService._eigenmode(preset, eig, p),
            'random-clamped': lambda: InitialDataService._random_clamped(preset, m, thermal_bc),
            'custom': lambda: InitialDataService._custom(preset, m, thermal_bc),
        }
        s = builders[preset.kind]()
        logger.info("Built %s initial data (amplitude %g)", preset.kind, preset.amplitude)
        return s

    @staticmethod
    def _clamp(s, m, thermal_bc):
        boundary = m.boundary_vertices
        for values in (s.w, s.v, s.wt, s.vt):
            values[boundary] = 0.0
        if thermal_bc == 'dirichlet':
            s.theta[boundary] = 0.0
        else:
            s.theta = InitialDataService.mean_zero_project(s.theta, m)
        return s

    @staticmethod
    def _radial_gaussian(preset, m, thermal_bc):
        if m.kind != 'disk':
            raise GeometryMismatch('disk', m.kind)
        x, y, radius = InitialDataService._local_coordinates(m)
        r2 = x * x + y * y
        g = preset.amplitude * np.exp(-r2 / (2.0 * preset.width ** 2))
        clamp = 1.0 - r2 / radius ** 2
        radial = np.column_stack([x, y])

        s = State.zeros(m.n_vertices)
        s.w = g * clamp
        s.v = (g * clamp)[:, None] * radial
        s.theta = g * clamp if thermal_bc == 'dirichlet' else g.copy()
        s.q = (g * clamp)[:, None] * radial
        return InitialDataService._clamp(s, m, thermal_bc)

    @staticmethod
    def _eigenmode(preset, eig, p):
        if eig is None:
            raise MissingEigenmode()
        from platelab.spectral_service import SpectralService
        return SpectralService.nondecay_initial_data(eig, p, preset.amplitude)

    @staticmethod
    def _random_clamped(preset, m, thermal_bc):
        rng = np.random.default_rng(preset.seed)
        b, _, _ = InitialDataService.boundary_profile(m)
        field = lambda: InitialDataService._quadratic(m, rng.normal(size=6))[0]

        s = State.zeros(m.n_vertices)
        s.w = b * field()
        s.v = np.column_stack([b * field(), b * field()])
        s.wt = b * field()
        s.vt = np.column_stack([b * field(), b * field()])
        s.theta = b * field() if thermal_bc == 'dirichlet' else field()
        s.q = np.column_stack([field(), field()])
        s = s.scaled(preset.amplitude)
        return InitialDataService._clamp(s, m, thermal_bc)

    @staticmethod
    def _custom(preset, m, thermal_bc):
        from platelab.export_service import ExportService

        fields = ExportService.read_nodal_fields(preset.path)
        s = State.zeros(m.n_vertices)
        for name, values in fields.items():
            if values.shape[0] != m.n_vertices:
                raise ConfigError('ic.path', f"field {name} has {values.shape[0]} values, "
                                             f"mesh has {m.n_vertices} vertices")
            base, _, component = name.partition('_')
            if base in ('w', 'wt', 'theta') and not component:
                setattr(s, base, preset.amplitude * values)
            elif base in ('v', 'vt', 'q') and component in ('x', 'y'):
                getattr(s, base)[:, 'xy'.index(component)] = preset.amplitude * values
            else:
                raise ConfigError('ic.path', f"unknown field {name!r}")
        return InitialDataService._clamp(s, m, thermal_bc)
