"""Right inverse of the divergence onto irrotational fields.

For a zero-mean load f the potentials (phi, psi) solve

    <grad phi + rot' psi, grad a + rot' b> = -<f, a>   for all P1 (a, b)

with rot' psi = (d2 psi, -d1 psi); then u = grad phi + rot' psi has
div u = f, rot u = 0 and, through the natural boundary conditions of both
potentials, vanishing trace. The discrete form is singular on the affine pairs
(1, 0), (0, 1), (x, -y), (y, x); the load is projected off that kernel and the
removed part is reported.

The piecewise-constant field is L2-projected onto clamped P1 fields, so the
returned u lies in H1_0. Its trace is therefore measured on the cell field,
and the residuals use the lumped weak divergence and rotation.
"""
import logging

import numpy as np
import scipy.sparse as sp

from platelab.config import Config, get_config
from platelab.exceptions import NonZeroMean
from platelab.fem_service import FemService
from platelab.initial_data_service import InitialDataService
from platelab.mesh_service import MeshService
from platelab.models import BogovskiiSolve

logger = logging.getLogger(__name__)


class BogovskiiSolver:
    """Assembled coupled potential system for one mesh; call it with a load f"""

    def __init__(self, ops, tol=Config.SOLVER_TOL):
        self.ops = ops
        self.tol = tol
        mesh = ops.mesh
        n = ops.n
        grads, area = FemService.element_gradients(mesh)
        gx, gy = grads[:, :, 0], grads[:, :, 1]
        # C[i, j] = int grad(phi_i) . rot'(phi_j)
        elem = area[:, None, None] * (gx[:, :, None] * gy[:, None, :] - gy[:, :, None] * gx[:, None, :])
        self.C = FemService._scatter(elem, mesh.triangles, mesh.triangles, (n, n))
        self.system = sp.bmat([[ops.A_lap, self.C], [self.C.T, ops.A_lap]], format='csr')

        x = mesh.vertices[:, 0] - mesh.centroid[0]
        y = mesh.vertices[:, 1] - mesh.centroid[1]
        one, zero = np.ones(n), np.zeros(n)
        kernel = np.column_stack([
            np.concatenate([one, zero]),
            np.concatenate([zero, one]),
            np.concatenate([x, -y]),
            np.concatenate([y, x]),
        ])
        self.kernel, _ = np.linalg.qr(kernel)

        self.interior = ops.free_dofs('w')
        self.mass_interior = FemService.restrict(ops.M_scalar, self.interior)
        edges = mesh.boundary_edges
        self.edge_lengths = np.linalg.norm(mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1)
        self.edge_cells = MeshService.boundary_cells(mesh)

    def __call__(self, f):
        return self.apply(f)

    def mean_defect(self, f):
        f = np.asarray(f, dtype=float)
        lumped = self.ops.lumped
        mean = float(lumped @ f / lumped.sum())
        scale = float(np.sqrt(lumped @ (f * f) / lumped.sum()))
        return mean, scale

    def potentials(self, f):
        """Solve for (phi, psi) and report the removed kernel part of the load"""
        ops = self.ops
        n = ops.n
        load = np.concatenate([-(ops.M_scalar @ f), np.zeros(n)])
        kernel_part = self.kernel @ (self.kernel.T @ load)
        load_norm = np.linalg.norm(load)
        kernel_defect = float(np.linalg.norm(kernel_part) / load_norm) if load_norm > 0 else 0.0
        solution, iterations = FemService.solve_spd(self.system, load - kernel_part, self.tol,
                                                    return_iterations=True)
        phi, psi = solution[:n], solution[n:]
        phi = phi - FemService.lumped_mean(ops, phi)
        psi = psi - FemService.lumped_mean(ops, psi)
        return phi, psi, kernel_defect, iterations

    def apply(self, f):
        """u = B_rot f with residual and trace diagnostics"""
        ops = self.ops
        f = np.asarray(f, dtype=float)
        mean, scale = self.mean_defect(f)
        if abs(mean) > Config.MEAN_TOLERANCE * max(scale, np.finfo(float).tiny):
            raise NonZeroMean(abs(mean))

        phi, psi, kernel_defect, iterations = self.potentials(f)
        u_cell = np.column_stack([ops.Dx_cell @ phi + ops.Dy_cell @ psi,
                                  ops.Dy_cell @ phi - ops.Dx_cell @ psi])
        u = np.zeros((ops.n, 2))
        for c in range(2):
            load = (ops.cell_load @ u_cell[:, c])[self.interior]
            u[self.interior, c] = FemService.solve_spd(self.mass_interior, load, self.tol)
        trace = u_cell[self.edge_cells]

        f_norm = FemService.l2_norm(ops, f)
        result = BogovskiiSolve(
            phi=phi,
            psi=psi,
            u=u,
            residual_div=FemService.lumped_norm(ops, FemService.weak_div(ops, u) - f),
            residual_rot=FemService.lumped_norm(ops, FemService.weak_rot(ops, u)),
            boundary_norm=float(np.sqrt(self.edge_lengths @ np.sum(trace * trace, axis=1))),
            kernel_defect=kernel_defect,
            cross_energy=float(2.0 * phi @ (self.C @ psi)),
            c_b=FemService.h1_norm(ops, u) / f_norm if f_norm > 0 else 0.0,
            iterations=iterations,
        )
        logger.debug("Bogovskii solve: %d CG iterations, div residual %.3e, rot residual %.3e",
                     iterations, result.residual_div, result.residual_rot)
        return result


class BogovskiiService:
    """Service layer for the Bogovskii operator and the appendix identities"""

    @staticmethod
    def bogovskii_apply(ops, m, f, solver=None):
        """B_rot f for a zero-mean nodal load f on mesh m"""
        solver = solver or BogovskiiSolver(ops)
        return solver.apply(f)

    @staticmethod
    def bogovskii_div_estimate_check(ops, m, u, solver=None):
        """||B_rot(div u)|| / ||u|| for a nodal field whose boundary values are zeroed"""
        u = np.array(u, dtype=float)
        u[m.boundary_vertices] = 0.0
        u_norm = FemService.l2_norm(ops, u)
        if u_norm == 0.0:
            return 0.0
        g = FemService.solve_mass(ops, ops.B_div @ FemService.flat(u))
        g = g - FemService.lumped_mean(ops, g)
        result = BogovskiiService.bogovskii_apply(ops, m, g, solver)
        return FemService.l2_norm(ops, result.u) / u_norm

    @staticmethod
    def gradient_identity_defect(ops, u):
        """| ||grad u||^2 - ||div u||^2 - ||rot u||^2 | for a clamped nodal field"""
        u = np.asarray(u, dtype=float)
        grad_sq = FemService.h1_seminorm(ops, u) ** 2
        return abs(grad_sq - FemService.div_norm(ops, u) ** 2 - FemService.rot_norm(ops, u) ** 2)

    @staticmethod
    def continuity_constant(ops, m, samples=None, seed=0, solver=None):
        """Largest ||B_rot f||_H1 / ||f|| over loads f = Lap(g) of random clamped potentials"""
        samples = samples or get_config().CONTINUITY_SAMPLES
        solver = solver or BogovskiiSolver(ops)
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(samples):
            _, _, lap = InitialDataService.clamped_potential(m, rng.normal(size=6))
            f = lap - FemService.lumped_mean(ops, lap)
            worst = max(worst, solver.apply(f).c_b)
        logger.info("Empirical continuity constant over %d samples: %.4f", samples, worst)
        return worst

    @staticmethod
    def div_estimate_constant(ops, m, samples=None, seed=0, solver=None):
        """Largest div-estimate ratio over random clamped irrotational fields"""
        samples = samples or get_config().RANDOM_SAMPLES
        solver = solver or BogovskiiSolver(ops)
        rng = np.random.default_rng(seed)
        ratios = []
        for _ in range(samples):
            _, grad, _ = InitialDataService.clamped_potential(m, rng.normal(size=6))
            ratios.append(BogovskiiService.bogovskii_div_estimate_check(ops, m, grad, solver))
        return max(ratios)

    @staticmethod
    def manufactured_pair(m):
        """u0 = grad(b^2) and f = div u0 for the boundary profile b of the mesh.

        On the unit disk b^2 = (1 - r^2)^2 and f = 16 r^2 - 8.
        """
        _, u0, f = InitialDataService.clamped_potential(m, (1.0, 0.0, 0.0, 0.0, 0.0, 0.0))
        return u0, f
