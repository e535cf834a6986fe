"""P1 assembly of every bilinear form of the plate system and the sparse solvers.

All element matrices are built for every triangle at once from the constant
barycentric gradients, then scattered with a single COO -> CSR conversion,
which sums duplicate entries in triangle order.

Vector-valued unknowns use the blocked layout ``[x-components; y-components]``.
"""
import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from platelab.config import Config
from platelab.exceptions import NoConvergence
from platelab.models import AssembledOperators

logger = logging.getLogger(__name__)


class FemService:
    """Service layer for finite element assembly and linear algebra"""

    @staticmethod
    def element_gradients(mesh):
        """Barycentric gradients, shape (n_triangles, 3, 2), and signed areas"""
        p = mesh.vertices[mesh.triangles]
        x, y = p[:, :, 0], p[:, :, 1]
        area = mesh.areas
        grads = np.empty((mesh.n_triangles, 3, 2))
        grads[:, 0, 0] = y[:, 1] - y[:, 2]
        grads[:, 0, 1] = x[:, 2] - x[:, 1]
        grads[:, 1, 0] = y[:, 2] - y[:, 0]
        grads[:, 1, 1] = x[:, 0] - x[:, 2]
        grads[:, 2, 0] = y[:, 0] - y[:, 1]
        grads[:, 2, 1] = x[:, 1] - x[:, 0]
        grads /= (2.0 * area)[:, None, None]
        return grads, area

    @staticmethod
    def _scatter(elem, row_dofs, col_dofs, shape):
        """Sum local matrices (m, a, b) into a global CSR matrix"""
        m, a, b = elem.shape
        rows = np.repeat(row_dofs, b, axis=1)
        cols = np.tile(col_dofs, (1, a))
        return sp.coo_matrix((elem.reshape(m, a * b).ravel(), (rows.ravel(), cols.ravel())),
                             shape=shape).tocsr()

    @staticmethod
    def assemble_korn(mesh, S, grads=None, area=None):
        """<S Dv, Dw> with the generalized gradient D = [[d1, 0], [0, d2], [d2, d1]]"""
        if grads is None:
            grads, area = FemService.element_gradients(mesh)
        n = mesh.n_vertices
        t = mesh.triangles
        gx, gy = grads[:, :, 0], grads[:, :, 1]
        strain = np.zeros((mesh.n_triangles, 3, 6))
        strain[:, 0, 0:3] = gx
        strain[:, 2, 0:3] = gy
        strain[:, 1, 3:6] = gy
        strain[:, 2, 3:6] = gx
        S_entries = np.asarray(getattr(S, 'entries', S), dtype=float)
        elem = area[:, None, None] * np.einsum('mik,ij,mjl->mkl', strain, S_entries, strain)
        dofs = np.hstack([t, t + n])
        return FemService._scatter(elem, dofs, dofs, (2 * n, 2 * n))

    @staticmethod
    def assemble(m, S):
        """Assemble all operators of the weak formulation on mesh m"""
        grads, area = FemService.element_gradients(m)
        n, n_tri = m.n_vertices, m.n_triangles
        t = m.triangles

        mass_ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
        M = FemService._scatter(area[:, None, None] * mass_ref, t, t, (n, n))
        A = FemService._scatter(area[:, None, None] * np.einsum('mak,mbk->mab', grads, grads),
                                t, t, (n, n))

        # Gc[i, j] = int d_c(phi_j) phi_i
        Gx = FemService._scatter(np.broadcast_to((area / 3.0)[:, None, None] * grads[:, None, :, 0],
                                                 (n_tri, 3, 3)), t, t, (n, n))
        Gy = FemService._scatter(np.broadcast_to((area / 3.0)[:, None, None] * grads[:, None, :, 1],
                                                 (n_tri, 3, 3)), t, t, (n, n))

        A_korn = FemService.assemble_korn(m, S, grads, area)

        cells = np.repeat(np.arange(n_tri), 3)
        Dx = sp.csr_matrix((grads[:, :, 0].ravel(), (cells, t.ravel())), shape=(n_tri, n))
        Dy = sp.csr_matrix((grads[:, :, 1].ravel(), (cells, t.ravel())), shape=(n_tri, n))
        cell_load = sp.csr_matrix((np.repeat(area / 3.0, 3), (t.ravel(), cells)), shape=(n, n_tri))

        edges = m.boundary_edges
        lengths = np.linalg.norm(m.vertices[edges[:, 0]] - m.vertices[edges[:, 1]], axis=1)
        edge_ref = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
        M_boundary = FemService._scatter(lengths[:, None, None] * edge_ref, edges, edges, (n, n))

        boundary = m.boundary_mask
        dirichlet_mask = {
            'w': boundary.copy(),
            'v': np.concatenate([boundary, boundary]),
            'theta_neumann': np.zeros(n, dtype=bool),
            'theta_dirichlet': boundary.copy(),
            'q': np.zeros(2 * n, dtype=bool),
        }

        ops = AssembledOperators(
            mesh=m,
            S=S,
            M_scalar=M,
            M_vec=sp.block_diag([M, M], format='csr'),
            A_lap=A,
            A_veclap=sp.block_diag([A, A], format='csr'),
            A_korn=A_korn,
            G_grad=sp.vstack([Gx, Gy], format='csr'),
            B_div=sp.hstack([Gx, Gy], format='csr'),
            R_rot=sp.hstack([-Gy, Gx], format='csr'),
            M_boundary=M_boundary,
            Dx_cell=Dx,
            Dy_cell=Dy,
            cell_load=cell_load,
            lumped=np.asarray(M.sum(axis=1)).ravel(),
            dirichlet_mask=dirichlet_mask,
        )
        logger.info("Assembled operators on %d vertices (nnz A_korn=%d)", n, A_korn.nnz)
        return ops

    @staticmethod
    def restrict(A, rows, cols=None):
        """Submatrix on free unknowns (row/column elimination)"""
        cols = rows if cols is None else cols
        return A[rows][:, cols].tocsr()

    @staticmethod
    def solve_spd(A, b, tol=Config.SOLVER_TOL, maxiter=None, return_iterations=False):
        """Jacobi-preconditioned CG with ||Ax - b|| <= tol ||b||"""
        A = sp.csr_matrix(A)
        b = np.asarray(b, dtype=float)
        n = b.shape[0]
        if not np.any(b):
            x = np.zeros(n)
            return (x, 0) if return_iterations else x

        diag = A.diagonal()
        inv_diag = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)
        preconditioner = spla.LinearOperator((n, n), matvec=lambda r: inv_diag * r)
        maxiter = maxiter or Config.SOLVER_MAXITER_FACTOR * n
        iterations = [0]

        def count(_):
            iterations[0] += 1

        x, info = spla.cg(A, b, rtol=tol, atol=0.0, maxiter=maxiter, M=preconditioner, callback=count)
        residual = np.linalg.norm(A @ x - b) / np.linalg.norm(b)
        if info != 0:
            raise NoConvergence(iterations[0], residual)
        logger.debug("CG converged in %d iterations (relative residual %.2e)", iterations[0], residual)
        return (x, iterations[0]) if return_iterations else x

    @staticmethod
    def solve_mass(ops, b, vector=False, tol=Config.SOLVER_TOL):
        """Apply the inverse consistent mass matrix to a load vector"""
        if vector:
            b = np.asarray(b).reshape(2, -1) if np.ndim(b) == 1 else np.asarray(b).T
            return np.column_stack([FemService.solve_spd(ops.M_scalar, b[0], tol),
                                    FemService.solve_spd(ops.M_scalar, b[1], tol)])
        return FemService.solve_spd(ops.M_scalar, b, tol)

    @staticmethod
    def project_l2(m, f):
        """Nodal interpolant of f(x, y); vector-valued f gives an (n, 2) array"""
        x, y = m.vertices[:, 0], m.vertices[:, 1]
        values = np.asarray(f(x, y), dtype=float)
        if values.ndim == 0:
            return np.full(m.n_vertices, float(values))
        if values.shape == (2, m.n_vertices):
            return values.T.copy()
        return values.copy()

    # Norms with the assembled forms

    @staticmethod
    def flat(u):
        """(n, 2) nodal field -> blocked vector"""
        u = np.asarray(u, dtype=float)
        return u.T.ravel() if u.ndim == 2 else u

    @staticmethod
    def l2_norm(ops, u):
        """Consistent-mass L2 norm of a scalar or vector P1 field"""
        x = FemService.flat(u)
        M = ops.M_vec if x.size == 2 * ops.n else ops.M_scalar
        return float(np.sqrt(max(x @ (M @ x), 0.0)))

    @staticmethod
    def h1_seminorm(ops, u):
        x = FemService.flat(u)
        A = ops.A_veclap if x.size == 2 * ops.n else ops.A_lap
        return float(np.sqrt(max(x @ (A @ x), 0.0)))

    @staticmethod
    def h1_norm(ops, u):
        return float(np.hypot(FemService.l2_norm(ops, u), FemService.h1_seminorm(ops, u)))

    @staticmethod
    def cell_div(ops, u):
        u = np.asarray(u, dtype=float)
        return ops.Dx_cell @ u[:, 0] + ops.Dy_cell @ u[:, 1]

    @staticmethod
    def cell_rot(ops, u):
        u = np.asarray(u, dtype=float)
        return ops.Dx_cell @ u[:, 1] - ops.Dy_cell @ u[:, 0]

    @staticmethod
    def cell_l2_norm(ops, values):
        """L2 norm of a piecewise-constant field"""
        return float(np.sqrt(np.sum(ops.areas * np.asarray(values) ** 2)))

    @staticmethod
    def div_norm(ops, u):
        return FemService.cell_l2_norm(ops, FemService.cell_div(ops, u))

    @staticmethod
    def rot_norm(ops, u):
        return FemService.cell_l2_norm(ops, FemService.cell_rot(ops, u))

    @staticmethod
    def trace_norm(ops, u):
        """L2 norm on the boundary polygon of a scalar or (n, 2) field"""
        u = np.asarray(u, dtype=float)
        cols = u.T if u.ndim == 2 else u[None, :]
        return float(np.sqrt(max(sum(c @ (ops.M_boundary @ c) for c in cols), 0.0)))

    @staticmethod
    def lumped_norm(ops, f):
        """sqrt(sum_i m_i f_i^2) with the lumped vertex masses m_i"""
        f = np.asarray(f, dtype=float)
        return float(np.sqrt(ops.lumped @ (f * f)))

    @staticmethod
    def weak_div(ops, u):
        """Nodal divergence (B_div u)_i / m_i; for clamped u a patch average of the cell divergences"""
        return (ops.B_div @ FemService.flat(u)) / ops.lumped

    @staticmethod
    def weak_rot(ops, u):
        return (ops.R_rot @ FemService.flat(u)) / ops.lumped

    @staticmethod
    def lumped_mean(ops, f):
        return float(ops.lumped @ np.asarray(f, dtype=float) / ops.lumped.sum())

    @staticmethod
    def named_matrices(ops):
        """Named matrices for the COO debug dump"""
        return {
            'M_scalar': ops.M_scalar, 'A_lap': ops.A_lap, 'A_korn': ops.A_korn,
            'G_grad': ops.G_grad, 'B_div': ops.B_div, 'R_rot': ops.R_rot,
        }
