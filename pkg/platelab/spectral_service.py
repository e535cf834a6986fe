"""Smallest eigenpairs of the clamped Laplacian, the penalized Stokes operator
and the Korn forms.

All eigensolves use ARPACK in shift-invert mode around zero, which is
inverse iteration with Krylov acceleration. The solenoidal constraint is
imposed by a penalty on the weak divergence, weighted by the inverse lumped
mass so that the penalty term approximates ||div u||^2.

On a polar disk mesh the fields v = a(ring, angle parity) e_theta form an
invariant subspace of every isotropic form, and each of them has exactly zero
weak divergence. The Stokes mode is then found inside that subspace.
"""
import logging
import math

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import jn_zeros

from platelab.config import Config
from platelab.exceptions import ConfigError, NoConvergence
from platelab.fem_service import FemService
from platelab.models import EigenResult, KornEstimates, State, StiffnessS

logger = logging.getLogger(__name__)

EIGEN_MODES = ('laplace', 'stokes', 'korn')


class SpectralService:
    """Service layer for eigenproblems and the constants derived from them"""

    @staticmethod
    def _extremal(A, B, which='smallest'):
        """One extremal generalized eigenpair of the symmetric pencil (A, B)"""
        n = A.shape[0]
        try:
            if which == 'smallest':
                lam, vec = spla.eigsh(A.tocsc(), k=1, M=B.tocsc(), sigma=0.0, which='LM',
                                      v0=np.ones(n), tol=Config.EIGEN_TOL)
            else:
                lam, vec = spla.eigsh(A.tocsc(), k=1, M=B.tocsc(), which='LA',
                                      v0=np.ones(n), tol=Config.EIGEN_TOL)
        except spla.ArpackNoConvergence:
            # ARPACK gives up after its default 10 n restarts
            raise NoConvergence(10 * n)
        x = vec[:, 0]
        x = x / math.sqrt(x @ (B @ x))
        if x[np.argmax(np.abs(x))] < 0:
            x = -x
        lam = float(x @ (A @ x))
        return lam, x

    @staticmethod
    def backward_error(A, B, lam, x):
        """Normwise backward error ||Ax - lam Bx|| / ((||A|| + |lam| ||B||) ||x||)"""
        scale = (spla.norm(A, 1) + abs(lam) * spla.norm(B, 1)) * np.linalg.norm(x)
        return float(np.linalg.norm(A @ x - lam * (B @ x)) / scale)

    @staticmethod
    def laplace_eigenmode(ops, m):
        """Smallest Dirichlet eigenpair of -Lap; the field is scalar and zero on the boundary"""
        interior = ops.free_dofs('w')
        A = FemService.restrict(ops.A_lap, interior)
        M = FemService.restrict(ops.M_scalar, interior)
        lam, x = SpectralService._extremal(A, M)
        field = np.zeros(ops.n)
        field[interior] = x
        result = EigenResult(lam=lam, field=field, residual=SpectralService.backward_error(A, M, lam, x),
                             h=m.h, mode='laplace')
        logger.info("Laplace lambda_1=%.8f on h=%.4f (backward error %.2e)", lam, m.h, result.residual)
        return result

    @staticmethod
    def penalized_stokes(ops, eps=Config.PENALTY_EPS):
        """A_veclap + (1/eps) B^T diag(1/lumped) B on the clamped vector space"""
        free = ops.free_dofs('v')
        A = FemService.restrict(ops.A_veclap, free)
        B = ops.B_div[:, free]
        penalty = (B.T @ sp.diags(1.0 / ops.lumped) @ B).tocsr()
        return (A + penalty / eps).tocsr(), free

    @staticmethod
    def solenoidal_eigenmode(ops, m, which='smallest', eps=Config.PENALTY_EPS):
        """Smallest eigenpair of the vector Dirichlet Laplacian on weakly divergence-free fields"""
        if which != 'smallest':
            raise ConfigError('which', f"only the smallest eigenpair is available, got {which!r}")
        A, free = SpectralService.penalized_stokes(ops, eps)
        M = FemService.restrict(ops.M_vec, free)
        if m.geometry_tag.get('mesh') == 'polar':
            lam, x = SpectralService._smallest_in_subspace(A, M, SpectralService.azimuthal_basis(m)[free])
        else:
            lam, x = SpectralService._extremal(A, M)

        flat = np.zeros(2 * ops.n)
        flat[free] = x
        field = flat.reshape(2, ops.n).T.copy()
        divergence = FemService.solve_mass(ops, ops.B_div @ flat)
        div_defect = FemService.l2_norm(ops, divergence) / FemService.h1_norm(ops, field)
        result = EigenResult(lam=lam, field=field, residual=SpectralService.backward_error(A, M, lam, x),
                             h=m.h, mode='stokes', div_defect=float(div_defect))
        logger.info("Stokes lambda_1=%.8f on h=%.4f (div defect %.2e)", lam, m.h, div_defect)
        return result

    @staticmethod
    def azimuthal_basis(m):
        """One column a * e_theta per (ring, angle parity) orbit of a polar mesh, blocked layout"""
        if m.rings is None:
            raise ConfigError('geometry.mesh', "the azimuthal basis needs a ring mesh")
        n = m.n_vertices
        p = m.vertices - m.centroid
        # the outer ring is clamped
        orbits = [np.asarray(ring[parity::2]) for ring in m.rings[:-1] for parity in (0, 1)]
        rows, cols, values = [], [], []
        for col, idx in enumerate(orbits):
            r = np.hypot(p[idx, 0], p[idx, 1])
            rows += [idx, idx + n]
            cols.append(np.full(2 * idx.size, col))
            values += [-p[idx, 1] / r, p[idx, 0] / r]
        return sp.csr_matrix((np.concatenate(values), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(2 * n, len(orbits)))

    @staticmethod
    def _smallest_in_subspace(A, B, Z):
        """Smallest eigenpair of (A, B) within the invariant subspace spanned by Z"""
        Z = sp.csr_matrix(Z)
        values, vectors = sla.eigh((Z.T @ A @ Z).toarray(), (Z.T @ B @ Z).toarray(), subset_by_index=[0, 0])
        x = Z @ vectors[:, 0]
        x = x / math.sqrt(x @ (B @ x))
        if x[np.argmax(np.abs(x))] < 0:
            x = -x
        return float(x @ (A @ x)), x

    @staticmethod
    def korn_constants(ops, m, S, K=1.0):
        """Korn and Poincare constants on the clamped space.

        c_k1, c_k2 bound <S Dv, Dv> against the full H1 norm of v; c_k bounds
        <S Dv, Dv> + K |grad w + v|^2 against the H1 norms of (w, v).
        """
        if not isinstance(S, StiffnessS):
            S = StiffnessS(entries=np.asarray(S, dtype=float))
        iw, iv = ops.free_dofs('w'), ops.free_dofs('v')
        r = FemService.restrict
        Ak = r(FemService.assemble_korn(m, S), iv)
        Mv, Av = r(ops.M_vec, iv), r(ops.A_veclap, iv)
        Mw, Aw = r(ops.M_scalar, iw), r(ops.A_lap, iw)
        G = r(ops.G_grad, iv, iw)

        c_k1, _ = SpectralService._extremal(Ak, Mv + Av)
        c_k2, _ = SpectralService._extremal(Ak, Mv + Av, which='largest')
        coupled = sp.bmat([[K * Aw, K * G.T], [K * G, Ak + K * Mv]], format='csr')
        norm = sp.block_diag([Mw + Aw, Mv + Av], format='csr')
        c_k, _ = SpectralService._extremal(coupled, norm)
        lam_1, _ = SpectralService._extremal(Aw, Mw)

        estimates = KornEstimates(c_k1=c_k1, c_k2=c_k2, c_k=c_k, c_p=1.0 / lam_1, h=m.h)
        logger.info("Korn constants on h=%.4f: %s", m.h, estimates.to_dict())
        return estimates

    @staticmethod
    def nondecay_initial_data(eig, p=None, amplitude=1.0):
        """v = amplitude * u*, every other field zero"""
        field = np.asarray(eig.field, dtype=float)
        if field.ndim != 2:
            raise ConfigError('eig', "needs a vector eigenfield from solenoidal_eigenmode")
        s = State.zeros(field.shape[0])
        s.v = amplitude * field
        return s

    @staticmethod
    def oracle_frequency(lam, p):
        """Frequency of v = cos(omega t) u* with rho2 omega^2 = lam Dflex (1 - mu)/2 + K"""
        return math.sqrt((lam * p.Dflex * (1.0 - p.mu) / 2.0 + p.K) / p.rho2) / (2.0 * math.pi)

    @staticmethod
    def richardson_extrapolate(hs, values, order=2):
        """h -> 0 limit from the two finest levels"""
        if len(hs) < 2:
            return float(values[-1])
        h1, h2 = hs[-2], hs[-1]
        v1, v2 = values[-2], values[-1]
        return float(v2 + (v2 - v1) / ((h1 / h2) ** order - 1.0))

    @staticmethod
    def reference_eigenvalue(geometry, mode):
        """Closed-form lambda_1 where one is known, else None"""
        kind = geometry['kind']
        if kind == 'rectangle' and mode == 'laplace':
            return math.pi ** 2 * (1.0 / geometry['lx'] ** 2 + 1.0 / geometry['ly'] ** 2)
        if kind == 'disk' and mode == 'laplace':
            return float(jn_zeros(0, 1)[0] ** 2 / geometry['radius'] ** 2)
        if kind == 'disk' and mode == 'stokes':
            # azimuthal J1 mode, divergence free with zero pressure
            return float(jn_zeros(1, 1)[0] ** 2 / geometry['radius'] ** 2)
        return None

    @staticmethod
    def eigen_refinement_study(geometry, mode, levels=None, p=None):
        """Solve on h, h/2, h/4, ... and extrapolate lambda_1"""
        from platelab.mesh_service import MeshService
        from platelab.params_service import ParamsService

        if mode not in EIGEN_MODES:
            raise ConfigError('mode', f"expected one of {EIGEN_MODES}, got {mode!r}")
        levels = levels or Config.EIGEN_LEVELS
        S = ParamsService.build_stiffness_S(p) if p is not None else StiffnessS(entries=np.diag([1.0, 1.0, 0.5]))
        K = p.K if p is not None else 1.0

        rows, hs, values = [], [], []
        for level in range(levels):
            h_target = geometry['h_target'] / 2 ** level
            mesh = MeshService.mesh_from_geometry(dict(geometry, h_target=h_target))
            ops = FemService.assemble(mesh, S)
            if mode == 'laplace':
                row = SpectralService.laplace_eigenmode(ops, mesh).to_dict()
            elif mode == 'stokes':
                row = SpectralService.solenoidal_eigenmode(ops, mesh).to_dict()
            else:
                korn = SpectralService.korn_constants(ops, mesh, S, K)
                row = dict(korn.to_dict(), **{'lambda': 1.0 / korn.c_p, 'mode': 'korn'})
            row['h_target'] = h_target
            rows.append(row)
            hs.append(h_target)
            values.append(row['lambda'])

        extrapolated = SpectralService.richardson_extrapolate(hs, values)
        reference = SpectralService.reference_eigenvalue(geometry, 'laplace' if mode == 'korn' else mode)
        report = {
            'mode': mode,
            'geometry': dict(geometry),
            'levels': rows,
            'lambda': values[-1],
            'residual': rows[-1].get('residual'),
            'h': rows[-1]['h'],
            'extrapolated': extrapolated,
            'reference': reference,
        }
        if reference:
            report['relative_error'] = abs(extrapolated - reference) / reference
        return report
