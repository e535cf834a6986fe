"""Implicit midpoint time stepping of the damped plate system.

The semi-discrete system is written for y = (w, v) and z = (w_t, v_t, theta, q)
on the free unknowns only:

    y' = Pi z
    Mz z' = -Pi^T P y - Damp z + C z

with Mz the block mass, P the elastic potential matrix, Damp the
dissipation blocks and C the skew thermal coupling. The energy
1/2 (y.P y + z.Mz z) then changes exactly by -dt * (midpoint dissipation)
under the midpoint rule, independent of the linear solver backend up to its
tolerance.

Eliminating y^+ = y + dt/2 Pi (z^+ + z) leaves one system for s = z^+ + z:

    [Mz + dt^2/4 Pi^T P Pi + dt/2 Damp - dt/2 C] s = 2 Mz z - dt Pi^T P y
"""
import logging
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from platelab.config import Config
from platelab.exceptions import ConfigError, NoConvergence
from platelab.fem_service import FemService
from platelab.models import DISSIPATION_KEYS, ENERGY_KEYS, LyapunovConfig, State, StepReport, TimeSeries
from platelab.params_service import ParamsService

logger = logging.getLogger(__name__)

BACKENDS = ('splu', 'minres', 'gmres')


class PlateSystem:
    """Reduced block matrices of the plate system for one (ops, params, thermal BC)"""

    def __init__(self, ops, p, thermal_bc='neumann', backend=None, tol=Config.SOLVER_TOL):
        if thermal_bc not in ('neumann', 'dirichlet'):
            raise ConfigError('thermal_bc', f"unknown thermal boundary condition {thermal_bc!r}")
        backend = backend or Config.STEP_BACKEND
        if backend not in BACKENDS:
            raise ConfigError('step_backend', f"unknown backend {backend!r}")
        self.ops = ops
        self.p = p
        self.thermal_bc = thermal_bc
        self.backend = backend
        self.tol = tol
        self._solvers = {}

        n = ops.n
        self.idx_w = ops.free_dofs('w')
        self.idx_v = ops.free_dofs('v')
        self.idx_theta = ops.free_dofs('theta', thermal_bc)
        self.idx_q = ops.free_dofs('q')
        self.n = n
        r = FemService.restrict

        Mw = r(ops.M_scalar, self.idx_w)
        Aw = r(ops.A_lap, self.idx_w)
        Mv = r(ops.M_vec, self.idx_v)
        Ak = r(ops.A_korn, self.idx_v)
        G = r(ops.G_grad, self.idx_v, self.idx_w)
        Mt = r(ops.M_scalar, self.idx_theta)
        Gt = r(ops.G_grad, self.idx_v, self.idx_theta)
        Mq = ops.M_vec
        Gq = r(ops.G_grad, self.idx_q, self.idx_theta)
        Dd = r(sp.kron(sp.csr_matrix(p.Ddamp), ops.M_scalar, format='csr'), self.idx_v)

        self.blocks = {'Mw': Mw, 'Aw': Aw, 'Mv': Mv, 'Ak': Ak, 'G': G, 'Mt': Mt, 'Mq': Mq, 'Dd': Dd}

        K = p.K
        self.P = sp.bmat([[K * Aw, K * G.T], [K * G, Ak + K * Mv]], format='csr')
        self.Mz = sp.block_diag([p.rho1 * Mw, p.rho2 * Mv, p.rho3 * Mt, p.tau0 * Mq], format='csr')
        self.Damp = sp.block_diag([p.d * Mw, Dd, p.beta * Mt, p.delta * Mq], format='csr')
        self.sizes = (self.idx_w.size, self.idx_v.size, self.idx_theta.size, self.idx_q.size)
        self.ny = self.sizes[0] + self.sizes[1]
        self.nz = sum(self.sizes)
        self.C = self._padded_coupling(p, Gt, Gq)

    def _padded_coupling(self, p, Gt, Gq):
        nw, nv, nt, nq = self.sizes
        Z = lambda a, b: sp.csr_matrix((a, b))
        return sp.bmat([
            [Z(nw, nw), Z(nw, nv), Z(nw, nt), Z(nw, nq)],
            [Z(nv, nw), Z(nv, nv), -p.gamma * Gt, Z(nv, nq)],
            [Z(nt, nw), p.gamma * Gt.T, Z(nt, nt), p.kappa * Gq.T],
            [Z(nq, nw), Z(nq, nv), -p.kappa * Gq, Z(nq, nq)],
        ], format='csr')

    # packing

    def pack(self, s):
        """Full nodal State -> reduced (y, z)"""
        flat = FemService.flat
        y = np.concatenate([s.w[self.idx_w], flat(s.v)[self.idx_v]])
        z = np.concatenate([s.wt[self.idx_w], flat(s.vt)[self.idx_v],
                            s.theta[self.idx_theta], flat(s.q)[self.idx_q]])
        return y, z

    def unpack(self, y, z):
        """Reduced (y, z) -> full nodal State with zeros on constrained nodes"""
        n = self.n
        nw, nv, nt, nq = self.sizes
        s = State.zeros(n)
        s.w[self.idx_w] = y[:nw]
        s.wt[self.idx_w] = z[:nw]
        s.theta[self.idx_theta] = z[nw + nv:nw + nv + nt]

        def vec(values, idx, size):
            flat = np.zeros(size)
            flat[idx] = values
            return flat.reshape(2, n).T.copy()

        s.v = vec(y[nw:], self.idx_v, 2 * n)
        s.vt = vec(z[nw:nw + nv], self.idx_v, 2 * n)
        s.q = vec(z[nw + nv + nt:], self.idx_q, 2 * n)
        return s

    def split(self, z):
        nw, nv, nt, _ = self.sizes
        return z[:nw], z[nw:nw + nv], z[nw + nv:nw + nv + nt], z[nw + nv + nt:]

    # energy and dissipation

    def energy_parts(self, y, z):
        p, b = self.p, self.blocks
        nw = self.sizes[0]
        w, v = y[:nw], y[nw:]
        wt, vt, theta, q = self.split(z)
        shear = w @ (b['Aw'] @ w) + 2.0 * v @ (b['G'] @ w) + v @ (b['Mv'] @ v)
        values = (
            0.5 * p.rho1 * wt @ (b['Mw'] @ wt),
            0.5 * p.rho2 * vt @ (b['Mv'] @ vt),
            0.5 * v @ (b['Ak'] @ v),
            0.5 * p.K * shear,
            0.5 * p.rho3 * theta @ (b['Mt'] @ theta),
            0.5 * p.tau0 * q @ (b['Mq'] @ q),
        )
        return dict(zip(ENERGY_KEYS, (float(x) for x in values)))

    def dissipation_parts(self, z):
        p, b = self.p, self.blocks
        wt, vt, theta, q = self.split(z)
        values = (
            p.d * wt @ (b['Mw'] @ wt),
            vt @ (b['Dd'] @ vt),
            p.beta * theta @ (b['Mt'] @ theta),
            p.delta * q @ (b['Mq'] @ q),
        )
        return dict(zip(DISSIPATION_KEYS, (float(x) for x in values)))

    def weak_force(self, y, z):
        """(Pi z, -Pi^T P y - Damp z + C z): the generator before mass inversion"""
        force = -self.Damp @ z + self.C @ z
        force[:self.ny] -= self.P @ y
        return z[:self.ny].copy(), force

    # stepping

    def _solver(self, dt):
        key = float(dt)
        if key in self._solvers:
            return self._solvers[key]
        Q = sp.block_diag([self.P, sp.csr_matrix((self.nz - self.ny, self.nz - self.ny))], format='csr')
        system = (self.Mz + (dt * dt / 4.0) * Q + (dt / 2.0) * self.Damp - (dt / 2.0) * self.C).tocsc()
        if self.backend == 'splu':
            lu = spla.splu(system)
            solve = lambda rhs: (lu.solve(rhs), 1)
        elif self.backend == 'minres':
            solve = self._minres_solver(system)
        else:
            solve = self._gmres_solver(system)
        self._solvers[key] = solve
        logger.debug("Prepared %s step solver for dt=%.6g (size %d)", self.backend, dt, self.nz)
        return solve

    def _minres_solver(self, system):
        # negating the theta rows makes the system symmetric (indefinite)
        nw, nv, nt, nq = self.sizes
        sign = np.ones(self.nz)
        sign[nw + nv:nw + nv + nt] = -1.0
        J = sp.diags(sign)
        sym = (J @ system).tocsr()
        diag = np.abs(sym.diagonal())
        inv_diag = 1.0 / np.where(diag > 0, diag, 1.0)
        precond = spla.LinearOperator(sym.shape, matvec=lambda r: inv_diag * r)

        def solve(rhs):
            count = [0]
            x, info = spla.minres(sym, sign * rhs, M=precond, rtol=self.tol,
                                  maxiter=Config.SOLVER_MAXITER_FACTOR * self.nz,
                                  callback=lambda _: count.__setitem__(0, count[0] + 1))
            if info != 0:
                raise NoConvergence(count[0])
            return x, count[0]
        return solve

    def _gmres_solver(self, system):
        system = system.tocsr()
        diag = system.diagonal()
        inv_diag = 1.0 / np.where(np.abs(diag) > 0, diag, 1.0)
        precond = spla.LinearOperator(system.shape, matvec=lambda r: inv_diag * r)

        def solve(rhs):
            count = [0]
            x, info = spla.gmres(system, rhs, M=precond, rtol=self.tol, restart=Config.GMRES_RESTART,
                                 maxiter=Config.SOLVER_MAXITER_FACTOR * self.nz,
                                 callback=lambda _: count.__setitem__(0, count[0] + 1),
                                 callback_type='pr_norm')
            if info != 0:
                raise NoConvergence(count[0])
            return x, count[0]
        return solve

    def advance(self, y, z, dt):
        """One midpoint step; dt may be negative (time reversal)"""
        rhs = 2.0 * (self.Mz @ z)
        rhs[:self.ny] -= dt * (self.P @ y)
        s, iterations = self._solver(dt)(rhs)
        z_new = s - z
        y_new = y + 0.5 * dt * s[:self.ny]
        return y_new, z_new, iterations


class DynamicsService:
    """Service layer for time integration"""

    @staticmethod
    def rhs_apply(ops, p, s, thermal_bc='neumann'):
        """Weak time derivative of s, each component still multiplied by its mass matrix.

        Applying the inverse consistent mass matrix to a component gives the
        time derivative of that field. Force components are divided by their
        leading coefficient (rho1, rho2, rho3, tau0).
        """
        system = PlateSystem(ops, p, thermal_bc)
        y, z = system.pack(s)
        b = system.blocks
        dy, force = system.weak_force(y, z)
        nw = system.sizes[0]
        dy_weak = np.concatenate([b['Mw'] @ dy[:nw], b['Mv'] @ dy[nw:]])
        f_wt, f_vt, f_theta, f_q = system.split(force)
        z_weak = np.concatenate([f_wt / p.rho1, f_vt / p.rho2, f_theta / p.rho3, f_q / p.tau0])
        return system.unpack(dy_weak, z_weak)

    @staticmethod
    def default_dt(mesh, p):
        """h/2 in units of the fastest wave speed"""
        speed = max(ParamsService.wave_speeds(p).values())
        return 0.5 * mesh.h / speed

    @staticmethod
    def step_midpoint(ops, p, s, dt, tol=Config.SOLVER_TOL, thermal_bc='neumann', system=None, t=0.0):
        """Advance s by dt with the implicit midpoint rule"""
        if not dt > 0:
            raise ConfigError('dt', f"must be positive, got {dt!r}")
        system = system or PlateSystem(ops, p, thermal_bc, tol=tol)
        y, z = system.pack(s)
        e_old = sum(system.energy_parts(y, z).values())
        y_new, z_new, iterations = system.advance(y, z, dt)
        z_mid = 0.5 * (z + z_new)
        dissipation = system.dissipation_parts(z_mid)
        energy_parts = system.energy_parts(y_new, z_new)
        residual = sum(energy_parts.values()) - e_old + dt * sum(dissipation.values())
        return StepReport(t=t + dt, state=system.unpack(y_new, z_new), energy_parts=energy_parts,
                          dissipation_parts=dissipation, solver_iterations=iterations,
                          identity_residual=float(residual))

    @staticmethod
    def simulate(ops, p, s0, dt, t_end, thermal_bc='neumann', tol=Config.SOLVER_TOL,
                 lyapunov=None, bogovskii=None, output_every=1, backend=None):
        """Integrate to t_end and collect one diagnostics row every output_every steps.

        dt is shrunk so that an integer number of steps lands on t_end.
        """
        from platelab.bogovskii_service import BogovskiiSolver
        from platelab.diagnostics_service import DiagnosticsService

        if not t_end > 0:
            raise ConfigError('t_end', f"must be positive, got {t_end!r}")
        if not dt > 0:
            raise ConfigError('dt', f"must be positive, got {dt!r}")
        n_steps = max(1, math.ceil(t_end / dt - 1e-9))
        dt = t_end / n_steps

        lyapunov = lyapunov or LyapunovConfig()
        if bogovskii is None and lyapunov.kind == 'symmetric':
            bogovskii = BogovskiiSolver(ops, tol)

        system = PlateSystem(ops, p, thermal_bc, backend=backend, tol=tol)
        y, z = system.pack(s0)
        series = TimeSeries(dt=dt)
        logger.info("Simulating %d steps of dt=%.6g to t=%.6g (%s thermal BC, %s backend)",
                    n_steps, dt, t_end, thermal_bc, system.backend)

        def record(t, y, z):
            state = system.unpack(y, z)
            row = DiagnosticsService.diagnostics_row(ops, p, state, t, system.energy_parts(y, z),
                                                     system.dissipation_parts(z), lyapunov,
                                                     bogovskii, thermal_bc)
            series.rows.append(row)
            series.channel_norms.append(DiagnosticsService.channel_norms(ops, state))

        record(0.0, y, z)
        energy = sum(system.energy_parts(y, z).values())
        for k in range(1, n_steps + 1):
            y_new, z_new, iterations = system.advance(y, z, dt)
            series.solver_iterations += iterations
            energy_new = sum(system.energy_parts(y_new, z_new).values())
            dissipation = sum(system.dissipation_parts(0.5 * (z + z_new)).values())
            residual = abs(energy_new - energy + dt * dissipation)
            series.max_identity_residual = max(series.max_identity_residual, residual)
            y, z, energy = y_new, z_new, energy_new
            if k % output_every == 0 or k == n_steps:
                record(k * dt, y, z)
                logger.debug("t=%.4f E=%.6e identity residual=%.2e", k * dt, energy, residual)

        series.final_state = system.unpack(y, z)
        logger.info("Finished: E(t_end)=%.6e, max identity residual %.2e",
                    energy, series.max_identity_residual)
        return series
