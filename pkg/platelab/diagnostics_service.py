"""Energies, Lyapunov functionals and decay fits.

Every quantity is evaluated with the assembled consistent mass and
stiffness forms, so the energy columns written during a simulation agree
with the ones used by the stepper's energy identity.
"""
import logging
import math

import numpy as np
import scipy.sparse as sp

from platelab.config import Config
from platelab.exceptions import InsufficientData, NonPositiveEnergy, NonZeroMean
from platelab.fem_service import FemService
from platelab.models import (DISSIPATION_KEYS, ENERGY_KEYS, DecayFit, GronwallReport,
                             LyapunovConfig)

logger = logging.getLogger(__name__)


class DiagnosticsService:
    """Service layer for energy functionals and trajectory analysis"""

    @staticmethod
    def energy(ops, p, s):
        """The six energy parts of a nodal state"""
        flat = FemService.flat
        w, v, wt, vt, q = s.w, flat(s.v), s.wt, flat(s.vt), flat(s.q)
        M, Mv = ops.M_scalar, ops.M_vec
        shear = w @ (ops.A_lap @ w) + 2.0 * v @ (ops.G_grad @ w) + v @ (Mv @ v)
        values = (
            0.5 * p.rho1 * wt @ (M @ wt),
            0.5 * p.rho2 * vt @ (Mv @ vt),
            0.5 * v @ (ops.A_korn @ v),
            0.5 * p.K * shear,
            0.5 * p.rho3 * s.theta @ (M @ s.theta),
            0.5 * p.tau0 * q @ (Mv @ q),
        )
        return dict(zip(ENERGY_KEYS, (float(x) for x in values)))

    @staticmethod
    def dissipation(ops, p, s):
        """Rates d|w_t|^2, <Ddamp v_t, v_t>, beta|theta|^2 and delta|q|^2"""
        flat = FemService.flat
        vt, q = flat(s.vt), flat(s.q)
        Dd = sp.kron(sp.csr_matrix(p.Ddamp), ops.M_scalar, format='csr')
        values = (
            p.d * s.wt @ (ops.M_scalar @ s.wt),
            vt @ (Dd @ vt),
            p.beta * s.theta @ (ops.M_scalar @ s.theta),
            p.delta * q @ (ops.M_vec @ q),
        )
        return dict(zip(DISSIPATION_KEYS, (float(x) for x in values)))

    @staticmethod
    def total_energy(ops, p, s):
        return float(sum(DiagnosticsService.energy(ops, p, s).values()))

    @staticmethod
    def poisson_auxiliary(ops, v, tol=Config.SOLVER_TOL):
        """u with -Lap u = div v in the weak sense and u = 0 on the boundary"""
        interior = ops.free_dofs('w')
        u = np.zeros(ops.n)
        rhs = (ops.B_div @ FemService.flat(v))[interior]
        u[interior] = FemService.solve_spd(FemService.restrict(ops.A_lap, interior), rhs, tol)
        return u

    @staticmethod
    def mean_free_theta(ops, theta, thermal_bc='neumann'):
        """Zero-mean part of theta; Neumann runs must already be (nearly) mean free"""
        theta = np.asarray(theta, dtype=float)
        mean = FemService.lumped_mean(ops, theta)
        if thermal_bc == 'neumann':
            scale = math.sqrt(max(ops.lumped @ (theta * theta) / ops.lumped.sum(), 0.0))
            if abs(mean) > Config.LYAPUNOV_MEAN_TOLERANCE * max(scale, np.finfo(float).tiny):
                raise NonZeroMean(abs(mean))
        return theta - mean

    @staticmethod
    def lyapunov_F(ops, p, s, cfg=None, bog=None, thermal_bc='neumann'):
        """F1..F4 and F_total = N E + F1 + F2 + F3 + N4 F4"""
        cfg = cfg or LyapunovConfig()
        flat = FemService.flat
        M, Mv = ops.M_scalar, ops.M_vec
        v, vt, q = flat(s.v), flat(s.vt), flat(s.q)
        energy = DiagnosticsService.total_energy(ops, p, s)

        if cfg.kind == 'full':
            parts = {'F1': p.rho2 * vt @ (Mv @ v), 'F2': p.rho1 * s.wt @ (M @ s.w), 'F3': 0.0, 'F4': 0.0}
        else:
            u = DiagnosticsService.poisson_auxiliary(ops, s.v)
            # the coupling term drops out when kappa is switched off
            coupling = p.gamma * p.tau0 / p.kappa if p.kappa > 0 else 0.0
            F1 = p.rho1 * s.wt @ (M @ u) + p.rho2 * vt @ (Mv @ v) - coupling * v @ (Mv @ q)
            F2 = p.rho1 * s.wt @ (M @ s.w)

            theta = DiagnosticsService.mean_free_theta(ops, s.theta, thermal_bc)
            if np.any(theta):
                if bog is None:
                    from platelab.bogovskii_service import BogovskiiSolver
                    bog = BogovskiiSolver(ops)
                b_theta = flat(bog(theta).u)
                F3 = p.rho2 * p.rho3 * b_theta @ (Mv @ vt)
                F4 = -p.tau0 * p.rho3 * q @ (Mv @ b_theta)
            else:
                F3 = F4 = 0.0
            parts = {'F1': F1, 'F2': F2, 'F3': F3, 'F4': F4}

        parts = {key: float(value) for key, value in parts.items()}
        parts['F_total'] = float(cfg.N * energy + parts['F1'] + parts['F2'] + parts['F3']
                                 + cfg.N4 * parts['F4'])
        return parts

    @staticmethod
    def channel_norms(ops, state):
        """L2 norms of the four fields that a solenoidal mode must leave untouched or carry"""
        return {
            'w': FemService.l2_norm(ops, state.w),
            'theta': FemService.l2_norm(ops, state.theta),
            'q': FemService.l2_norm(ops, state.q),
            'v': FemService.l2_norm(ops, state.v),
        }

    @staticmethod
    def diagnostics_row(ops, p, state, t, energy_parts, dissipation_parts, lyapunov=None,
                        bogovskii=None, thermal_bc='neumann'):
        """One time-series row in column order"""
        row = {'t': float(t), 'E_total': float(sum(energy_parts.values()))}
        row.update(energy_parts)
        row.update(dissipation_parts)
        row['mean_theta'] = FemService.lumped_mean(ops, state.theta)
        row['rot_v'] = FemService.rot_norm(ops, state.v)
        row['div_v'] = FemService.div_norm(ops, state.v)
        row.update(DiagnosticsService.lyapunov_F(ops, p, state, lyapunov, bogovskii, thermal_bc))
        return row

    # trajectory analysis

    @staticmethod
    def _window(t, t_start):
        if t_start is None:
            t_start = t[0] + Config.FIT_WINDOW_FRACTION * (t[-1] - t[0])
        return float(t_start), t >= t_start - 1e-12 * max(1.0, abs(t[-1]))

    @staticmethod
    def fit_decay(series, t_start=None):
        """Least squares on (t, log E): E(t) ~ C E(0) exp(-2 alpha t)"""
        t = series.column('t')
        energy = series.column('E_total')
        if t.size == 0:
            raise InsufficientData(0, Config.MIN_FIT_ROWS)
        t_start, window = DiagnosticsService._window(t, t_start)
        rows = int(window.sum())
        if rows < Config.MIN_FIT_ROWS:
            raise InsufficientData(rows, Config.MIN_FIT_ROWS)
        if energy[0] <= 0:
            raise NonPositiveEnergy(float(t[0]))
        tw, ew = t[window], energy[window]
        if np.any(ew <= 0):
            raise NonPositiveEnergy(float(tw[np.argmax(ew <= 0)]))

        log_e = np.log(ew)
        if np.ptp(log_e) == 0.0:
            fit = DecayFit(alpha=0.0, c_prefactor=float(ew[0] / energy[0]), r2=0.0,
                           t_start=float(tw[0]), t_end=float(tw[-1]))
        else:
            slope, intercept = np.polyfit(tw, log_e, 1)
            residual = log_e - (slope * tw + intercept)
            ss_tot = float(np.sum((log_e - log_e.mean()) ** 2))
            r2 = 1.0 - float(np.sum(residual ** 2)) / ss_tot if ss_tot > 0 else 0.0
            fit = DecayFit(alpha=float(-0.5 * slope), c_prefactor=float(np.exp(intercept) / energy[0]),
                           r2=float(min(1.0, max(0.0, r2))), t_start=float(tw[0]), t_end=float(tw[-1]))
        logger.info("Decay fit on [%.4g, %.4g]: alpha=%.6g C=%.6g r2=%.6f",
                    fit.t_start, fit.t_end, fit.alpha, fit.c_prefactor, fit.r2)
        return fit

    @staticmethod
    def lyapunov_decay_check(series, t_start=None):
        """Worst c with centred dF/dt <= -c E over the window"""
        t = series.column('t')
        energy = series.column('E_total')
        F = series.column('F_total')
        if t.size == 0:
            return GronwallReport(passed=False, margin=float('nan'), t_worst=None,
                                  t_start=0.0, t_end=0.0, rows_checked=0)
        t_start, window = DiagnosticsService._window(t, t_start)
        idx = np.flatnonzero(window)
        idx = idx[(idx > idx.min()) & (idx < idx.max())] if idx.size >= 3 else idx[:0]
        idx = idx[energy[idx] > 0]
        if idx.size == 0:
            logger.warning("Gronwall check: no usable rows after t=%.4g", t_start)
            return GronwallReport(passed=False, margin=float('nan'), t_worst=None,
                                  t_start=t_start, t_end=float(t[-1]), rows_checked=0)

        dF = (F[idx + 1] - F[idx - 1]) / (t[idx + 1] - t[idx - 1])
        ratio = -dF / energy[idx]
        worst = int(np.argmin(ratio))
        report = GronwallReport(passed=bool(ratio[worst] > 0), margin=float(ratio[worst]),
                                t_worst=float(t[idx[worst]]), t_start=t_start, t_end=float(t[-1]),
                                rows_checked=int(idx.size))
        if report.passed:
            logger.info("Gronwall check passed, margin %.4g", report.margin)
        else:
            logger.warning("Gronwall check failed at t=%.4g, margin %.4g", report.t_worst, report.margin)
        return report

    @staticmethod
    def lyapunov_equivalence(series):
        """alpha1 = min F/E and alpha2 = max F/E over rows with positive energy"""
        energy = series.column('E_total')
        F = series.column('F_total')
        positive = energy > 0
        if not np.any(positive):
            return {'alpha1': None, 'alpha2': None, 'rows': 0}
        ratio = F[positive] / energy[positive]
        return {'alpha1': float(ratio.min()), 'alpha2': float(ratio.max()), 'rows': int(positive.sum())}

    @staticmethod
    def oscillation_frequency(series, column='E_kin_v'):
        """Mode frequency from the mean crossings of a quadratic energy column.

        An energy of a mode cos(2 pi f t) oscillates at 2f, so consecutive
        mean crossings are 1/(4f) apart.
        """
        t = series.column('t')
        x = series.column(column)
        x = x - x.mean()
        sign_change = np.flatnonzero(np.signbit(x[:-1]) != np.signbit(x[1:]))
        if sign_change.size < 2:
            return 0.0
        i = sign_change
        crossings = t[i] - x[i] * (t[i + 1] - t[i]) / (x[i + 1] - x[i])
        return float((crossings.size - 1) / (4.0 * (crossings[-1] - crossings[0])))
