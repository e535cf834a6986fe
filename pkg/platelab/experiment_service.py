"""Orchestration behind the command-line subcommands.

Each ``run_*`` function takes a validated RunConfig, writes its result files
into the output directory and returns the report that the CLI prints.
"""
import logging
import math
import os

import numpy as np

from platelab.bogovskii_service import BogovskiiService, BogovskiiSolver
from platelab.config import get_config
from platelab.diagnostics_service import DiagnosticsService
from platelab.dynamics_service import DynamicsService
from platelab.exceptions import InsufficientData, NonPositiveEnergy
from platelab.export_service import ExportService
from platelab.fem_service import FemService
from platelab.initial_data_service import InitialDataService
from platelab.mesh_service import MeshService
from platelab.models import DecayFit, RunConfig
from platelab.params_service import ParamsService
from platelab.spectral_service import SpectralService

logger = logging.getLogger(__name__)


def _rate(coarse, fine, h_coarse, h_fine):
    if coarse <= 0 or fine <= 0:
        return None
    return math.log(coarse / fine) / math.log(h_coarse / h_fine)


class ExperimentService:
    """Service layer for complete experiments"""

    @staticmethod
    def load_run_config(path):
        """Read and validate a RunConfig JSON file"""
        return RunConfig.from_dict(ExportService.read_json(path))

    @staticmethod
    def prepare(run, h_target=None):
        """Validated params, mesh and assembled operators for a run"""
        p = ParamsService.validate_params(run.params, run.allow_zero)
        geometry = dict(run.geometry)
        if h_target is not None:
            geometry['h_target'] = h_target
        mesh = MeshService.mesh_from_geometry(geometry)
        ops = FemService.assemble(mesh, ParamsService.build_stiffness_S(p))
        return p, mesh, ops

    @staticmethod
    def run_simulation(run, out_dir=None, pdf=False, dump_matrices=False):
        """Simulate, fit and write timeseries.csv, summary.json and config_echo.json.

        With dump_matrices the assembled matrices also go to matrices/<name>.coo.
        """
        out_dir = ExportService.ensure_output_dir(out_dir or run.output_dir)
        p, mesh, ops = ExperimentService.prepare(run)

        eig = None
        if run.ic.kind == 'solenoidal-eigenmode':
            eig = SpectralService.solenoidal_eigenmode(ops, mesh)
        s0 = InitialDataService.build_initial(run.ic, mesh, eig, run.thermal_bc, p)

        dt_auto = run.dt == 'auto'
        dt = DynamicsService.default_dt(mesh, p) if dt_auto else run.dt
        if dt_auto:
            logger.info("Resolved dt='auto' to %.6g", dt)
        series = DynamicsService.simulate(ops, p, s0, dt, run.t_end, run.thermal_bc, run.solver_tol,
                                          run.lyapunov, output_every=run.output_every,
                                          backend=run.step_backend)

        energy = series.column('E_total')
        mean_theta = series.column('mean_theta')
        summary = {
            'final_energy': float(energy[-1]),
            'initial_energy': float(energy[0]),
            'decay_fit': ExperimentService._decay_fit(series),
            'dissipation_identity_max_residual': series.max_identity_residual,
            'mean_theta_drift': float(np.max(np.abs(mean_theta - mean_theta[0]))),
            'dt': series.dt,
            'dt_auto': dt_auto,
            'n_steps': int(round(run.t_end / series.dt)),
            'solver_iterations': series.solver_iterations,
            'mesh': mesh.to_dict(),
        }

        gronwall = DiagnosticsService.lyapunov_decay_check(series)
        summary['gronwall_margin'] = gronwall.margin
        summary['gronwall'] = gronwall.to_dict()
        summary['lyapunov_equivalence'] = DiagnosticsService.lyapunov_equivalence(series)

        if eig is not None:
            norms = series.channel_norms
            v_scale = max(c['v'] for c in norms)
            summary['eigenvalue'] = eig.lam
            summary['oscillation_frequency'] = DiagnosticsService.oscillation_frequency(series)
            summary['oracle_frequency'] = SpectralService.oracle_frequency(eig.lam, p)
            summary['relative_energy_drift'] = float(np.max(np.abs(energy - energy[0])) / energy[0])
            summary['max_damped_channel_ratio'] = float(
                max(max(c['w'], c['theta'], c['q']) for c in norms) / v_scale) if v_scale > 0 else 0.0

        ExportService.write_timeseries_csv(series, os.path.join(out_dir, 'timeseries.csv'))
        ExportService.write_json(summary, os.path.join(out_dir, 'summary.json'))
        ExportService.write_json(run.to_dict(), os.path.join(out_dir, 'config_echo.json'))
        ExportService.write_mesh(mesh, os.path.join(out_dir, 'mesh.txt'))
        ExportService.write_nodal_fields(ExportService.state_fields(series.final_state),
                                         os.path.join(out_dir, 'final_state.txt'))
        if dump_matrices:
            ExportService.write_matrices(FemService.named_matrices(ops), os.path.join(out_dir, 'matrices'))
        if pdf:
            report = ExportService.export_run_report_to_pdf(summary, series, run)
            ExportService.write_pdf(report, os.path.join(out_dir, 'report.pdf'))
        logger.info("Wrote simulation results to %s", out_dir)
        return summary

    @staticmethod
    def _decay_fit(series):
        energy = series.column('E_total')
        if not np.any(energy):
            return DecayFit(alpha=0.0, c_prefactor=0.0, r2=0.0, t_start=float(series.rows[0]['t']),
                            t_end=float(series.rows[-1]['t'])).to_dict()
        try:
            return DiagnosticsService.fit_decay(series).to_dict()
        except (InsufficientData, NonPositiveEnergy) as e:
            logger.warning("No decay fit: %s", e)
            return None

    @staticmethod
    def run_eigen(run, mode, out_dir=None):
        """Refinement study of lambda_1 for one operator"""
        out_dir = ExportService.ensure_output_dir(out_dir or run.output_dir)
        p = ParamsService.validate_params(run.params, run.allow_zero)
        report = SpectralService.eigen_refinement_study(run.geometry, mode, run.eigen.get('levels'), p)
        ExportService.write_json(report, os.path.join(out_dir, f'eigen_{mode}.json'))
        return report

    @staticmethod
    def run_bogovskii(run, out_dir=None):
        """Manufactured reconstruction at two resolutions plus the empirical constants"""
        out_dir = ExportService.ensure_output_dir(out_dir or run.output_dir)
        settings = run.bogovskii
        h0 = run.geometry['h_target']
        h_levels = [float(h) for h in settings.get('h_levels', [h0, h0 / 2])]
        samples = int(settings.get('samples', get_config().CONTINUITY_SAMPLES))
        seed = int(settings.get('seed', 0))

        levels = []
        for h in h_levels:
            _, mesh, ops = ExperimentService.prepare(run, h_target=h)
            solver = BogovskiiSolver(ops, run.solver_tol)
            u0, f = BogovskiiService.manufactured_pair(mesh)
            f = f - FemService.lumped_mean(ops, f)
            result = solver.apply(f)
            f_norm = FemService.l2_norm(ops, f)
            levels.append({
                'h_target': h,
                'h': mesh.h,
                'n_vertices': mesh.n_vertices,
                'residual_div': result.residual_div / f_norm,
                'residual_rot': result.residual_rot / f_norm,
                'boundary_norm': result.boundary_norm / f_norm,
                'error_l2': FemService.l2_norm(ops, result.u - u0) / FemService.l2_norm(ops, u0),
                'kernel_defect': result.kernel_defect,
                'cross_energy': result.cross_energy,
                'C_B': result.c_b,
                'iterations': result.iterations,
                'gradient_identity_defect': BogovskiiService.gradient_identity_defect(ops, u0),
                'continuity_constant': BogovskiiService.continuity_constant(ops, mesh, samples, seed, solver),
                'div_estimate_constant': BogovskiiService.div_estimate_constant(ops, mesh, samples, seed,
                                                                                solver),
            })

        report = {'geometry': dict(run.geometry), 'samples': samples, 'seed': seed, 'levels': levels}
        if len(levels) >= 2:
            coarse, fine = levels[-2], levels[-1]
            for key in ('residual_div', 'residual_rot', 'boundary_norm', 'error_l2'):
                report[f'{key}_rate'] = _rate(coarse[key], fine[key], coarse['h_target'], fine['h_target'])
            for key in ('continuity_constant', 'div_estimate_constant'):
                report[f'{key}_variation'] = abs(fine[key] - coarse[key]) / coarse[key]
        ExportService.write_json(report, os.path.join(out_dir, 'bogovskii.json'))
        return report

    @staticmethod
    def run_decay_fit(csv_path, t_start=None):
        """Fit a previously written time series"""
        series = ExportService.read_timeseries_csv(csv_path)
        return DiagnosticsService.fit_decay(series, t_start).to_dict()
