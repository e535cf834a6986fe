import sys

import click

from platelab.config import configure_logging
from platelab.exceptions import PlateLabError
from platelab.experiment_service import ExperimentService
from platelab.export_service import ExportService
from platelab.spectral_service import EIGEN_MODES


def _fail(error):
    """Print one line on stderr and exit with the error's status"""
    click.echo(f"error: {error}", err=True)
    sys.exit(error.exit_code)


def _emit(report):
    click.echo(ExportService.to_json(report), nl=False)


@click.group()
@click.option('--log-level', default=None, help='quiet, info or debug (default: RMT_LOG or info)')
def cli(log_level):
    """Damped thermoelastic plate laboratory"""
    configure_logging(log_level)


@cli.command()
@click.option('--config', 'config_path', required=True, type=click.Path(dir_okay=False))
@click.option('--out', 'out_dir', default=None, help='Output directory (overrides output_dir)')
@click.option('--pdf/--no-pdf', default=False, help='Also write report.pdf')
@click.option('--dump-matrices', is_flag=True, help='Also write the assembled matrices as COO text')
def simulate(config_path, out_dir, pdf, dump_matrices):
    """Run one simulation and write timeseries.csv, summary.json and config_echo.json"""
    try:
        run = ExperimentService.load_run_config(config_path)
        summary = ExperimentService.run_simulation(run, out_dir, pdf, dump_matrices)
    except PlateLabError as e:
        _fail(e)
    _emit(summary)


@cli.command()
@click.option('--config', 'config_path', required=True, type=click.Path(dir_okay=False))
@click.option('--mode', type=click.Choice(EIGEN_MODES), default='stokes', show_default=True)
@click.option('--out', 'out_dir', default=None)
def eigen(config_path, mode, out_dir):
    """Refinement study of the smallest eigenvalue"""
    try:
        run = ExperimentService.load_run_config(config_path)
        report = ExperimentService.run_eigen(run, mode, out_dir)
    except PlateLabError as e:
        _fail(e)
    _emit(report)


@cli.command()
@click.option('--config', 'config_path', required=True, type=click.Path(dir_okay=False))
@click.option('--out', 'out_dir', default=None)
def bogovskii(config_path, out_dir):
    """Bogovskii reconstruction residuals, rates and empirical constants"""
    try:
        run = ExperimentService.load_run_config(config_path)
        report = ExperimentService.run_bogovskii(run, out_dir)
    except PlateLabError as e:
        _fail(e)
    _emit(report)


@cli.command('decay-fit')
@click.argument('csv_path', type=click.Path(dir_okay=False))
@click.option('--t-start', type=float, default=None, help='Start of the fit window (default 20% of t_end)')
def decay_fit(csv_path, t_start):
    """Fit E(t) ~ C E(0) exp(-2 alpha t) to a diagnostics CSV"""
    try:
        fit = ExperimentService.run_decay_fit(csv_path, t_start)
    except PlateLabError as e:
        _fail(e)
    _emit(fit)


if __name__ == '__main__':
    cli()
