import numpy as np
import pytest

from platelab.diagnostics_service import DiagnosticsService
from platelab.dynamics_service import DynamicsService, PlateSystem
from platelab.exceptions import ConfigError
from platelab.fem_service import FemService
from platelab.initial_data_service import InitialDataService
from platelab.mesh_service import MeshService
from platelab.models import InitialPreset, LyapunovConfig, State
from platelab.params_service import ParamsService
from platelab.spectral_service import SpectralService

from conftest import make_params

FULL = LyapunovConfig(kind='full')


def random_state(mesh, seed=3, thermal_bc='neumann'):
    return InitialDataService.build_initial(InitialPreset('random-clamped', seed=seed), mesh,
                                            thermal_bc=thermal_bc)


def test_pack_unpack(coarse_disk_ops, coarse_disk, params):
    system = PlateSystem(coarse_disk_ops, params)
    s = random_state(coarse_disk)
    y, z = system.pack(s)
    assert y.size == system.ny
    assert z.size == system.nz
    assert system.unpack(y, z).allclose(s)


def test_system_energy_matches_diagnostics(coarse_disk_ops, coarse_disk, params):
    system = PlateSystem(coarse_disk_ops, params)
    s = random_state(coarse_disk)
    parts = system.energy_parts(*system.pack(s))
    expected = DiagnosticsService.energy(coarse_disk_ops, params, s)
    for key, value in expected.items():
        assert parts[key] == pytest.approx(value, rel=1e-12, abs=1e-14)


def test_rhs_of_zero_state_is_zero(coarse_disk_ops, coarse_disk, params):
    ds = DynamicsService.rhs_apply(coarse_disk_ops, params, State.zeros(coarse_disk.n_vertices))
    assert not np.any(ds.to_vector())


def test_rhs_heat_flux_only(coarse_disk_ops, coarse_disk, rng):
    p = make_params(gamma=0.0, kappa=2.0, delta=0.5, rho3=2.0, tau0=4.0)
    s = State.zeros(coarse_disk.n_vertices)
    s.q = rng.normal(size=(coarse_disk.n_vertices, 2))
    ds = DynamicsService.rhs_apply(coarse_disk_ops, p, s)
    q = FemService.flat(s.q)
    for values in (ds.w, ds.v, ds.wt, ds.vt):
        assert not np.any(values)
    np.testing.assert_allclose(ds.theta, p.kappa * (coarse_disk_ops.G_grad.T @ q) / p.rho3, atol=1e-13)
    np.testing.assert_allclose(FemService.flat(ds.q), -p.delta * (coarse_disk_ops.M_vec @ q) / p.tau0,
                               atol=1e-13)


def test_rhs_conservative_part_is_energy_neutral(coarse_disk_ops, coarse_disk, conservative_params):
    # the undamped generator is skew in the energy product
    system = PlateSystem(coarse_disk_ops, conservative_params)
    y, z = system.pack(random_state(coarse_disk))
    dy, force = system.weak_force(y, z)
    power = y @ (system.P @ dy) + z @ force
    assert abs(power) <= 1e-11 * (np.linalg.norm(y) ** 2 + np.linalg.norm(z) ** 2)


def test_step_rejects_non_positive_dt(coarse_disk_ops, coarse_disk, params):
    with pytest.raises(ConfigError):
        DynamicsService.step_midpoint(coarse_disk_ops, params, State.zeros(coarse_disk.n_vertices), 0.0)
    with pytest.raises(ConfigError):
        DynamicsService.simulate(coarse_disk_ops, params, State.zeros(coarse_disk.n_vertices), 0.1, 0.0)


def test_conservative_step_preserves_energy(coarse_disk_ops, coarse_disk, conservative_params):
    s = random_state(coarse_disk)
    report = DynamicsService.step_midpoint(coarse_disk_ops, conservative_params, s, 0.05)
    e0 = DiagnosticsService.total_energy(coarse_disk_ops, conservative_params, s)
    assert report.energy == pytest.approx(e0, rel=1e-10)
    assert report.t == pytest.approx(0.05)


@pytest.mark.parametrize('backend', ['splu', 'minres', 'gmres'])
def test_energy_identity_for_every_backend(coarse_disk_ops, coarse_disk, params, backend):
    s = random_state(coarse_disk)
    system = PlateSystem(coarse_disk_ops, params, backend=backend, tol=1e-12)
    e0 = DiagnosticsService.total_energy(coarse_disk_ops, params, s)
    report = DynamicsService.step_midpoint(coarse_disk_ops, params, s, 0.05, system=system)
    assert report.energy < e0
    assert abs(report.identity_residual) <= 1e-8 * e0


def test_unknown_backend(coarse_disk_ops, params):
    with pytest.raises(ConfigError):
        PlateSystem(coarse_disk_ops, params, backend='cholesky')


def test_wt_damping_removes_exactly_the_dissipated_energy(coarse_disk_ops, coarse_disk):
    p = make_params(delta=0.0, gamma=0.0, beta=0.0, d=2.0, Ddamp=0.0)
    s = State.zeros(coarse_disk.n_vertices)
    s.wt = random_state(coarse_disk).wt
    report = DynamicsService.step_midpoint(coarse_disk_ops, p, s, 0.1)
    e0 = DiagnosticsService.total_energy(coarse_disk_ops, p, s)
    assert report.energy < e0
    assert report.dissipation_parts['diss_w'] > 0
    assert report.dissipation_parts['diss_v'] == 0.0
    assert abs(report.identity_residual) <= 1e-12 * e0


def test_time_reversal(coarse_disk_ops, coarse_disk, conservative_params):
    system = PlateSystem(coarse_disk_ops, conservative_params)
    y0, z0 = system.pack(random_state(coarse_disk))
    y, z, _ = system.advance(y0, z0, 0.1)
    y, z, _ = system.advance(y, z, -0.1)
    scale = np.linalg.norm(np.concatenate([y0, z0]))
    assert np.linalg.norm(np.concatenate([y - y0, z - z0])) <= 1e-10 * scale


def test_second_order_convergence(coarse_disk_ops, coarse_disk, conservative_params):
    system = PlateSystem(coarse_disk_ops, conservative_params)
    y0, z0 = system.pack(random_state(coarse_disk))
    t_end = 0.4

    def integrate(dt):
        y, z = y0, z0
        for _ in range(round(t_end / dt)):
            y, z, _ = system.advance(y, z, dt)
        return np.concatenate([y, z])

    reference = integrate(0.001)
    errors = [np.linalg.norm(integrate(dt) - reference) for dt in (0.02, 0.01)]
    assert 3.0 < errors[0] / errors[1] < 5.0


def test_conservative_simulation_keeps_energy(coarse_disk_ops, coarse_disk, conservative_params):
    s0 = random_state(coarse_disk)
    series = DynamicsService.simulate(coarse_disk_ops, conservative_params, s0, 0.05, 5.0, lyapunov=FULL)
    energy = series.column('E_total')
    assert len(series) == 101
    assert np.max(np.abs(energy - energy[0])) <= 1e-9 * energy[0]


def test_damped_energy_is_non_increasing(coarse_disk_ops, coarse_disk, params):
    series = DynamicsService.simulate(coarse_disk_ops, params, random_state(coarse_disk), 0.05, 2.0,
                                      lyapunov=FULL)
    energy = series.column('E_total')
    assert np.all(np.diff(energy) <= 1e-12 * energy[0])
    assert energy[-1] < energy[0]
    assert series.max_identity_residual <= 1e-8 * energy[0]


def test_neumann_theta_mean_is_conserved_without_beta(coarse_disk_ops, coarse_disk):
    p = make_params(beta=0.0)
    s0 = random_state(coarse_disk)
    s0.theta = s0.theta + 0.5
    series = DynamicsService.simulate(coarse_disk_ops, p, s0, 0.05, 1.0, lyapunov=FULL)
    mean = series.column('mean_theta')
    assert mean[0] == pytest.approx(0.5 + FemService.lumped_mean(coarse_disk_ops, s0.theta - 0.5), rel=1e-12)
    assert np.max(np.abs(mean - mean[0])) <= 1e-10 * abs(mean[0])


def test_dirichlet_theta_stays_zero_on_the_boundary(coarse_disk_ops, coarse_disk, params):
    s0 = random_state(coarse_disk, thermal_bc='dirichlet')
    series = DynamicsService.simulate(coarse_disk_ops, params, s0, 0.05, 0.5, 'dirichlet', lyapunov=FULL)
    assert not np.any(series.final_state.theta[coarse_disk.boundary_vertices])
    assert not np.any(series.final_state.w[coarse_disk.boundary_vertices])


def test_zero_state_stays_zero(coarse_disk_ops, coarse_disk, params):
    series = DynamicsService.simulate(coarse_disk_ops, params, State.zeros(coarse_disk.n_vertices),
                                      0.1, 1.0)
    assert not np.any(series.column('E_total'))
    assert not np.any(series.column('F_total'))
    assert series.solver_iterations == 10


def test_dt_is_shrunk_to_land_on_t_end(coarse_disk_ops, coarse_disk, params):
    series = DynamicsService.simulate(coarse_disk_ops, params, State.zeros(coarse_disk.n_vertices),
                                      0.3, 1.0, output_every=2)
    assert series.dt == pytest.approx(0.25)
    np.testing.assert_allclose(series.column('t'), [0.0, 0.5, 1.0])


def test_default_dt(coarse_disk, params):
    p = make_params(K=4.0)
    assert DynamicsService.default_dt(coarse_disk, p) == pytest.approx(0.25 * coarse_disk.h)
    assert DynamicsService.default_dt(coarse_disk, params) > 0


def test_polar_solenoidal_mode_keeps_its_energy():
    mesh = MeshService.mesh_disk_polar(1.0, 0.25)
    p = make_params(Ddamp=0.0)
    ops = FemService.assemble(mesh, ParamsService.build_stiffness_S(p))
    eig = SpectralService.solenoidal_eigenmode(ops, mesh)
    s0 = SpectralService.nondecay_initial_data(eig, p)
    series = DynamicsService.simulate(ops, p, s0, 0.05, 3.0, lyapunov=FULL, backend='splu')

    energy = series.column('E_total')
    assert np.max(np.abs(energy - energy[0])) <= 1e-8 * energy[0]
    v_scale = max(c['v'] for c in series.channel_norms)
    assert max(max(c['w'], c['theta'], c['q']) for c in series.channel_norms) <= 1e-8 * v_scale
