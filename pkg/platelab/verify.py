"""Walk through the core properties at desk resolution and print a line per check.

    python -m platelab.verify
"""
import numpy as np

from platelab.bogovskii_service import BogovskiiService
from platelab.config import configure_logging
from platelab.diagnostics_service import DiagnosticsService
from platelab.dynamics_service import DynamicsService, PlateSystem
from platelab.fem_service import FemService
from platelab.initial_data_service import InitialDataService
from platelab.mesh_service import MeshService
from platelab.models import InitialPreset, LyapunovConfig
from platelab.params_service import ParamsService
from platelab.spectral_service import SpectralService

PARAMS = {
    'rho1': 1.0, 'rho2': 1.0, 'rho3': 1.0, 'tau0': 1.0, 'K': 1.0, 'kappa': 1.0,
    'delta': 1.0, 'gamma': 1.0, 'beta': 0.0, 'd': 0.5, 'Ddamp': 0.5, 'Dflex': 1.0, 'mu': 0.3,
}


def run_test():
    configure_logging('quiet')
    p = ParamsService.validate_params(PARAMS)
    print(f"✅ Parameters validated: {p!r}")

    mesh = MeshService.mesh_disk(1.0, 0.2)
    ops = FemService.assemble(mesh, ParamsService.build_stiffness_S(p))
    print(f"✅ Disk mesh: {mesh.n_vertices} vertices, area {mesh.areas.sum():.4f}")

    w = np.sin(mesh.vertices[:, 0]) * (1 - np.hypot(*mesh.vertices.T) ** 2)
    w[mesh.boundary_vertices] = 0.0
    v = np.random.default_rng(0).normal(size=(mesh.n_vertices, 2))
    v[mesh.boundary_vertices] = 0.0
    duality = FemService.flat(v) @ (ops.G_grad @ w) + w @ (ops.B_div @ FemService.flat(v))
    assert abs(duality) < 1e-10
    print(f"✅ Gradient/divergence duality defect {abs(duality):.2e}")

    s0 = InitialDataService.build_initial(InitialPreset('radial-gaussian', width=0.3), mesh, p=p)
    system = PlateSystem(ops, p)
    report = DynamicsService.step_midpoint(ops, p, s0, 0.01, system=system)
    assert abs(report.identity_residual) < 1e-9 * max(1.0, report.energy)
    print(f"✅ Midpoint energy identity residual {report.identity_residual:.2e}")

    series = DynamicsService.simulate(ops, p, s0, 0.05, 4.0, lyapunov=LyapunovConfig(kind='full'),
                                      output_every=2)
    fit = DiagnosticsService.fit_decay(series)
    assert fit.alpha > 0
    print(f"✅ Fully damped decay: alpha={fit.alpha:.4f}, r2={fit.r2:.4f}")

    u0, f = BogovskiiService.manufactured_pair(mesh)
    result = BogovskiiService.bogovskii_apply(ops, mesh, f - FemService.lumped_mean(ops, f))
    error = FemService.l2_norm(ops, result.u - u0) / FemService.l2_norm(ops, u0)
    print(f"✅ Bogovskii reconstruction error {error:.3e}, C_B={result.c_b:.3f}")

    laplace = SpectralService.laplace_eigenmode(ops, mesh)
    stokes = SpectralService.solenoidal_eigenmode(ops, mesh)
    assert stokes.lam > laplace.lam
    print(f"✅ Eigenvalues: Laplace {laplace.lam:.4f} < Stokes {stokes.lam:.4f}")


if __name__ == '__main__':
    run_test()
