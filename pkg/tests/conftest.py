import os

os.environ.setdefault('RMT_ENV', 'testing')

import numpy as np
import pytest

from platelab.fem_service import FemService
from platelab.mesh_service import MeshService
from platelab.models import TIMESERIES_COLUMNS, TimeSeries
from platelab.params_service import ParamsService

BASE_PARAMS = {
    'rho1': 1.0, 'rho2': 1.0, 'rho3': 1.0, 'tau0': 1.0, 'K': 1.0, 'kappa': 1.0,
    'delta': 1.0, 'gamma': 1.0, 'beta': 1.0, 'd': 1.0,
    'Ddamp': [[1.0, 0.0], [0.0, 1.0]], 'Dflex': 1.0, 'mu': 0.3,
}

CONSERVATIVE = dict(BASE_PARAMS, delta=0.0, gamma=0.0, beta=0.0, d=0.0, Ddamp=0.0)


def make_params(**changes):
    raw = dict(BASE_PARAMS, **changes)
    allow_zero = [name for name in ('kappa', 'delta', 'gamma') if raw[name] == 0]
    return ParamsService.validate_params(raw, allow_zero)


def make_series(t, energy, F=None, **columns):
    """TimeSeries with every diagnostics column present, zero unless given"""
    t = np.asarray(t, dtype=float)
    data = {name: np.zeros_like(t) for name in TIMESERIES_COLUMNS}
    data['t'] = t
    data['E_total'] = np.asarray(energy, dtype=float)
    if F is not None:
        data['F_total'] = np.asarray(F, dtype=float)
    data.update({k: np.asarray(v, dtype=float) for k, v in columns.items()})
    rows = [{name: float(data[name][i]) for name in TIMESERIES_COLUMNS} for i in range(t.size)]
    return TimeSeries(rows=rows, dt=float(t[1] - t[0]) if t.size > 1 else None)


def clamped_field(mesh, rng, vector=True):
    shape = (mesh.n_vertices, 2) if vector else (mesh.n_vertices,)
    u = rng.normal(size=shape)
    u[mesh.boundary_vertices] = 0.0
    return u


@pytest.fixture(scope='module')
def params():
    return make_params()


@pytest.fixture(scope='module')
def conservative_params():
    return make_params(delta=0.0, gamma=0.0, beta=0.0, d=0.0, Ddamp=0.0)


@pytest.fixture(scope='module')
def coarse_disk():
    return MeshService.mesh_disk(1.0, 0.3)


@pytest.fixture(scope='module')
def coarse_disk_ops(coarse_disk, params):
    return FemService.assemble(coarse_disk, ParamsService.build_stiffness_S(params))


@pytest.fixture(scope='module')
def disk():
    return MeshService.mesh_disk(1.0, 0.2)


@pytest.fixture(scope='module')
def disk_ops(disk, params):
    return FemService.assemble(disk, ParamsService.build_stiffness_S(params))


@pytest.fixture(scope='module')
def fine_disk():
    return MeshService.mesh_disk(1.0, 0.1)


@pytest.fixture(scope='module')
def fine_disk_ops(fine_disk, params):
    return FemService.assemble(fine_disk, ParamsService.build_stiffness_S(params))


@pytest.fixture(scope='module')
def square():
    return MeshService.mesh_rectangle(1.0, 1.0, 0.25)


@pytest.fixture(scope='module')
def square_ops(square, params):
    return FemService.assemble(square, ParamsService.build_stiffness_S(params))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
