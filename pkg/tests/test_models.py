import json

import numpy as np
import pytest

from platelab.exceptions import ConfigError
from platelab.export_service import ExportService
from platelab.models import LyapunovConfig, RunConfig, State

CONFIG = {
    'geometry': {'kind': 'disk', 'radius': 1, 'h_target': 0.1},
    'params': {'rho1': 1, 'rho2': 1, 'rho3': 1, 'tau0': 1, 'K': 1, 'kappa': 1, 'delta': 1,
               'gamma': 1, 'beta': 1, 'd': 1, 'Ddamp': [[1, 0], [0, 1]], 'Dflex': 1, 'mu': 0.3},
    'ic': {'kind': 'radial-gaussian', 'amplitude': 1.0, 'width': 0.3},
    'time': {'dt': 'auto', 't_end': 30},
    'lyapunov': {'kind': 'full'},
}


def config(**changes):
    return dict(CONFIG, **changes)


def test_run_config_round_trip():
    run = RunConfig.from_dict(CONFIG)
    assert run.geometry == {'kind': 'disk', 'radius': 1.0, 'h_target': 0.1}
    assert run.dt == 'auto'
    assert RunConfig.from_dict(run.to_dict()) == run
    echoed = json.loads(ExportService.to_json(run.to_dict()))
    assert RunConfig.from_dict(echoed) == run


def test_polar_disk_mesh_survives_the_echo():
    raw = config(geometry={'kind': 'disk', 'radius': 1, 'h_target': 0.1, 'mesh': 'polar'})
    run = RunConfig.from_dict(raw)
    assert run.geometry['mesh'] == 'polar'
    assert RunConfig.from_dict(json.loads(ExportService.to_json(run.to_dict()))) == run


@pytest.mark.parametrize('changes, field', [
    ({'colour': 'red'}, 'colour'),
    ({'geometry': {'kind': 'disk', 'h_target': 0.1}}, 'geometry.radius'),
    ({'geometry': {'kind': 'hexagon'}}, 'geometry.kind'),
    ({'geometry': {'kind': 'disk', 'radius': 1, 'h_target': 0.1, 'mesh': 'hex'}}, 'geometry.mesh'),
    ({'geometry': {'kind': 'rectangle', 'lx': 1, 'ly': 1, 'h_target': 0.1, 'mesh': 'polar'}}, 'geometry.mesh'),
    ({'time': {'dt': -1, 't_end': 1}}, 'time.dt'),
    ({'time': {'dt': 0.1}}, 'time.t_end'),
    ({'thermal_bc': 'robin'}, 'thermal_bc'),
    ({'ic': {'kind': 'spiral'}}, 'ic.kind'),
    ({'lyapunov': {'N': 0}}, 'lyapunov.N'),
    ({'output_every': 0}, 'output_every'),
    ({'step_backend': 'cholesky'}, 'step_backend'),
    ({'params': [1, 2]}, 'params'),
])
def test_run_config_names_the_bad_field(changes, field):
    with pytest.raises(ConfigError) as e:
        RunConfig.from_dict(config(**changes))
    assert e.value.field == field


def test_run_config_top_level_must_be_an_object():
    with pytest.raises(ConfigError):
        RunConfig.from_dict([CONFIG])


def test_lyapunov_config_defaults():
    cfg = LyapunovConfig()
    assert cfg.kind == 'symmetric'
    assert cfg.N > cfg.N4 > 0
    with pytest.raises(ConfigError):
        LyapunovConfig(kind='partial')


def test_state_vector_layout():
    s = State.zeros(3)
    s.v[:, 0] = [1, 2, 3]
    s.v[:, 1] = [4, 5, 6]
    x = s.to_vector()
    np.testing.assert_array_equal(x[3:9], [1, 2, 3, 4, 5, 6])
    assert State.from_vector(3, x).allclose(s)
    np.testing.assert_array_equal(s.scaled(2.0).v, 2.0 * s.v)
