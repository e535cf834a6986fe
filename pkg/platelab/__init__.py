"""Finite element laboratory for the damped thermoelastic Reissner-Mindlin-Timoshenko plate."""
from platelab.exceptions import PlateLabError, ConfigError, NoConvergence, NonZeroMean
from platelab.models import PlateParams, Mesh, State, RunConfig, TimeSeries

__version__ = '0.1.0'

__all__ = ['PlateLabError', 'ConfigError', 'NoConvergence', 'NonZeroMean',
           'PlateParams', 'Mesh', 'State', 'RunConfig', 'TimeSeries']
