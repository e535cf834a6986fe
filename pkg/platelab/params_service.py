import logging
import math

import numpy as np

from platelab.config import Config
from platelab.exceptions import ConfigError, DampNotPSD, MuOutOfRange, NonPositiveCoefficient
from platelab.models import PARAM_NAMES, PlateParams, StiffnessS

logger = logging.getLogger(__name__)

POSITIVE = ('rho1', 'rho2', 'rho3', 'tau0', 'K', 'kappa', 'delta', 'gamma', 'Dflex')
NON_NEGATIVE = ('beta', 'd')
ZEROABLE = ('kappa', 'delta', 'gamma', 'beta', 'd')


class ParamsService:
    """Service layer for physical parameters"""

    @staticmethod
    def validate_params(raw, allow_zero=()):
        """Check a raw coefficient map and return PlateParams.

        ``allow_zero`` names positive coefficients that may be exactly zero,
        which the conservative and decoupled experiments need.
        """
        if isinstance(raw, PlateParams):
            raw = raw.to_dict()
        if not isinstance(raw, dict):
            raise ConfigError('params', "must be a key-value map")

        unknown = sorted(set(raw) - set(PARAM_NAMES))
        if unknown:
            raise ConfigError(f'params.{unknown[0]}', "unknown coefficient")
        bad_zero = sorted(set(allow_zero) - set(ZEROABLE))
        if bad_zero:
            raise ConfigError('allow_zero', f"{bad_zero[0]} may not be zero")

        values = {}
        for name in PARAM_NAMES:
            if name == 'Ddamp':
                continue
            if name not in raw:
                raise ConfigError(f'params.{name}', "missing")
            value = raw[name]
            if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
                raise ConfigError(f'params.{name}', f"must be a number, got {value!r}")
            value = float(value)
            if not math.isfinite(value):
                raise NonPositiveCoefficient(name, value)
            values[name] = value

        for name in POSITIVE:
            if name in allow_zero:
                if values[name] < 0:
                    raise NonPositiveCoefficient(name, values[name])
            elif values[name] <= 0:
                raise NonPositiveCoefficient(name, values[name])
        for name in NON_NEGATIVE:
            if values[name] < 0:
                raise NonPositiveCoefficient(name, values[name])

        mu = values['mu']
        if not -1.0 < mu < 1.0:
            raise MuOutOfRange(mu)
        low, high = Config.MU_PHYSICAL_RANGE
        if not low < mu < high:
            logger.warning("mu=%s is outside the physical range (%s, %s)", mu, low, high)

        values['Ddamp'] = ParamsService._parse_damping(raw.get('Ddamp', None))
        return PlateParams(**values)

    @staticmethod
    def _parse_damping(raw):
        """Accept a 2x2 nested list or a scalar multiple of the identity"""
        if raw is None:
            raise ConfigError('params.Ddamp', "missing")
        try:
            D = np.array(raw, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError('params.Ddamp', f"not numeric: {raw!r}")
        if D.ndim == 0:
            D = float(D) * np.eye(2)
        if D.shape != (2, 2) or not np.all(np.isfinite(D)):
            raise ConfigError('params.Ddamp', "must be a finite 2x2 matrix")

        scale = max(1.0, float(np.max(np.abs(D))))
        if abs(D[0, 1] - D[1, 0]) > Config.SYMMETRY_TOLERANCE * scale:
            raise DampNotPSD("not symmetric")
        D = 0.5 * (D + D.T)
        lam_min = ParamsService._min_eig_2x2(D)
        if lam_min < -Config.PSD_TOLERANCE * scale:
            raise DampNotPSD(f"smallest eigenvalue {lam_min:.6g} is negative")
        return D

    @staticmethod
    def _min_eig_2x2(D):
        mean = 0.5 * (D[0, 0] + D[1, 1])
        radius = math.hypot(0.5 * (D[0, 0] - D[1, 1]), D[0, 1])
        return mean - radius

    @staticmethod
    def build_stiffness_S(p):
        """S = Dflex [[1, mu, 0], [mu, 1, 0], [0, 0, (1 - mu)/2]]"""
        mu = p.mu
        entries = p.Dflex * np.array([
            [1.0, mu, 0.0],
            [mu, 1.0, 0.0],
            [0.0, 0.0, 0.5 * (1.0 - mu)],
        ])
        return StiffnessS(entries=entries)

    @staticmethod
    def stiffness_spectrum(p):
        """Closed-form eigenvalues of S in ascending order"""
        return np.sort(p.Dflex * np.array([0.5 * (1.0 - p.mu), 1.0 - p.mu, 1.0 + p.mu]))

    @staticmethod
    def min_damping_eigenvalue(p):
        return max(0.0, ParamsService._min_eig_2x2(np.asarray(p.Ddamp, dtype=float)))

    @staticmethod
    def wave_speeds(p):
        """Shear, bending and second-sound propagation speeds"""
        S_norm = p.Dflex * max(1.0 + p.mu, 1.0 - p.mu)
        return {
            'shear': math.sqrt(p.K / p.rho1),
            'bending': math.sqrt(S_norm / p.rho2),
            'thermal': p.kappa / math.sqrt(p.rho3 * p.tau0),
        }
