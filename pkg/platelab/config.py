import logging
import os

LOG_LEVELS = {
    'quiet': logging.WARNING,
    'info': logging.INFO,
    'debug': logging.DEBUG,
}


class Config:
    """Base configuration"""
    # Linear solvers
    SOLVER_TOL = float(os.environ.get('RMT_SOLVER_TOL', 1e-10))
    SOLVER_MAXITER_FACTOR = 20
    STEP_BACKEND = os.environ.get('RMT_STEP_BACKEND', 'splu')
    GMRES_RESTART = 30

    # Eigenproblems
    PENALTY_EPS = 1e-8
    EIGEN_TOL = 1e-12
    EIGEN_LEVELS = 3

    # Lyapunov functional weights
    LYAPUNOV_N = 50.0
    LYAPUNOV_N4 = 5.0

    # Decay fitting
    FIT_WINDOW_FRACTION = 0.2
    MIN_FIT_ROWS = 10

    # Tolerances
    PSD_TOLERANCE = 1e-12
    SYMMETRY_TOLERANCE = 1e-12
    MEAN_TOLERANCE = 1e-10
    LYAPUNOV_MEAN_TOLERANCE = 1e-6
    MU_PHYSICAL_RANGE = (0.0, 0.5)

    # Sampling
    RANDOM_SAMPLES = 20
    CONTINUITY_SAMPLES = 50

    # Output
    OUTPUT_DIR = os.environ.get('RMT_OUTPUT_DIR', 'results')
    FLOAT_FORMAT = '.17g'
    PDF_TAIL_ROWS = 15


class DevelopmentConfig(Config):
    """Development configuration"""
    DEBUG = True


class ProductionConfig(Config):
    """Production configuration"""
    DEBUG = False


class TestingConfig(Config):
    """Testing configuration"""
    TESTING = True
    RANDOM_SAMPLES = 6
    CONTINUITY_SAMPLES = 8
    OUTPUT_DIR = 'test-results'


config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}


def get_config(name=None):
    """Return the configuration class selected by name or RMT_ENV"""
    key = name or os.environ.get('RMT_ENV', 'default')
    return config.get(key, config['default'])


def configure_logging(level=None):
    """Send platelab log records to stderr at the RMT_LOG level.

    stdout is reserved for result schemas, so the handler always targets
    stderr. Calling this twice replaces the previous handler.
    """
    name = (level or os.environ.get('RMT_LOG', 'info')).lower()
    logger = logging.getLogger('platelab')
    for handler in list(logger.handlers):
        if getattr(handler, '_platelab', False):
            logger.removeHandler(handler)

    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter('%(asctime)s %(levelname)s %(name)s: %(message)s'))
    handler._platelab = True
    logger.addHandler(handler)
    logger.propagate = False

    if name not in LOG_LEVELS:
        logger.setLevel(logging.INFO)
        logger.warning("Unknown RMT_LOG value %r, using 'info'", name)
    else:
        logger.setLevel(LOG_LEVELS[name])
    return logger
