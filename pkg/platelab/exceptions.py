"""Error hierarchy. ``exit_code`` is the process status the CLI returns."""


class PlateLabError(Exception):
    """Base error for all laboratory failures"""
    exit_code = 3


class ConfigError(PlateLabError, ValueError):
    """Invalid configuration or argument, naming the offending field"""
    exit_code = 2

    def __init__(self, field, message=None):
        self.field = field
        super().__init__(f"{field}: {message}" if message else str(field))


class NonPositiveCoefficient(ConfigError):
    def __init__(self, name, value=None):
        super().__init__(name, f"must be positive, got {value!r}")


class MuOutOfRange(ConfigError):
    def __init__(self, value):
        self.value = value
        super().__init__('mu', f"must lie strictly inside (-1, 1), got {value!r}")


class DampNotPSD(ConfigError):
    def __init__(self, detail):
        super().__init__('Ddamp', detail)


class SchemaError(ConfigError):
    def __init__(self, message):
        super().__init__('csv', message)


class InsufficientData(ConfigError):
    def __init__(self, rows, required):
        self.rows = rows
        self.required = required
        super().__init__('series', f"{rows} rows in fit window, need at least {required}")


class NonPositiveEnergy(ConfigError):
    def __init__(self, t):
        self.t = t
        super().__init__('series', f"non-positive energy at t={t!r}")


class MissingEigenmode(ConfigError):
    def __init__(self):
        super().__init__('ic', "solenoidal-eigenmode preset needs an eigenmode")


class GeometryMismatch(ConfigError):
    def __init__(self, expected, actual):
        super().__init__('geometry', f"preset needs a {expected} mesh, got {actual}")


class DegenerateResolution(ConfigError):
    def __init__(self, message):
        super().__init__('h_target', message)


class NoConvergence(PlateLabError):
    def __init__(self, iterations, residual=None):
        self.iterations = iterations
        self.residual = residual
        detail = f" (residual {residual:.3e})" if residual is not None else ''
        super().__init__(f"solver did not converge in {iterations} iterations{detail}")


class NonZeroMean(PlateLabError):
    def __init__(self, defect):
        self.defect = defect
        super().__init__(f"field must have zero mean, lumped mean defect {defect:.3e}")
