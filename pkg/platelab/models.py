from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np
import scipy.sparse as sp

from platelab.config import Config
from platelab.exceptions import ConfigError

PARAM_NAMES = ('rho1', 'rho2', 'rho3', 'tau0', 'K', 'kappa', 'delta', 'gamma',
               'beta', 'd', 'Ddamp', 'Dflex', 'mu')

ENERGY_KEYS = ('E_kin_w', 'E_kin_v', 'E_bend', 'E_shear', 'E_theta', 'E_q')
DISSIPATION_KEYS = ('diss_w', 'diss_v', 'diss_theta', 'diss_q')
LYAPUNOV_KEYS = ('F1', 'F2', 'F3', 'F4')

TIMESERIES_COLUMNS = ('t', 'E_total') + ENERGY_KEYS + DISSIPATION_KEYS + (
    'mean_theta', 'rot_v', 'div_v', 'F_total') + LYAPUNOV_KEYS

THERMAL_BCS = ('neumann', 'dirichlet')
DISK_MESHES = ('rings', 'polar')
PRESET_KINDS = ('radial-gaussian', 'solenoidal-eigenmode', 'random-clamped', 'zero', 'custom')


@dataclass(eq=False)
class PlateParams:
    """Validated physical coefficients of the plate system"""
    rho1: float
    rho2: float
    rho3: float
    tau0: float
    K: float
    kappa: float
    delta: float
    gamma: float
    beta: float
    d: float
    Ddamp: np.ndarray
    Dflex: float
    mu: float

    def __eq__(self, other):
        if not isinstance(other, PlateParams):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return f'<PlateParams K={self.K} Dflex={self.Dflex} mu={self.mu} d={self.d}>'

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        data = {name: float(getattr(self, name)) for name in PARAM_NAMES if name != 'Ddamp'}
        data['Ddamp'] = [[float(x) for x in row] for row in np.asarray(self.Ddamp)]
        return data


@dataclass(eq=False)
class StiffnessS:
    """Flexural stiffness matrix acting on the generalized gradient"""
    entries: np.ndarray

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.entries)

    @property
    def norm(self):
        return float(np.max(np.abs(self.eigenvalues())))

    def to_dict(self):
        return {'entries': self.entries.tolist()}

    def __repr__(self):
        return f'<StiffnessS eig={np.round(self.eigenvalues(), 6).tolist()}>'


@dataclass(eq=False)
class Mesh:
    """Conforming triangulation with boundary tagging"""
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertices: np.ndarray
    h: float
    geometry_tag: dict
    centroid: np.ndarray
    boundary_edges: np.ndarray
    rings: Optional[list] = None

    @property
    def n_vertices(self):
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self):
        return int(self.triangles.shape[0])

    @property
    def kind(self):
        return self.geometry_tag['kind']

    @property
    def boundary_mask(self):
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices] = True
        return mask

    @property
    def interior_vertices(self):
        return np.flatnonzero(~self.boundary_mask)

    @property
    def areas(self):
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def lumped_areas(self):
        """Vertex areas: one third of every incident triangle"""
        lumped = np.zeros(self.n_vertices)
        np.add.at(lumped, self.triangles.ravel(), np.repeat(self.areas / 3.0, 3))
        return lumped

    def to_dict(self):
        return {
            'geometry': dict(self.geometry_tag),
            'n_vertices': self.n_vertices,
            'n_triangles': self.n_triangles,
            'n_boundary': int(self.boundary_vertices.size),
            'h': float(self.h),
        }

    def __repr__(self):
        return f'<Mesh {self.kind} n={self.n_vertices} h={self.h:.4f}>'


@dataclass(eq=False)
class AssembledOperators:
    """Sparse matrices of every bilinear form in the weak formulation.

    Vector fields are stored blocked: all x-components first, then all
    y-components (index ``c * n + i``). Cell operators map nodal values to
    piecewise-constant derivatives, one row per triangle.
    """
    mesh: Mesh
    S: StiffnessS
    M_scalar: sp.csr_matrix
    M_vec: sp.csr_matrix
    A_lap: sp.csr_matrix
    A_veclap: sp.csr_matrix
    A_korn: sp.csr_matrix
    G_grad: sp.csr_matrix
    B_div: sp.csr_matrix
    R_rot: sp.csr_matrix
    M_boundary: sp.csr_matrix
    Dx_cell: sp.csr_matrix
    Dy_cell: sp.csr_matrix
    cell_load: sp.csr_matrix
    lumped: np.ndarray
    dirichlet_mask: dict

    @property
    def n(self):
        return self.mesh.n_vertices

    @property
    def areas(self):
        return self.mesh.areas

    def free_dofs(self, field_name, thermal_bc='neumann'):
        """Indices of unconstrained unknowns for one field"""
        key = field_name
        if field_name == 'theta':
            key = 'theta_' + thermal_bc
        return np.flatnonzero(~self.dirichlet_mask[key])

    def __repr__(self):
        return f'<AssembledOperators n={self.n} nnz(A_korn)={self.A_korn.nnz}>'


@dataclass(eq=False)
class State:
    """Nodal coefficients of (w, v, w_t, v_t, theta, q); vector fields are (n, 2)"""
    w: np.ndarray
    v: np.ndarray
    wt: np.ndarray
    vt: np.ndarray
    theta: np.ndarray
    q: np.ndarray

    @classmethod
    def zeros(cls, n):
        return cls(w=np.zeros(n), v=np.zeros((n, 2)), wt=np.zeros(n),
                   vt=np.zeros((n, 2)), theta=np.zeros(n), q=np.zeros((n, 2)))

    @property
    def n(self):
        return int(self.w.shape[0])

    def to_vector(self):
        return np.concatenate([self.w, self.v.T.ravel(), self.wt, self.vt.T.ravel(),
                               self.theta, self.q.T.ravel()])

    @classmethod
    def from_vector(cls, n, x):
        parts = np.split(np.asarray(x, dtype=float), np.cumsum([n, 2 * n, n, 2 * n, n]))
        vec = lambda a: a.reshape(2, n).T.copy()
        return cls(w=parts[0].copy(), v=vec(parts[1]), wt=parts[2].copy(), vt=vec(parts[3]),
                   theta=parts[4].copy(), q=vec(parts[5]))

    def scaled(self, c):
        return State.from_vector(self.n, c * self.to_vector())

    def copy(self):
        return State.from_vector(self.n, self.to_vector())

    def allclose(self, other, rtol=0.0, atol=0.0):
        return np.allclose(self.to_vector(), other.to_vector(), rtol=rtol, atol=atol)

    def __repr__(self):
        return f'<State n={self.n} |x|={np.linalg.norm(self.to_vector()):.3e}>'


@dataclass
class StepReport:
    """Outcome of one midpoint step"""
    t: float
    state: State
    energy_parts: dict
    dissipation_parts: dict
    solver_iterations: int
    identity_residual: float = 0.0

    @property
    def energy(self):
        return float(sum(self.energy_parts.values()))


@dataclass
class TimeSeries:
    """Per-row diagnostics of one simulation"""
    rows: list = field(default_factory=list)
    dt: Optional[float] = None
    final_state: Optional[State] = None
    max_identity_residual: float = 0.0
    solver_iterations: int = 0
    channel_norms: list = field(default_factory=list)

    def column(self, name):
        return np.array([row[name] for row in self.rows], dtype=float)

    def __len__(self):
        return len(self.rows)

    def __repr__(self):
        return f'<TimeSeries rows={len(self.rows)} dt={self.dt}>'


@dataclass
class DecayFit:
    """Least-squares fit of E(t) ~ C E(0) exp(-2 alpha t)"""
    alpha: float
    c_prefactor: float
    r2: float
    t_start: float
    t_end: float

    def to_dict(self):
        """Convert to dictionary for JSON serialization"""
        return {'alpha': self.alpha, 'C': self.c_prefactor, 'r2': self.r2,
                't_start': self.t_start, 't_end': self.t_end}


@dataclass
class LyapunovConfig:
    N: float = Config.LYAPUNOV_N
    N4: float = Config.LYAPUNOV_N4
    kind: str = 'symmetric'

    def __post_init__(self):
        for name in ('N', 'N4'):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not np.isfinite(value) or value <= 0:
                raise ConfigError(f'lyapunov.{name}', f"must be positive, got {value!r}")
        if self.kind not in ('symmetric', 'full'):
            raise ConfigError('lyapunov.kind', f"expected 'symmetric' or 'full', got {self.kind!r}")
        self.N = float(self.N)
        self.N4 = float(self.N4)

    def to_dict(self):
        return {'N': self.N, 'N4': self.N4, 'kind': self.kind}


@dataclass
class GronwallReport:
    """Worst margin c in dF/dt <= -c E over the checked window"""
    passed: bool
    margin: float
    t_worst: Optional[float]
    t_start: float
    t_end: float
    rows_checked: int

    def to_dict(self):
        return {'passed': self.passed, 'margin': self.margin, 't_worst': self.t_worst,
                't_start': self.t_start, 't_end': self.t_end, 'rows_checked': self.rows_checked}


@dataclass(eq=False)
class EigenResult:
    lam: float
    field: np.ndarray
    residual: float
    h: float
    mode: str = 'laplace'
    div_defect: Optional[float] = None

    def to_dict(self):
        data = {'lambda': self.lam, 'residual': self.residual, 'h': self.h, 'mode': self.mode}
        if self.div_defect is not None:
            data['div_defect'] = self.div_defect
        return data

    def __repr__(self):
        return f'<EigenResult {self.mode} lambda={self.lam:.6f} h={self.h:.4f}>'


@dataclass
class KornEstimates:
    c_k1: float
    c_k2: float
    c_k: float
    c_p: float
    h: float

    def to_dict(self):
        return {'c_k1': self.c_k1, 'c_k2': self.c_k2, 'c_k': self.c_k, 'c_p': self.c_p, 'h': self.h}


@dataclass(eq=False)
class BogovskiiSolve:
    phi: np.ndarray
    psi: np.ndarray
    u: np.ndarray
    residual_div: float
    residual_rot: float
    boundary_norm: float
    kernel_defect: float
    cross_energy: float
    c_b: float
    iterations: int

    def to_dict(self):
        return {
            'residual_div': self.residual_div,
            'residual_rot': self.residual_rot,
            'boundary_norm': self.boundary_norm,
            'kernel_defect': self.kernel_defect,
            'cross_energy': self.cross_energy,
            'C_B': self.c_b,
            'iterations': self.iterations,
        }


@dataclass
class InitialPreset:
    kind: str = 'zero'
    amplitude: float = 1.0
    width: float = 0.3
    seed: int = 0
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in PRESET_KINDS:
            raise ConfigError('ic.kind', f"unknown preset {self.kind!r}")
        if not np.isfinite(self.amplitude):
            raise ConfigError('ic.amplitude', "must be finite")
        if not (self.width > 0 and np.isfinite(self.width)):
            raise ConfigError('ic.width', f"must be positive, got {self.width!r}")
        if self.kind == 'custom' and not self.path:
            raise ConfigError('ic.path', "custom preset needs a nodal data file")
        self.amplitude = float(self.amplitude)
        self.width = float(self.width)
        self.seed = int(self.seed)

    def to_dict(self):
        data = {'kind': self.kind, 'amplitude': self.amplitude, 'width': self.width, 'seed': self.seed}
        if self.path is not None:
            data['path'] = self.path
        return data


@dataclass
class RunConfig:
    """One experiment as read from its JSON file"""
    geometry: dict
    params: dict
    ic: InitialPreset
    dt: object
    t_end: float
    thermal_bc: str = 'neumann'
    lyapunov: LyapunovConfig = field(default_factory=LyapunovConfig)
    output_dir: str = Config.OUTPUT_DIR
    solver_tol: float = Config.SOLVER_TOL
    allow_zero: tuple = ()
    output_every: int = 1
    step_backend: str = Config.STEP_BACKEND
    bogovskii: dict = field(default_factory=dict)
    eigen: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw):
        """Build and validate a RunConfig, naming the first bad field"""
        if not isinstance(raw, dict):
            raise ConfigError('config', "top level must be a JSON object")
        known = {f.name for f in fields(cls)} | {'time'}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown key")

        geometry = _parse_geometry(raw.get('geometry'))
        params = raw.get('params')
        if not isinstance(params, dict):
            raise ConfigError('params', "must be an object of coefficients")

        ic_raw = raw.get('ic', {'kind': 'zero'})
        if not isinstance(ic_raw, dict):
            raise ConfigError('ic', "must be an object")
        try:
            ic = InitialPreset(**ic_raw)
        except TypeError as e:
            raise ConfigError('ic', str(e))

        time = raw.get('time')
        if not isinstance(time, dict):
            raise ConfigError('time', "must be an object with dt and t_end")
        dt = time.get('dt', 'auto')
        if dt != 'auto':
            if not isinstance(dt, (int, float)) or isinstance(dt, bool) or not dt > 0:
                raise ConfigError('time.dt', f"must be 'auto' or positive, got {dt!r}")
            dt = float(dt)
        t_end = time.get('t_end')
        if not isinstance(t_end, (int, float)) or isinstance(t_end, bool) or not t_end > 0:
            raise ConfigError('time.t_end', f"must be positive, got {t_end!r}")

        thermal_bc = raw.get('thermal_bc', 'neumann')
        if thermal_bc not in THERMAL_BCS:
            raise ConfigError('thermal_bc', f"expected one of {THERMAL_BCS}, got {thermal_bc!r}")

        lyap_raw = raw.get('lyapunov', {})
        if not isinstance(lyap_raw, dict):
            raise ConfigError('lyapunov', "must be an object")
        try:
            lyapunov = LyapunovConfig(**lyap_raw)
        except TypeError as e:
            raise ConfigError('lyapunov', str(e))

        solver_tol = raw.get('solver_tol', Config.SOLVER_TOL)
        if not isinstance(solver_tol, (int, float)) or not solver_tol > 0:
            raise ConfigError('solver_tol', f"must be positive, got {solver_tol!r}")

        allow_zero = raw.get('allow_zero', [])
        if not isinstance(allow_zero, (list, tuple)) or not all(isinstance(a, str) for a in allow_zero):
            raise ConfigError('allow_zero', "must be a list of coefficient names")

        output_every = raw.get('output_every', 1)
        if not isinstance(output_every, int) or isinstance(output_every, bool) or output_every < 1:
            raise ConfigError('output_every', f"must be a positive integer, got {output_every!r}")

        step_backend = raw.get('step_backend', Config.STEP_BACKEND)
        if step_backend not in ('splu', 'minres', 'gmres'):
            raise ConfigError('step_backend', f"unknown backend {step_backend!r}")

        for key in ('bogovskii', 'eigen'):
            if not isinstance(raw.get(key, {}), dict):
                raise ConfigError(key, "must be an object")

        return cls(
            geometry=geometry,
            params=dict(params),
            ic=ic,
            dt=dt,
            t_end=float(t_end),
            thermal_bc=thermal_bc,
            lyapunov=lyapunov,
            output_dir=str(raw.get('output_dir', Config.OUTPUT_DIR)),
            solver_tol=float(solver_tol),
            allow_zero=tuple(allow_zero),
            output_every=output_every,
            step_backend=step_backend,
            bogovskii=dict(raw.get('bogovskii', {})),
            eigen=dict(raw.get('eigen', {})),
        )

    def to_dict(self):
        """Inverse of from_dict"""
        return {
            'geometry': dict(self.geometry),
            'params': dict(self.params),
            'ic': self.ic.to_dict(),
            'time': {'dt': self.dt, 't_end': self.t_end},
            'thermal_bc': self.thermal_bc,
            'lyapunov': self.lyapunov.to_dict(),
            'output_dir': self.output_dir,
            'solver_tol': self.solver_tol,
            'allow_zero': list(self.allow_zero),
            'output_every': self.output_every,
            'step_backend': self.step_backend,
            'bogovskii': dict(self.bogovskii),
            'eigen': dict(self.eigen),
        }


def _parse_geometry(raw):
    if not isinstance(raw, dict):
        raise ConfigError('geometry', "must be an object")
    kind = raw.get('kind')
    if kind == 'disk':
        required = ('radius', 'h_target')
    elif kind == 'rectangle':
        required = ('lx', 'ly', 'h_target')
    else:
        raise ConfigError('geometry.kind', f"expected 'disk' or 'rectangle', got {kind!r}")
    geometry = {'kind': kind}
    for key in required:
        value = raw.get(key)
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0:
            raise ConfigError(f'geometry.{key}', f"must be positive, got {value!r}")
        geometry[key] = float(value)
    optional = set()
    if kind == 'disk' and 'mesh' in raw:
        if raw['mesh'] not in DISK_MESHES:
            raise ConfigError('geometry.mesh', f"expected one of {DISK_MESHES}, got {raw['mesh']!r}")
        geometry['mesh'] = raw['mesh']
        optional.add('mesh')
    extra = sorted(set(raw) - set(required) - optional - {'kind'})
    if extra:
        raise ConfigError(f'geometry.{extra[0]}', "unknown key")
    return geometry
