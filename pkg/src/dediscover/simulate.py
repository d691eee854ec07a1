"""Ground-truth data generators.

Fixed-step RK4 for a handful of canonical ODE systems, the explicit
finite-difference diffusion propagator, and relative Gaussian noise.
Every built-in system also knows its true coefficients in the canonical
library (see :func:`true_terms`).
"""
from dataclasses import dataclass, field, asdict
from fractions import Fraction

import numpy as np

from .data import Dataset, Grid
from .errors import ConfigError, DivergenceError, StabilityError

ODE_SYSTEMS = ("lorenz63", "lotka_volterra", "cubic_oscillator", "linear_2d")
SYSTEMS = ODE_SYSTEMS + ("diffusion_1d",)

DEFAULT_PARAMETERS = {
    "lorenz63": {"sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0},
    "lotka_volterra": {"alpha": 1.1, "beta": 0.4, "delta": 0.1, "gamma": 0.4},
    "cubic_oscillator": {"a": 0.1},
    "linear_2d": {"a11": -0.1, "a12": 2.0, "a21": -2.0, "a22": -0.1},
    "diffusion_1d": {"b": 0.5},
}
DEFAULT_INITIAL = {
    "lorenz63": (-8.0, 8.0, 27.0),
    "lotka_volterra": (10.0, 5.0),
    "cubic_oscillator": (2.0, -1.5),
    "linear_2d": (2.0, 0.0),
}


@dataclass(frozen=True)
class SimSpec:
    """Simulation settings.

    For ``diffusion_1d``: ``n_space`` interior points on ``[0, length]``
    with spacing ``dx = length / (n_space + 1)`` (unless ``dx`` is given);
    the dataset includes the two boundary nodes.  ``initial_state`` is then
    the interior profile (or ``None`` for a default multi-mode sine
    profile).  ``b_schedule`` is an optional list of ``[t_start, b]`` pairs
    overriding ``parameters["b"]`` from ``t_start`` on.
    """

    system: str
    parameters: dict = field(default_factory=dict)
    initial_state: tuple = None
    dt: float = 1e-3
    n_steps: int = 10000
    dx: float = None
    n_space: int = 100
    length: float = 1.0
    boundary: tuple = (0.0, 0.0)
    b_schedule: tuple = ()
    noise_level: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ConfigError(f"unknown system {self.system!r}")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.n_steps < 4:
            raise ConfigError("n_steps must be at least 4 (five time points)")
        if self.noise_level < 0:
            raise ConfigError("noise_level must be non-negative")
        params = dict(DEFAULT_PARAMETERS[self.system])
        unknown = set(self.parameters) - set(params)
        if unknown:
            raise ConfigError(f"unknown parameters {sorted(unknown)} for {self.system}")
        params.update({k: float(v) for k, v in self.parameters.items()})
        object.__setattr__(self, "parameters", params)
        init = self.initial_state
        if init is None and self.system in DEFAULT_INITIAL:
            init = DEFAULT_INITIAL[self.system]
        if init is not None:
            object.__setattr__(self, "initial_state", tuple(float(v) for v in init))
        object.__setattr__(self, "boundary", tuple(float(v) for v in self.boundary))
        object.__setattr__(self, "b_schedule", tuple((float(t), float(b)) for t, b in self.b_schedule))
        if self.system == "diffusion_1d":
            if self.n_space < 1:
                raise ConfigError("n_space must be >= 1")
            if self.dx is None:
                object.__setattr__(self, "dx", self.length / (self.n_space + 1))
            if init is not None and len(init) != self.n_space:
                raise ConfigError("initial profile length must equal n_space")

    @property
    def times(self):
        return self.dt * np.arange(self.n_steps + 1)

    def to_dict(self):
        d = asdict(self)
        d["initial_state"] = None if self.initial_state is None else list(self.initial_state)
        d["boundary"] = list(self.boundary)
        d["b_schedule"] = [list(p) for p in self.b_schedule]
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown simulation keys {sorted(unknown)}")
        return cls(**d)


def rhs_function(system, p):
    """Vector field ``f(u)`` of a built-in ODE system (autonomous)."""
    if system == "lorenz63":
        s, r, b = p["sigma"], p["rho"], p["beta"]
        return lambda u: np.array([s * (u[1] - u[0]), u[0] * (r - u[2]) - u[1],
                                   u[0] * u[1] - b * u[2]])
    if system == "lotka_volterra":
        a, b, d, g = p["alpha"], p["beta"], p["delta"], p["gamma"]
        return lambda u: np.array([a * u[0] - b * u[0] * u[1], d * u[0] * u[1] - g * u[1]])
    if system == "cubic_oscillator":
        a = p["a"]
        return lambda u: -a * np.asarray(u) ** 3
    if system == "linear_2d":
        A = linear_2d_matrix(p)
        return lambda u: A @ u
    raise ConfigError(f"{system!r} is not an ODE system")


def linear_2d_matrix(p):
    return np.array([[p["a11"], p["a12"]], [p["a21"], p["a22"]]])


def rk4_solve(rhs, y0, dt, n_steps):
    """Classical fixed-step fourth-order Runge-Kutta.

    Returns an ``(n_steps + 1, dim)`` trajectory including ``y0``.
    """
    y = np.array(y0, dtype=float).ravel()
    out = np.empty((n_steps + 1, y.size))
    out[0] = y
    for i in range(n_steps):
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * dt * k1)
            k3 = rhs(y + 0.5 * dt * k2)
            k4 = rhs(y + dt * k3)
            y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise DivergenceError(f"non-finite state at step {i + 1}", step=i + 1)
        out[i + 1] = y
    return out


def rk4_integrate(spec):
    """Integrate a built-in ODE system; noise is added when requested."""
    if spec.system not in ODE_SYSTEMS:
        raise ConfigError(f"{spec.system!r} is not an ODE system")
    traj = rk4_solve(rhs_function(spec.system, spec.parameters), spec.initial_state,
                     spec.dt, spec.n_steps)
    data = Dataset(Grid(spec.times), traj)
    if spec.noise_level > 0:
        data = add_noise(data, spec.noise_level, spec.seed)
    return data


def diffusion_propagator(b, dt, dx, n_interior):
    """Explicit-Euler transition matrices of ``u_t = b u_xx``.

    Returns ``(M, M_b)``: the ``n x n`` tridiagonal interior operator with
    ``1 - 2c`` on the diagonal and ``c`` beside it, and the ``n x 2``
    boundary operator with ``c`` in its two corners, ``c = b dt / dx^2``.
    If any argument is a :class:`fractions.Fraction` the matrices are object
    arrays of exact fractions.
    """
    c = b * dt / dx**2
    if c > 0.5:
        raise StabilityError(f"stability ratio c = {float(c):.6g} exceeds 0.5")
    if c < 0:
        raise ConfigError("diffusion coefficient must be non-negative")
    n = int(n_interior)
    exact = isinstance(c, Fraction)
    dtype = object if exact else float
    zero = Fraction(0) if exact else 0.0
    M = np.full((n, n), zero, dtype=dtype)
    Mb = np.full((n, 2), zero, dtype=dtype)
    for i in range(n):
        M[i, i] = 1 - 2 * c
        if i + 1 < n:
            M[i, i + 1] = M[i + 1, i] = c
    Mb[0, 0] = c
    Mb[-1, 1] += c
    return M, Mb


def default_profile(n_space, length=1.0):
    x = np.linspace(0, length, n_space + 2)[1:-1]
    k = np.pi / length
    return np.sin(k * x) + 0.5 * np.sin(3 * k * x) + 0.25 * np.sin(5 * k * x)


def b_at(spec, t):
    b = spec.parameters["b"]
    for start, value in spec.b_schedule:
        if t >= start - 1e-12 * max(1.0, abs(start)):
            b = value
    return b


def simulate_diffusion(spec):
    """March ``U(t + dt) = M U(t) + M_b U_b`` from the initial profile.

    The stability ratio is checked for every diffusion coefficient in the
    schedule before stepping.
    """
    if spec.system != "diffusion_1d":
        raise ConfigError("simulate_diffusion needs system 'diffusion_1d'")
    n, dx, dt = spec.n_space, spec.dx, spec.dt
    for b in {spec.parameters["b"], *(v for _, v in spec.b_schedule)}:
        diffusion_propagator(b, dt, dx, 1)
    u = (default_profile(n, spec.length) if spec.initial_state is None
         else np.array(spec.initial_state))
    ub = np.array(spec.boundary)
    times = spec.times
    cache = {}
    field_ = np.empty((n + 2, times.size))
    field_[0, :], field_[-1, :] = ub
    field_[1:-1, 0] = u
    for k in range(spec.n_steps):
        b = b_at(spec, times[k])
        if b not in cache:
            cache[b] = diffusion_propagator(b, dt, dx, n)
        M, Mb = cache[b]
        u = M @ u + Mb @ ub
        field_[1:-1, k + 1] = u
    xs = dx * np.arange(n + 2)
    data = Dataset(Grid(times, xs), field_[:, :, None], ("u1",))
    if spec.noise_level > 0:
        data = add_noise(data, spec.noise_level, spec.seed)
    return data


def simulate(spec):
    """Dispatch to :func:`rk4_integrate` or :func:`simulate_diffusion`."""
    if spec.system == "diffusion_1d":
        return simulate_diffusion(spec)
    return rk4_integrate(spec)


def add_noise(data, sigma_rel, seed):
    """Add i.i.d. Gaussian noise scaled by each component's sample sd."""
    if sigma_rel < 0:
        raise ConfigError("noise level must be non-negative")
    if sigma_rel == 0:
        return data
    rng = np.random.default_rng(seed)
    sd = data.values.reshape(-1, data.n_components).std(axis=0)
    noisy = data.values + sigma_rel * sd * rng.standard_normal(data.values.shape)
    return Dataset(data.grid, noisy, data.component_names, data.covariates,
                   data.covariate_names)


def true_terms(spec):
    """Ground-truth right-hand sides as ``{component: {descriptor: coef}}``.

    Descriptors follow :mod:`dediscover.library` naming with default
    component names ``u1, u2, ...``.
    """
    p = spec.parameters
    if spec.system == "lorenz63":
        return {"u1": {"u1": -p["sigma"], "u2": p["sigma"]},
                "u2": {"u1": p["rho"], "u2": -1.0, "u1·u3": -1.0},
                "u3": {"u1·u2": 1.0, "u3": -p["beta"]}}
    if spec.system == "lotka_volterra":
        return {"u1": {"u1": p["alpha"], "u1·u2": -p["beta"]},
                "u2": {"u1·u2": p["delta"], "u2": -p["gamma"]}}
    if spec.system == "cubic_oscillator":
        return {f"u{i + 1}": {f"u{i + 1}^3": -p["a"]} for i in range(len(spec.initial_state))}
    if spec.system == "linear_2d":
        return {"u1": {"u1": p["a11"], "u2": p["a12"]},
                "u2": {"u1": p["a21"], "u2": p["a22"]}}
    if spec.b_schedule:
        raise ConfigError("time-varying diffusion has no single coefficient matrix")
    return {"u1": {"u1_xx": p["b"]}}


def true_coefficients(spec, descriptors, component_names=None):
    """Ground truth as a ``D x N`` array aligned with ``descriptors``."""
    terms = true_terms(spec)
    names = component_names or tuple(terms)
    M = np.zeros((len(descriptors), len(names)))
    for n, name in enumerate(names):
        for d, v in terms[name].items():
            if d not in descriptors:
                raise ConfigError(f"true term {d!r} missing from library")
            M[list(descriptors).index(d), n] = v
    return M
