"""Reference computational models: fixed-step RK4 integration, a hysteretic
single-degree-of-freedom oscillator, a two-mass oscillator with a cubic
coupling spring, and a random sinusoidal-superposition excitation generator.

Simulators are pure functions of (parameters, excitation, grid) and may be
run concurrently. Batched variants integrate many parameter draws at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .randvars import DiscreteUniform, RandomVector, Uniform
from .validation import check_positive_int


class IntegrationBlowupError(RuntimeError):
    """Raised when the state becomes non-finite during integration."""

    def __init__(self, time):
        super().__init__(f"non-finite state encountered at t={time:.6g}")
        self.time = time


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid {0, dt, ..., (steps-1)*dt}."""

    dt: float
    steps: int
    t0: float = 0.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.steps < 2:
            raise ValueError("need at least 2 grid points")
        if self.t0 != 0.0:
            raise ValueError("grids start at t=0")

    @classmethod
    def from_duration(cls, t_end, dt):
        return cls(dt=dt, steps=int(round(t_end / dt)) + 1)

    @property
    def t_end(self):
        return (self.steps - 1) * self.dt

    def times(self):
        return np.arange(self.steps) * self.dt


@dataclass(frozen=True)
class Trajectory:
    """Scalar time series sampled on a :class:`TimeGrid`."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.shape[0] != self.grid.steps:
            raise ValueError("values must be 1-D and match the grid length")
        if not np.all(np.isfinite(v)):
            raise ValueError("trajectory values must be finite")
        object.__setattr__(self, "values", v)


def rk4_integrate(rhs, init, grid: TimeGrid, substeps=1):
    """Classical fixed-step 4th-order Runge-Kutta integration.

    Parameters
    ----------
    rhs : callable (t, state) -> dstate
        State derivative; ``state`` may carry a leading batch dimension.
    init : array-like
        Initial state, shape (n_state,) or (n_batch, n_state).
    grid : TimeGrid
        Output sampling grid.
    substeps : int
        Internal integration steps per grid step.

    Returns
    -------
    ndarray of shape (grid.steps, ...) holding the state at each grid time.

    Raises
    ------
    IntegrationBlowupError
        If the state becomes non-finite, reporting the time of blow-up.
    """
    check_positive_int(substeps, "substeps")
    state = np.array(init, dtype=float)
    out = np.empty((grid.steps,) + state.shape)
    out[0] = state
    h = grid.dt / substeps
    for k in range(grid.steps - 1):
        t = k * grid.dt
        for j in range(substeps):
            state = _rk4_step(rhs, t + j * h, state, h)
        if not np.all(np.isfinite(state)):
            raise IntegrationBlowupError((k + 1) * grid.dt)
        out[k + 1] = state
    return out


def _rk4_step(rhs, t, state, h):
    k1 = rhs(t, state)
    k2 = rhs(t + 0.5 * h, state + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, state + 0.5 * h * k2)
    k4 = rhs(t + h, state + h * k3)
    return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# ---------------------------------------------------------------------------
# Hysteretic oscillator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoucWenParams:
    """Parameters of the hysteretic oscillator under sinusoidal forcing.

    The equation of motion for the displacement y with hysteretic state z is

        y'' + 2*zeta*omega*y' + omega^2*(rho*y + (1-rho)*z) = -x(t)
        z'  = gamma*y' - alpha*|y'|*|z|**(n-1)*z - beta_hyst*y'*|z|**n

    with forcing x(t) = A_amp*sin(omega_x*t).
    """

    zeta: float
    omega: float
    alpha: float
    A_amp: float
    omega_x: float
    rho: float = 0.0
    gamma: float = 1.0
    n_exp: float = 1.0
    beta_hyst: float = 50.0

    def __post_init__(self):
        if self.zeta <= 0 or self.omega <= 0:
            raise ValueError("zeta and omega must be > 0")


def bouc_wen_random_vector() -> RandomVector:
    """Uncertain inputs (zeta, omega, alpha, A_amp, omega_x) of the
    hysteretic oscillator, each uniform with the tabulated mean/std."""
    return RandomVector([
        Uniform.from_mean_std(0.02, 0.002),
        Uniform.from_mean_std(2.0 * math.pi, 0.2 * math.pi),
        Uniform.from_mean_std(50.0, 5.0),
        Uniform.from_mean_std(1.0, 0.1),
        Uniform.from_mean_std(math.pi, 0.1 * math.pi),
    ])


def simulate_bouc_wen_batch(theta, grid: TimeGrid, *, rho=0.0, gamma=1.0,
                            n_exp=1.0, beta_hyst=50.0, substeps=1):
    """Integrate the hysteretic oscillator for many parameter draws at once.

    Parameters
    ----------
    theta : ndarray of shape (n, 5)
        Columns (zeta, omega, alpha, A_amp, omega_x).
    grid : TimeGrid
    rho, gamma, n_exp, beta_hyst : float
        Shared deterministic parameters.
    substeps : int
        Internal RK4 steps per grid step.

    Returns
    -------
    displacements : ndarray of shape (n, grid.steps)
    ok : boolean ndarray of shape (n,)
        False for draws whose integration blew up; their rows are NaN from
        the blow-up point on.
    """
    th = np.atleast_2d(np.asarray(theta, dtype=float))
    if th.shape[1] != 5:
        raise ValueError("theta must have 5 columns (zeta, omega, alpha, A_amp, omega_x)")
    n = th.shape[0]
    zeta, omega, alpha, a_amp, omega_x = (th[:, j] for j in range(5))
    two_zw = 2.0 * zeta * omega
    w2 = omega ** 2

    def rhs(t, s):
        y, v, z = s[:, 0], s[:, 1], s[:, 2]
        forcing = a_amp * np.sin(omega_x * t)
        az = np.abs(z)
        dv = -forcing - two_zw * v - w2 * (rho * y + (1.0 - rho) * z)
        dz = gamma * v - alpha * np.abs(v) * az ** (n_exp - 1.0) * z - beta_hyst * v * az ** n_exp
        return np.column_stack((v, dv, dz))

    state = np.zeros((n, 3))
    out = np.empty((n, grid.steps))
    out[:, 0] = 0.0
    ok = np.ones(n, dtype=bool)
    h = grid.dt / substeps
    for k in range(grid.steps - 1):
        t = k * grid.dt
        for j in range(substeps):
            state = _rk4_step(rhs, t + j * h, state, h)
        bad = ~np.all(np.isfinite(state), axis=1)
        if np.any(bad & ok):
            ok &= ~bad
            state[bad] = 0.0
        out[:, k + 1] = np.where(ok, state[:, 0], np.nan)
    return out, ok


def simulate_bouc_wen(params: BoucWenParams, grid: TimeGrid, init=None,
                      substeps=1) -> Trajectory:
    """Simulate a single hysteretic-oscillator trajectory.

    Returns the displacement sampled on ``grid``. The initial state
    (y, y', z) defaults to rest.
    """
    if init is None:
        init = np.zeros(3)
    init = np.asarray(init, dtype=float)
    if init.shape != (3,):
        raise ValueError("init must have shape (3,): (y, velocity, z)")
    p = params

    def rhs(t, s):
        y, v, z = s
        forcing = p.A_amp * math.sin(p.omega_x * t)
        az = abs(z)
        dv = -forcing - 2.0 * p.zeta * p.omega * v - p.omega ** 2 * (p.rho * y + (1.0 - p.rho) * z)
        dz = p.gamma * v - p.alpha * abs(v) * az ** (p.n_exp - 1.0) * z - p.beta_hyst * v * az ** p.n_exp
        return np.array([v, dv, dz])

    states = rk4_integrate(rhs, init, grid, substeps=substeps)
    return Trajectory(grid, states[:, 0])


# ---------------------------------------------------------------------------
# Two-mass oscillator with cubic coupling spring
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoupledOscParams:
    """Two-mass oscillator: lower mass m_u rides on a linear ground spring
    k_u driven by the excitation, upper mass m_s is attached through a
    cubic spring k_s and a linear damper c.

        m_u*y1'' = k_s*(y2-y1)^3 + c*(y2'-y1') + k_u*(x(t)-y1)
        m_s*y2'' = -k_s*(y2-y1)^3 - c*(y2'-y1')
    """

    k_u: float
    k_s: float
    m_u: float
    m_s: float
    c: float

    def __post_init__(self):
        for name in ("k_u", "k_s", "m_u", "m_s", "c"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    @classmethod
    def strong_damping(cls):
        return cls(k_u=5000.0, k_s=1000.0, m_u=50.0, m_s=10.0, c=600.0)

    @classmethod
    def weak_damping(cls):
        return cls(k_u=5000.0, k_s=1000.0, m_u=50.0, m_s=10.0, c=50.0)


def coupled_random_vector(cov=0.2) -> RandomVector:
    """Uncertain structural parameters (k_u, k_s, m_u, m_s, c), each normal
    with the tabulated mean and coefficient of variation."""
    from .randvars import Normal

    means = (5000.0, 1000.0, 50.0, 10.0, 600.0)
    return RandomVector([Normal.from_mean_cov(m, cov) for m in means])


@dataclass(frozen=True)
class SinSuperposition:
    """Average of sinusoidal terms x(t) = mean_i A_i*sin(2*pi*B_i*t + C_i)."""

    amps: np.ndarray
    freqs: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.amps, dtype=float))
        b = np.atleast_1d(np.asarray(self.freqs, dtype=float))
        c = np.atleast_1d(np.asarray(self.phases, dtype=float))
        if not (a.shape == b.shape == c.shape) or a.ndim != 1 or a.size < 1:
            raise ValueError("amps, freqs, phases must be 1-D of equal length >= 1")
        object.__setattr__(self, "amps", a)
        object.__setattr__(self, "freqs", b)
        object.__setattr__(self, "phases", c)

    @property
    def n_terms(self):
        return self.amps.size

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        phase = 2.0 * math.pi * np.multiply.outer(t, self.freqs) + self.phases
        return (np.sin(phase) @ self.amps) / self.n_terms


@dataclass(frozen=True)
class ExcitationDistribution:
    """Distribution of the random sinusoidal-superposition excitation:
    the number of terms is discrete uniform, and each term draws an
    amplitude, a frequency and a phase independently."""

    n_terms: DiscreteUniform = field(default_factory=lambda: DiscreteUniform(1, 10))
    amp: Uniform = field(default_factory=lambda: Uniform(-1.0, 1.0))
    freq: Uniform = field(default_factory=lambda: Uniform(-1.0, 1.0))
    phase: Uniform = field(default_factory=lambda: Uniform(-math.pi, math.pi))

    def sample(self, rng) -> SinSuperposition:
        k = int(self.n_terms.sample(rng, 1)[0])
        return SinSuperposition(
            amps=self.amp.sample(rng, k),
            freqs=self.freq.sample(rng, k),
            phases=self.phase.sample(rng, k),
        )


def sample_excitation(dist: ExcitationDistribution, seed=None, rng=None) -> SinSuperposition:
    """Draw one random excitation; reproducible for a given seed."""
    if rng is None:
        rng = np.random.default_rng(seed)
    return dist.sample(rng)


def eval_excitation(excitation: SinSuperposition, grid: TimeGrid) -> Trajectory:
    """Sample an excitation on a time grid."""
    return Trajectory(grid, excitation(grid.times()))


def _excitation_values(excitation, times, grid):
    """Evaluate an excitation given as SinSuperposition, callable, or
    Trajectory (linearly interpolated) at arbitrary times."""
    if isinstance(excitation, SinSuperposition) or callable(excitation):
        return np.asarray(excitation(times), dtype=float)
    if isinstance(excitation, Trajectory):
        return np.interp(times, excitation.grid.times(), excitation.values)
    raise TypeError("excitation must be SinSuperposition, callable, or Trajectory")


def simulate_coupled(params: CoupledOscParams, excitation, grid: TimeGrid,
                     init=None, substeps=1):
    """Simulate the two-mass oscillator for one excitation.

    Parameters
    ----------
    params : CoupledOscParams
    excitation : SinSuperposition, callable t -> x, or Trajectory on ``grid``
    grid : TimeGrid
    init : array-like of shape (4,), state (y1, y1', y2, y2'), default rest
    substeps : int

    Returns
    -------
    (y1, y2) : pair of Trajectory
        Displacements of the lower and upper mass.
    """
    theta = np.array([[params.k_u, params.k_s, params.m_u, params.m_s, params.c]])
    inits = None if init is None else np.asarray(init, dtype=float)[None, :]
    y1, y2, ok = simulate_coupled_batch(theta, [excitation], grid,
                                        substeps=substeps, inits=inits)
    if not ok[0]:
        raise IntegrationBlowupError(grid.times()[np.argmax(~np.isfinite(y2[0]))])
    return Trajectory(grid, y1[0]), Trajectory(grid, y2[0])


def simulate_coupled_batch(theta, excitations, grid: TimeGrid, *, substeps=1,
                           inits=None):
    """Integrate the two-mass oscillator for many (parameters, excitation)
    pairs at once.

    Parameters
    ----------
    theta : ndarray of shape (n, 5)
        Columns (k_u, k_s, m_u, m_s, c).
    excitations : sequence of length n of SinSuperposition/callable/Trajectory
    grid : TimeGrid
    substeps : int
    inits : optional ndarray of shape (n, 4)

    Returns
    -------
    y1, y2 : ndarray of shape (n, grid.steps)
    ok : boolean ndarray of shape (n,)
    """
    th = np.atleast_2d(np.asarray(theta, dtype=float))
    if th.shape[1] != 5:
        raise ValueError("theta must have 5 columns (k_u, k_s, m_u, m_s, c)")
    n = th.shape[0]
    if len(excitations) != n:
        raise ValueError("need one excitation per parameter row")
    k_u, k_s, m_u, m_s, c = (th[:, j] for j in range(5))

    # Excitation values at every RK4 stage time: spacing h/2 on the fine grid.
    h = grid.dt / substeps
    n_fine = 2 * substeps * (grid.steps - 1) + 1
    t_fine = np.arange(n_fine) * (h / 2.0)
    x_fine = np.empty((n, n_fine))
    for i, exc in enumerate(excitations):
        x_fine[i] = _excitation_values(exc, t_fine, grid)

    def rhs(fine_idx, s):
        y1, v1, y2, v2 = s[:, 0], s[:, 1], s[:, 2], s[:, 3]
        spring = k_s * (y2 - y1) ** 3
        damper = c * (v2 - v1)
        x_t = x_fine[:, fine_idx]
        a1 = (spring + damper + k_u * (x_t - y1)) / m_u
        a2 = (-spring - damper) / m_s
        return np.column_stack((v1, a1, v2, a2))

    state = np.zeros((n, 4)) if inits is None else np.array(inits, dtype=float)
    if state.shape != (n, 4):
        raise ValueError("inits must have shape (n, 4)")
    y1_out = np.empty((n, grid.steps))
    y2_out = np.empty((n, grid.steps))
    y1_out[:, 0] = state[:, 0]
    y2_out[:, 0] = state[:, 2]
    ok = np.ones(n, dtype=bool)
    for k in range(grid.steps - 1):
        for j in range(substeps):
            base = 2 * (k * substeps + j)
            k1 = rhs(base, state)
            k2 = rhs(base + 1, state + 0.5 * h * k1)
            k3 = rhs(base + 1, state + 0.5 * h * k2)
            k4 = rhs(base + 2, state + h * k3)
            state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        bad = ~np.all(np.isfinite(state), axis=1)
        if np.any(bad & ok):
            ok &= ~bad
            state[bad] = 0.0
        y1_out[:, k + 1] = np.where(ok, state[:, 0], np.nan)
        y2_out[:, k + 1] = np.where(ok, state[:, 2], np.nan)
    return y1_out, y2_out, ok


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------

def trajectory_to_csv(path, traj: Trajectory):
    """Write a trajectory as ``t,value`` rows at full double precision."""
    times = traj.grid.times()
    with open(path, "w", encoding="utf-8") as f:
        f.write("t,value\n")
        for t, v in zip(times, traj.values):
            f.write(f"{t:.17g},{v:.17g}\n")


def coupled_run_to_csv(path, grid: TimeGrid, x, y1, y2):
    """Write one coupled-oscillator run as ``t,x,y1,y2`` rows."""
    times = grid.times()
    with open(path, "w", encoding="utf-8") as f:
        f.write("t,x,y1,y2\n")
        for t, a, b, d in zip(times, x, y1, y2):
            f.write(f"{t:.17g},{a:.17g},{b:.17g},{d:.17g}\n")
