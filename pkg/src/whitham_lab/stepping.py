"""Time integration: nonlinear runs, frozen-coefficient linear solves, the
exact propagator of the dispersive linear part, and Picard iteration.

One fixed-step RK4 scheme serves everything. Step size comes from a CFL
heuristic unless overridden, and t_end is always hit exactly by rounding
the step count up. States are stored at every step; norm reports are
attached at a configurable cadence and drive cavitation and blow-up checks.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import EnergyReport, default_s, default_t0, energy_report
from .operators import (ModelParams, State, apply_coefficient, bandlimit,
                        energy_norm, rhs)
from .spectral import (ScalarField, SpectralGrid, VectorField, apply_symbol,
                       spectral_derivative)
from .symbols import symbol_table


class StepperError(RuntimeError):
    pass


class NonFiniteState(StepperError):
    def __init__(self, time: float):
        super().__init__(f"state became non-finite at t = {time:.6g}")
        self.time = time


class CavitationViolated(StepperError):
    def __init__(self, time: float, min_depth: float, h_min: float):
        super().__init__(
            f"depth {min_depth:.6g} fell below the floor {h_min:.6g} "
            f"at t = {time:.6g}")
        self.time = time
        self.min_depth = min_depth


class BlowUpDetected(StepperError):
    """Norm escape past the configured multiple of its initial value.

    The partial trajectory up to the offending step is attached so callers
    can still inspect the growth curve.
    """

    def __init__(self, time: float, norm: float, trajectory: "Trajectory"):
        super().__init__(f"energy norm reached {norm:.6g} at t = {time:.6g}")
        self.time = time
        self.norm = norm
        self.trajectory = trajectory


@dataclass
class StepperConfig:
    cfl: float = 0.4
    t_end: float = 1.0
    dt_override: float | None = None
    scheme: str = "rk4"
    alpha: float = 0.0
    picard_tol: float = 1e-10
    picard_max_iter: int = 50

    def __post_init__(self):
        if self.cfl <= 0:
            raise ValueError("cfl must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        if self.dt_override is not None and self.dt_override <= 0:
            raise ValueError("dt_override must be positive")
        if self.scheme != "rk4":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0,1]")
        if self.picard_tol <= 0 or self.picard_max_iter < 1:
            raise ValueError("bad picard settings")


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    states: list[State] = field(default_factory=list)
    reports: list[EnergyReport | None] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final(self) -> State:
        return self.states[-1]

    def append(self, state: State, report: EnergyReport | None = None):
        self.times.append(state.time)
        self.states.append(state)
        self.reports.append(report)

    def interpolate(self, t: float) -> State:
        """Linear-in-time interpolant; clamps outside the stored range."""
        if not self.states:
            raise ValueError("empty trajectory")
        if t <= self.times[0]:
            out = self.states[0].copy()
        elif t >= self.times[-1]:
            out = self.states[-1].copy()
        else:
            k = bisect_right(self.times, t) - 1
            ta, tb = self.times[k], self.times[k + 1]
            theta = (t - ta) / (tb - ta)
            out = (1.0 - theta) * self.states[k] + theta * self.states[k + 1]
        out.time = t
        return out


def cfl_dt(grid: SpectralGrid, params: ModelParams,
           initial: State | None = None, cfl: float = 0.4) -> float:
    """Heuristic stable step: cfl * dx over an overestimate of the fastest
    signal speed (dispersive plus advective)."""
    g1 = symbol_table(params.pair.g1, grid)
    g2 = symbol_table(params.pair.g2, grid)
    vmax = 1.0 if initial is None else float(np.max(np.abs(initial.v.values)))
    c = (float(np.max(g1)) ** 2
         + params.epsilon * (1.0 + float(np.max(np.abs(g2))) ** 2 * vmax))
    return cfl * grid.dx / c


def _n_steps(t_end: float, dt_nominal: float) -> int:
    return max(1, math.ceil(t_end / dt_nominal - 1e-9))


def step_rk4(state: State, params: ModelParams, dt: float) -> State:
    k1 = rhs(state, params)
    k2 = rhs(state + (dt / 2.0) * k1, params)
    k3 = rhs(state + (dt / 2.0) * k2, params)
    k4 = rhs(state + dt * k3, params)
    out = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    out.time = state.time + dt
    return out


def run(initial: State, params: ModelParams, config: StepperConfig, *,
        s: float | None = None, t0: float | None = None, cadence: int = 1,
        blowup_factor: float = 100.0) -> Trajectory:
    """Integrate the nonlinear system to t_end with fixed-step RK4.

    The initial state is band-limited first. Reports are attached every
    `cadence` steps (always at the first and last); at report times the
    depth floor and the blow-up threshold are enforced, raising
    CavitationViolated or BlowUpDetected.
    """
    grid = initial.grid
    if t0 is None:
        t0 = default_t0(grid.dim)
    if s is None:
        s = default_s(grid.dim)
    if cadence < 1:
        raise ValueError("cadence must be >= 1")

    state = bandlimit(initial)
    dt_nominal = config.dt_override or cfl_dt(grid, params, state, config.cfl)
    # t_end = 0 is a degenerate run: report the initial state, take no steps
    n_steps = 0 if config.t_end == 0 else _n_steps(config.t_end, dt_nominal)
    dt = config.t_end / n_steps if n_steps else 0.0

    traj = Trajectory(meta={"dt": dt, "n_steps": n_steps, "scheme": config.scheme,
                            "s": s, "t0": t0, "blowup_factor": blowup_factor})
    first = energy_report(state, params, s, t0)
    _guard(first, params, traj, blowup_factor, threshold=None)
    traj.append(state, first)
    threshold = blowup_factor * max(first.x_norm_s, 1e-12)

    for k in range(1, n_steps + 1):
        try:
            state = step_rk4(state, params, dt)
        except FloatingPointError:
            raise NonFiniteState(traj.times[-1] + dt) from None
        if k % cadence == 0 or k == n_steps:
            rep = energy_report(state, params, s, t0)
            traj.append(state, rep)
            _guard(rep, params, traj, blowup_factor, threshold)
        else:
            traj.append(state, None)
    return traj


def _guard(rep: EnergyReport, params: ModelParams, traj: Trajectory,
           blowup_factor: float, threshold: float | None):
    if not rep.is_finite():
        raise NonFiniteState(rep.time)
    if params.epsilon > 0 and rep.min_depth < params.h_min:
        raise CavitationViolated(rep.time, rep.min_depth, params.h_min)
    if threshold is not None and rep.x_norm_s > threshold:
        raise BlowUpDetected(rep.time, rep.x_norm_s, traj)


def linear_propagator(state: State, params: ModelParams, t: float) -> State:
    """Exact flow of the eps = 0 system over time t, mode by mode.

    Each wavenumber evolves under a matrix M with M^3 = -(w^2) M, w the
    dispersive frequency, so the exponential closes in three terms.
    """
    grid = state.grid
    g1 = symbol_table(params.pair.g1, grid)
    g1sq = g1 * g1
    # signed wavenumber tables matching the derivative convention
    xi = [grid._ik[j].imag for j in range(grid.dim)]
    omega = g1 * np.sqrt(sum(x * x for x in xi))

    zh = grid.fft(state.zeta.values)
    vh = [grid.fft(c) for c in state.v.values]

    a = np.where(omega > 0, np.sin(omega * t) / np.where(omega > 0, omega, 1.0), t)
    b = np.where(omega > 0,
                 (1.0 - np.cos(omega * t)) / np.where(omega > 0, omega**2, 1.0),
                 t * t / 2.0)

    mz = -1j * g1sq * sum(x * h for x, h in zip(xi, vh))
    mv = [-1j * x * zh for x in xi]
    m2z = -(omega**2) * zh
    sum_xi_v = sum(x * h for x, h in zip(xi, vh))
    m2v = [-x * g1sq * sum_xi_v for x in xi]

    new_z = zh + a * mz + b * m2z
    new_v = [h + a * mvi + b * m2vi for h, mvi, m2vi in zip(vh, mv, m2v)]
    return State(ScalarField(grid, grid.ifft(new_z)),
                 VectorField(grid, np.stack([grid.ifft(h) for h in new_v])),
                 time=state.time + t)


def _linear_rhs(frozen: State, u: State, params: ModelParams,
                jalpha) -> State:
    """Tendency of the frozen-coefficient linear system, optionally through
    the smoothing multiplier."""
    uu = u if jalpha is None else State(
        apply_symbol(jalpha, u.zeta), apply_symbol(jalpha, u.v), u.time)
    total = None
    for j in range(frozen.grid.dim):
        du = State(spectral_derivative(uu.zeta, j),
                   spectral_derivative(uu.v, j), u.time)
        term = apply_coefficient(frozen, params, j, du)
        total = term if total is None else total + term
    return -1.0 * total


def linearized_solve(frozen_traj: Trajectory, initial: State,
                     params: ModelParams, config: StepperConfig,
                     forcing=None) -> Trajectory:
    """RK4 for the linear system with coefficients frozen along a given
    trajectory (linearly interpolated at stage times).

    config.alpha > 0 inserts the smoothing multiplier (1 + alpha |xi|^2)^(-1/2)
    in front of every derivative of the unknown, the mollification used to
    build solutions; alpha = 0 is the plain linearized system. forcing, if
    given, is a callable t -> State added to the tendency.
    """
    grid = initial.grid
    jalpha = None
    if config.alpha > 0:
        jalpha = 1.0 / np.sqrt(1.0 + config.alpha * grid.xi_abs**2)

    u = bandlimit(initial)
    t_start = u.time
    dt_nominal = config.dt_override or cfl_dt(grid, params,
                                              frozen_traj.states[0], config.cfl)
    n_steps = _n_steps(config.t_end, dt_nominal)
    dt = config.t_end / n_steps

    def f(t: float, w: State) -> State:
        out = _linear_rhs(frozen_traj.interpolate(t), w, params, jalpha)
        if forcing is not None:
            out = out + forcing(t)
        return out

    traj = Trajectory(meta={"dt": dt, "n_steps": n_steps, "alpha": config.alpha,
                            "kind": "linearized"})
    traj.append(u)
    for k in range(n_steps):
        t = t_start + k * dt
        k1 = f(t, u)
        k2 = f(t + dt / 2.0, u + (dt / 2.0) * k1)
        k3 = f(t + dt / 2.0, u + (dt / 2.0) * k2)
        k4 = f(t + dt, u + dt * k3)
        u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        u.time = t_start + (k + 1) * dt
        if not u.is_finite():
            raise NonFiniteState(u.time)
        traj.append(u)
    return traj


def picard_solve(initial: State, params: ModelParams,
                 config: StepperConfig) -> Trajectory:
    """Iterate the frozen-coefficient solves to the nonlinear solution.

    The zeroth iterate is the initial state held constant in time; each
    round solves the linear system along the previous iterate. Convergence
    is declared when successive iterates agree in the level-zero energy
    norm, uniformly over the shared time grid, to picard_tol.

    meta carries `iterations` (solves whose update was at or above
    tolerance; the confirming solve is not counted), the full `cauchy`
    sequence, and `converged`.
    """
    grid = initial.grid
    u0 = bandlimit(initial)
    dt_nominal = config.dt_override or cfl_dt(grid, params, u0, config.cfl)
    n_steps = _n_steps(config.t_end, dt_nominal)
    sub = StepperConfig(cfl=config.cfl, t_end=config.t_end,
                        dt_override=config.t_end / n_steps,
                        alpha=config.alpha)

    current = Trajectory(meta={"kind": "picard-seed"})
    for k in range(n_steps + 1):
        s0 = u0.copy()
        s0.time = u0.time + k * sub.dt_override
        current.append(s0)

    cauchy: list[float] = []
    converged = False
    for _ in range(config.picard_max_iter):
        nxt = linearized_solve(current, u0, params, sub)
        diff = max(energy_norm(a - b, params, 0.0)
                   for a, b in zip(nxt.states, current.states))
        cauchy.append(diff)
        current = nxt
        if diff < config.picard_tol:
            converged = True
            break

    iterations = sum(1 for d in cauchy if d >= config.picard_tol)
    current.meta.update({"kind": "picard", "iterations": iterations,
                         "cauchy": cauchy, "converged": converged,
                         "dt": sub.dt_override, "n_steps": n_steps})
    return current
