"""Parameter sweeps and scaling experiments over the stepping layer.

Five study kinds, all pure functions of (spec, seed) so reruns reproduce
every number:

  energy_growth  fit exponential growth rates of the energy norm and
                 regress them against the nonlinearity parameter;
  timescale      sweep (epsilon, mu) cells to t = T/epsilon and record
                 completion and norm growth, blow-ups included as data;
  stability      cross-model error against residual-based bound, swept
                 over mu;
  mu_scaling     log-log slope of the cross-model gap against mu;
  convergence    temporal (step halving) and spatial (grid doubling)
                 self-convergence ladders.

Sweep cells are independent; they run on a small thread pool whose width
is capped by the WHITHAM_LAB_THREADS environment variable, with results
assembled in sweep order regardless of completion order.
"""

from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .diagnostics import default_s
from .io import (RunConfig, ValidationError, build_grid, config_from_dict,
                 config_to_dict, initial_state, model_params, validate_config)
from .operators import State, apply_coefficient, energy_norm, make_state
from .spectral import ScalarField, make_grid, spectral_derivative
from .stepping import (BlowUpDetected, StepperError, Trajectory, cfl_dt,
                       linear_propagator, run)

STUDY_KINDS = ("energy_growth", "timescale", "stability", "mu_scaling",
               "convergence")


class StudyError(RuntimeError):
    pass


@dataclass
class StudySpec:
    kind: str
    base: RunConfig
    epsilons: tuple[float, ...] = ()
    mus: tuple[float, ...] = ()
    ns: tuple[int, ...] = ()
    dts: tuple[float, ...] = ()
    models: tuple = ()              # second entry is the comparison model
    t_target: float = 0.5           # timescale: run to t_target/epsilon
    fit_window: tuple[float, float] = (1.1, 4.0)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in STUDY_KINDS:
            raise ValueError(f"unknown study kind {self.kind!r}")
        self.epsilons = tuple(self.epsilons)
        self.mus = tuple(self.mus)
        self.ns = tuple(self.ns)
        self.dts = tuple(self.dts)
        self.models = tuple(self.models)
        lo, hi = self.fit_window
        if not 1.0 < lo < hi:
            raise ValueError("fit_window must satisfy 1 < lo < hi")


def _thread_map(fn, items):
    """Map preserving order; pool width from WHITHAM_LAB_THREADS."""
    items = list(items)
    cap = os.environ.get("WHITHAM_LAB_THREADS", "")
    try:
        workers = int(cap)
    except ValueError:
        workers = os.cpu_count() or 1
    workers = max(1, min(workers, len(items) or 1))
    if workers == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _derive(base: RunConfig, **overrides) -> RunConfig:
    """Deep copy of a config with some fields replaced, revalidated."""
    config = config_from_dict(config_to_dict(base))
    for key, value in overrides.items():
        if "." in key:
            head, tail = key.split(".", 1)
            setattr(getattr(config, head), tail, value)
        else:
            setattr(config, key, value)
    report = validate_config(config)
    if not report.ok:
        raise ValidationError(list(report.violations))
    return config


def _run_config(config: RunConfig, t_end: float | None = None,
                cadence: int | None = None) -> Trajectory:
    stepper = config.stepper
    if t_end is not None:
        stepper = dataclasses.replace(stepper, t_end=t_end)
    elif config.t_end_over_eps is not None:
        stepper = dataclasses.replace(stepper, t_end=config.t_end())
    init = initial_state(config)
    return run(init, model_params(config), stepper,
               s=config.s, t0=config.t0,
               cadence=cadence or config.output.csv_cadence,
               blowup_factor=config.output.blowup_factor)


# --- energy growth ------------------------------------------------------

@dataclass(frozen=True)
class GrowthFit:
    """Exponential fit norm(t) ~ kappa * exp(rate * t) on one run."""
    epsilon: float
    mu: float
    rate: float
    kappa: float
    window: tuple[float, float]
    whole_curve: bool           # fallback: window never entered
    rms_residual: float
    times: tuple[float, ...]
    norms: tuple[float, ...]


@dataclass(frozen=True)
class EnergyFitReport:
    fits: tuple[GrowthFit, ...]
    slope: float                # through-origin regression of rate vs epsilon
    regression_residuals: tuple[float, ...]

    @property
    def epsilons(self):
        return tuple(f.epsilon for f in self.fits)

    @property
    def rates(self):
        return tuple(f.rate for f in self.fits)

    def rows(self):
        return [{"epsilon": f.epsilon, "mu": f.mu, "rate": f.rate,
                 "kappa": f.kappa, "whole_curve": int(f.whole_curve),
                 "rms_residual": f.rms_residual} for f in self.fits]

    def summary(self):
        return {"kind": "energy_growth", "slope": self.slope,
                "epsilons": list(self.epsilons), "rates": list(self.rates)}


def _fit_growth(times, norms, window) -> tuple[float, float, tuple, bool, float]:
    times = np.asarray(times)
    norms = np.asarray(norms)
    lo, hi = window
    n0 = norms[0]
    mask = (norms >= lo * n0) & (norms <= hi * n0)
    whole = int(np.count_nonzero(mask)) < 2
    if whole:
        mask = np.ones_like(mask)
    t, y = times[mask], np.log(norms[mask])
    coef = np.polyfit(t, y, 1)
    rms = float(np.sqrt(np.mean((np.polyval(coef, t) - y) ** 2)))
    span = (float(t[0]), float(t[-1]))
    return float(coef[0]), float(math.exp(coef[1])), span, bool(whole), rms


def energy_growth_study(spec: StudySpec) -> EnergyFitReport:
    """Fit the growth rate of the energy norm per epsilon, then regress
    the rates against epsilon through the origin.

    Each run covers t_target/epsilon so all cells see the same stretch of
    slow time; epsilon = 0 falls back to the base stepper horizon.
    """
    if len(spec.epsilons) < 3:
        raise StudyError("energy_growth needs at least 3 epsilon values")

    def cell(eps: float) -> GrowthFit:
        config = _derive(spec.base, epsilon=eps)
        horizon = spec.t_target / eps if eps > 0 else None
        try:
            traj = _run_config(config, t_end=horizon)
        except BlowUpDetected as e:
            traj = e.trajectory
            reps = [r for r in traj.reports if r is not None]
            norms = np.array([r.x_norm_s for r in reps])
            if np.count_nonzero(norms >= spec.fit_window[0] * norms[0]) < 2:
                raise StudyError(
                    f"epsilon={eps}: blew up before the fit window") from None
        except StepperError as e:
            raise StudyError(f"epsilon={eps}: {e}") from None
        reps = [r for r in traj.reports if r is not None]
        times = [r.time for r in reps]
        norms = [r.x_norm_s for r in reps]
        rate, kappa, span, whole, rms = _fit_growth(times, norms,
                                                    spec.fit_window)
        return GrowthFit(eps, config.mu, rate, kappa, span, whole, rms,
                         tuple(times), tuple(norms))

    fits = tuple(_thread_map(cell, spec.epsilons))
    eps = np.array([f.epsilon for f in fits])
    rates = np.array([f.rate for f in fits])
    denom = float(np.dot(eps, eps))
    slope = float(np.dot(eps, rates) / denom) if denom > 0 else 0.0
    resid = tuple(float(r) for r in rates - slope * eps)
    return EnergyFitReport(fits, slope, resid)


# --- timescale ----------------------------------------------------------

@dataclass(frozen=True)
class TimescaleCell:
    epsilon: float
    mu: float
    completed: bool
    t_reached: float
    norm_ratio: float
    failure: str = ""


@dataclass(frozen=True)
class TimescaleReport:
    cells: tuple[TimescaleCell, ...]
    t_target: float

    def rows(self):
        return [dataclasses.asdict(c) for c in self.cells]

    def summary(self):
        return {"kind": "timescale", "t_target": self.t_target,
                "n_cells": len(self.cells),
                "n_completed": sum(c.completed for c in self.cells)}


def timescale_study(spec: StudySpec) -> TimescaleReport:
    """Run every (epsilon, mu) cell to t = t_target/epsilon and record
    whether it got there. Blow-ups are rows, not errors."""
    if not spec.epsilons or not spec.mus:
        raise StudyError("timescale needs epsilon and mu sweeps")
    cells_in = [(e, m) for e in spec.epsilons for m in spec.mus]

    def cell(args) -> TimescaleCell:
        eps, mu = args
        config = _derive(spec.base, epsilon=eps, mu=mu)
        t_end = spec.t_target / eps if eps > 0 else config.stepper.t_end
        try:
            traj = _run_config(config, t_end=t_end)
        except BlowUpDetected as e:
            reps = [r for r in e.trajectory.reports if r is not None]
            ratio = reps[-1].x_norm_s / reps[0].x_norm_s if reps else math.nan
            return TimescaleCell(eps, mu, False, e.time, ratio, "blow-up")
        except StepperError as e:
            t = getattr(e, "time", math.nan)
            return TimescaleCell(eps, mu, False, t, math.nan,
                                 type(e).__name__)
        reps = [r for r in traj.reports if r is not None]
        ratio = reps[-1].x_norm_s / reps[0].x_norm_s
        return TimescaleCell(eps, mu, True, traj.times[-1], ratio)

    return TimescaleReport(tuple(_thread_map(cell, cells_in)), spec.t_target)


# --- cross-model comparison ---------------------------------------------

@dataclass(frozen=True)
class CompareReport:
    times: tuple[float, ...]
    error_curve: tuple[float, ...]        # |U_A - U_B| in the s-1 norm
    residual_times: tuple[float, ...]
    residual_curve: tuple[float, ...]     # B's solution through A's equations
    residual_sup: float
    e0: float
    bound_constant: float                 # max_t e(t)/(e0 + t sup-residual)
    s_index: float

    def rows(self):
        return [{"time": t, "error": e}
                for t, e in zip(self.times, self.error_curve)]

    def summary(self):
        return {"kind": "compare", "bound_constant": self.bound_constant,
                "residual_sup": self.residual_sup, "e0": self.e0,
                "max_error": max(self.error_curve)}


def _state_derivative(state: State, axis: int) -> State:
    g = state.grid
    dz = spectral_derivative(state.zeta, axis).values
    dv = np.stack([spectral_derivative(ScalarField(g, c), axis).values
                   for c in state.v.values])
    return make_state(g, dz, dv, time=state.time)


def model_compare(config_a: RunConfig, config_b: RunConfig,
                  t_end: float | None = None) -> CompareReport:
    """Integrate both models from the same data on the same grid and
    measure the error between them against the residual-based bound.

    The residual plugs model B's solution into model A's equations, with
    the time derivative taken by centered differences on the stored
    trajectory, and everything is measured one Sobolev index below the
    run's energy index.
    """
    grid_a, grid_b = build_grid(config_a), build_grid(config_b)
    if grid_a != grid_b:
        raise StudyError("model_compare needs a shared grid")
    if t_end is None:
        t_end = config_a.t_end()
    params_a = model_params(config_a)
    params_b = model_params(config_b)

    # one shared step size keeps the trajectories aligned sample by sample
    dt = config_a.stepper.dt_override or min(
        cfl_dt(grid_a, params_a, cfl=config_a.stepper.cfl),
        cfl_dt(grid_b, params_b, cfl=config_b.stepper.cfl))
    stepper = dataclasses.replace(config_a.stepper, dt_override=dt,
                                  t_end=t_end)

    traj_a = run(initial_state(config_a, grid_a), params_a, stepper,
                 s=config_a.s, t0=config_a.t0,
                 blowup_factor=config_a.output.blowup_factor)
    traj_b = run(initial_state(config_b, grid_b), params_b, stepper,
                 s=config_b.s, t0=config_b.t0,
                 blowup_factor=config_b.output.blowup_factor)
    if traj_a.times != traj_b.times:
        raise StudyError("trajectories fell out of alignment")

    sm1 = (config_a.s if config_a.s is not None
           else default_s(grid_a.dim)) - 1.0
    errors = [energy_norm(ua - ub, params_a, sm1)
              for ua, ub in zip(traj_a.states, traj_b.states)]

    dt_stored = traj_b.times[1] - traj_b.times[0]
    res_times, res_curve = [], []
    for i in range(1, len(traj_b) - 1):
        du = (1.0 / (2.0 * dt_stored)) * (traj_b.states[i + 1]
                                          - traj_b.states[i - 1])
        frozen = traj_b.states[i]
        resid = du
        for axis in range(grid_a.dim):
            resid = resid + apply_coefficient(
                frozen, params_a, axis, _state_derivative(frozen, axis))
        res_times.append(traj_b.times[i])
        res_curve.append(energy_norm(resid, params_a, sm1))
    res_sup = max(res_curve) if res_curve else 0.0

    e0 = errors[0]
    ratios = [err / (e0 + t * res_sup)
              for t, err in zip(traj_a.times, errors)
              if e0 + t * res_sup > 0]
    c_hat = max(ratios) if ratios else 0.0
    return CompareReport(tuple(traj_a.times), tuple(errors),
                         tuple(res_times), tuple(res_curve), res_sup,
                         e0, c_hat, sm1)


# --- stability across mu ------------------------------------------------

@dataclass(frozen=True)
class StabilityReport:
    mus: tuple[float, ...]
    compares: tuple[CompareReport, ...]
    constant_spread: float        # max/min of the measured bound constants

    def rows(self):
        return [{"mu": m, "bound_constant": c.bound_constant,
                 "residual_sup": c.residual_sup,
                 "max_error": max(c.error_curve)}
                for m, c in zip(self.mus, self.compares)]

    def summary(self):
        return {"kind": "stability", "mus": list(self.mus),
                "bound_constants": [c.bound_constant for c in self.compares],
                "constant_spread": self.constant_spread}


def stability_study(spec: StudySpec) -> StabilityReport:
    """model_compare swept over mu with a fixed model pair; reports how
    much the measured bound constant moves."""
    if not spec.mus:
        raise StudyError("stability needs a mu sweep")
    if len(spec.models) != 2:
        raise StudyError("stability needs exactly two models to compare")
    model_a, model_b = spec.models

    def cell(mu: float) -> CompareReport:
        config_a = _derive(spec.base, model=model_a, mu=mu)
        config_b = _derive(spec.base, model=model_b, mu=mu)
        return model_compare(config_a, config_b)

    compares = tuple(_thread_map(cell, spec.mus))
    constants = [c.bound_constant for c in compares]
    spread = (max(constants) / min(constants)
              if min(constants) > 0 else math.inf)
    return StabilityReport(tuple(spec.mus), compares, spread)


# --- mu scaling ---------------------------------------------------------

@dataclass(frozen=True)
class MuScalingReport:
    mus: tuple[float, ...]
    errors: tuple[float, ...]             # cross-model gap at final time
    slope: float                          # d log(err) / d log(mu)
    spatial_floors: tuple[float, ...]
    under_resolved: tuple[bool, ...]

    def rows(self):
        return [{"mu": m, "error": e, "spatial_floor": f,
                 "under_resolved": int(u)}
                for m, e, f, u in zip(self.mus, self.errors,
                                      self.spatial_floors,
                                      self.under_resolved)]

    def summary(self):
        return {"kind": "mu_scaling", "slope": self.slope,
                "mus": list(self.mus), "errors": list(self.errors)}


def mu_scaling_study(spec: StudySpec) -> MuScalingReport:
    """Cross-model gap at fixed epsilon over a quadrupling mu sweep; the
    log-log slope should come out near one.

    Each cell also reruns the first model on a doubled grid; the gap to
    that refined run measures the spatial discretization error, and a
    cell is flagged when that floor is not well below the model gap.
    """
    if len(spec.mus) < 3:
        raise StudyError("mu_scaling needs at least 3 mu values")
    ratios = [b / a for a, b in zip(spec.mus, spec.mus[1:])]
    if any(abs(r - ratios[0]) > 1e-9 * ratios[0] for r in ratios):
        raise StudyError("mu sweep must be geometric")
    if len(spec.models) != 2:
        raise StudyError("mu_scaling needs exactly two models to compare")
    model_a, model_b = spec.models

    def cell(mu: float):
        config_a = _derive(spec.base, model=model_a, mu=mu)
        config_b = _derive(spec.base, model=model_b, mu=mu)
        config_f = _derive(config_a, n=2 * config_a.n)
        params_a = model_params(config_a)
        t_end = config_a.t_end()
        sm1 = (config_a.s if config_a.s is not None
               else default_s(config_a.dim)) - 1.0
        dt = config_a.stepper.dt_override or min(
            cfl_dt(build_grid(c), model_params(c), cfl=c.stepper.cfl)
            for c in (config_a, config_b, config_f))
        final = {}
        for tag, config in (("a", config_a), ("b", config_b),
                            ("fine", config_f)):
            stepper = dataclasses.replace(config.stepper, dt_override=dt,
                                          t_end=t_end)
            final[tag] = run(initial_state(config), model_params(config),
                             stepper, s=config.s, t0=config.t0,
                             blowup_factor=config.output.blowup_factor).final
        err = energy_norm(final["a"] - final["b"], params_a, sm1)
        floor = energy_norm(
            final["a"] - regrid_state(final["fine"], config_a.n),
            params_a, sm1)
        return err, floor

    results = _thread_map(cell, spec.mus)
    errors = tuple(r[0] for r in results)
    floors = tuple(r[1] for r in results)
    flagged = tuple(f > 0.1 * e for e, f in zip(errors, floors))
    slope = float(np.polyfit(np.log(spec.mus), np.log(errors), 1)[0])
    return MuScalingReport(tuple(spec.mus), errors, slope, floors, flagged)


# --- convergence --------------------------------------------------------

@dataclass(frozen=True)
class TemporalReport:
    dts: tuple[float, ...]
    errors: tuple[float, ...]
    orders: tuple[float, ...]
    reference: str                # "exact" for eps=0, else "finest run"

    def rows(self):
        return [{"dt": d, "error": e}
                for d, e in zip(self.dts, self.errors)]


@dataclass(frozen=True)
class SpatialReport:
    ns: tuple[int, ...]
    errors: tuple[float, ...]
    dt: float

    def rows(self):
        return [{"n": n, "error": e} for n, e in zip(self.ns, self.errors)]


@dataclass(frozen=True)
class ConvergenceReport:
    temporal: TemporalReport
    spatial: SpatialReport

    def rows(self):
        return ([dict(r, ladder="temporal") for r in self.temporal.rows()]
                + [dict(r, ladder="spatial") for r in self.spatial.rows()])

    def summary(self):
        return {"kind": "convergence",
                "temporal_orders": list(self.temporal.orders),
                "temporal_reference": self.temporal.reference,
                "spatial_errors": list(self.spatial.errors)}


def regrid_state(state: State, n_new: int) -> State:
    """Move a state to a finer or coarser grid by spectral padding or
    truncation, then reapply the target grid's dealias mask."""
    g = state.grid
    gn = make_grid(g.dim, n_new, g.length)
    half = min(g.n, gn.n) // 2 - 1
    freqs = np.concatenate([np.arange(0, half + 1), np.arange(-half, 0)])
    src = freqs % g.n
    dst = freqs % gn.n

    def remap(values):
        vh = g.fft(values)
        out = np.zeros(gn.shape, dtype=np.complex128)
        if g.dim == 1:
            out[dst] = vh[src]
        else:
            out[np.ix_(dst, dst)] = vh[np.ix_(src, src)]
        return gn.ifft(out * gn.dealias_mask).real

    zeta = remap(state.zeta.values)
    v = np.stack([remap(c) for c in state.v.values])
    return make_state(gn, zeta, v, time=state.time)


def _check_nested(values, name: str):
    if len(values) < 2:
        raise StudyError(f"{name} ladder needs at least 2 rungs")
    for a, b in zip(values, values[1:]):
        ratio = a / b if name == "dt" else b / a
        if abs(ratio - 2.0) > 1e-9:
            raise StudyError(f"{name} ladder must halve/double: {values}")


def convergence_study(spec: StudySpec) -> ConvergenceReport:
    _check_nested(spec.dts, "dt")
    _check_nested(spec.ns, "n")
    base = spec.base
    t_end = base.stepper.t_end
    eps = base.epsilon
    s = base.s if base.s is not None else default_s(base.dim)

    # temporal ladder on the base grid
    def temporal_run(dt: float) -> State:
        config = _derive(base, **{"stepper.dt_override": dt})
        return _run_config(config, t_end=t_end).final

    finals = _thread_map(temporal_run, spec.dts)
    params = model_params(base)
    if eps == 0.0:
        reference = linear_propagator(initial_state(base), params, t_end)
        ref_name = "exact"
        t_errors = [energy_norm(f - reference, params, s) for f in finals]
        t_dts = list(spec.dts)
    else:
        reference = finals[-1]
        ref_name = "finest run"
        t_errors = [energy_norm(f - reference, params, s)
                    for f in finals[:-1]]
        t_dts = list(spec.dts[:-1])
    orders = tuple(float(np.log2(a / b))
                   for a, b in zip(t_errors, t_errors[1:]))
    temporal = TemporalReport(tuple(t_dts), tuple(t_errors), orders, ref_name)

    # spatial ladder at one fixed small step
    dt_shared = spec.dts[-1]

    def spatial_run(n: int) -> State:
        config = _derive(base, n=n, **{"stepper.dt_override": dt_shared})
        return _run_config(config, t_end=t_end).final

    s_finals = _thread_map(spatial_run, spec.ns)
    ref_fine = s_finals[-1]
    s_errors = []
    for n, final in zip(spec.ns[:-1], s_finals[:-1]):
        restricted = regrid_state(ref_fine, n)
        s_errors.append(energy_norm(final - restricted, params, s))
    spatial = SpatialReport(tuple(spec.ns[:-1]), tuple(s_errors), dt_shared)
    return ConvergenceReport(temporal, spatial)


def run_study(spec: StudySpec):
    """Dispatch on the study kind; the CLI sweep path lands here."""
    table = {"energy_growth": energy_growth_study,
             "timescale": timescale_study,
             "stability": stability_study,
             "mu_scaling": mu_scaling_study,
             "convergence": convergence_study}
    return table[spec.kind](spec)
