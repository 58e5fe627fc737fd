"""Empirical probes of the energy structure: norms along a run, coercivity
sampling, the energy-rate identity, blow-up detection, and the functional
inequalities behind the estimates.

Everything here consumes states and trajectories; nothing steps in time.
The identity check in particular is deliberately offline, so it can be run
against any pair of (background, linearized) trajectories at matching times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import numpy.typing as npt

from .operators import (ModelParams, State, apply_skew_remainder,
                        apply_weighted_derivative, bandlimit,
                        check_non_cavitation, dual_energy_norm, energy_norm,
                        make_state, quadratic_form, rhs)
from .spectral import (ScalarField, SpectralGrid, apply_symbol, dealias_product,
                       inner_product, sobolev_norm, spectral_derivative)
from .symbols import MultiplierPair, symbol_table

if TYPE_CHECKING:
    from .stepping import Trajectory


def default_t0(dim: int) -> float:
    """Reference Sobolev index strictly above d/2 (with a 0.01 cushion)."""
    return dim / 2.0 + 0.51


def default_s(dim: int) -> float:
    return default_t0(dim) + 1.0


@dataclass(frozen=True)
class EnergyReport:
    """Norm snapshot of one state.

    Field names deliberately match the diagnostics CSV columns, which are a
    published interface; x refers to the solution-space norm, y to its
    dual-weighted counterpart, t0 and s to the Sobolev indices used.
    """

    time: float
    x_norm_0: float
    x_norm_t0: float
    x_norm_t0p1: float
    x_norm_s: float
    y_norm_0: float
    quad_form: float
    min_depth: float
    max_velocity: float

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in
                   (self.x_norm_0, self.x_norm_s, self.quad_form))


def energy_report(state: State, params: ModelParams, s: float,
                  t0: float | None = None) -> EnergyReport:
    grid = state.grid
    if t0 is None:
        t0 = default_t0(grid.dim)
    g2 = symbol_table(params.pair.g2, grid)
    wv = np.stack([grid.ifft(g2 * grid.fft(c)) for c in state.v.values])
    speed = np.sqrt(np.sum(wv**2, axis=0))
    _, min_depth = check_non_cavitation(state.zeta, params.epsilon,
                                        params.h_min)
    return EnergyReport(
        time=state.time,
        x_norm_0=energy_norm(state, params, 0.0),
        x_norm_t0=energy_norm(state, params, t0),
        x_norm_t0p1=energy_norm(state, params, t0 + 1.0),
        x_norm_s=energy_norm(state, params, s),
        y_norm_0=dual_energy_norm(state, params, 0.0),
        quad_form=quadratic_form(state, params, state),
        min_depth=min_depth,
        max_velocity=float(np.max(speed)),
    )


def random_field(grid: SpectralGrid, rng: np.random.Generator,
                 decay: float | None = None, amp: float | None = None,
                 band: int | None = None) -> ScalarField:
    """Band-limited Gaussian field with spectrally decaying coefficients.

    decay defaults to t0 + 2 for the grid's dimension, enough smoothness for
    every inequality probed here. amp, when given, rescales to that sup norm.

    band, when given, restricts the draw to signed mode numbers of magnitude
    at most band per axis, with coefficients drawn in a grid-size-independent
    order. One seed then produces the same smooth function on every grid that
    resolves the band, which is what cross-grid stability comparisons need;
    the default full-band draw would hand each grid different data.
    """
    if decay is None:
        decay = default_t0(grid.dim) + 2.0
    if band is None:
        re = rng.standard_normal(grid.shape)
        im = rng.standard_normal(grid.shape)
        h = (re + 1j * im) * grid.bracket ** (-decay)
    else:
        freqs = np.array(list(range(band + 1)) + list(range(-band, 0)))
        shape = (freqs.size,) * grid.dim
        coef = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        h = np.zeros(grid.shape, dtype=complex)
        pos = freqs % grid.n
        if grid.dim == 1:
            h[pos] = coef
        else:
            h[np.ix_(pos, pos)] = coef
        h *= grid.bracket ** (-decay)
    vals = grid.ifft(h * grid.dealias_mask)
    if amp is not None:
        m = np.max(np.abs(vals))
        if m > 0:
            vals = amp * vals / m
    return ScalarField(grid, vals)


def random_state(grid: SpectralGrid, rng: np.random.Generator,
                 decay: float | None = None, amp: float | None = None,
                 band: int | None = None) -> State:
    zeta = random_field(grid, rng, decay, amp, band)
    v = np.stack([random_field(grid, rng, decay, amp, band).values
                  for _ in range(grid.dim)])
    return make_state(grid, zeta.values, v)


@dataclass(frozen=True)
class CoercivityResult:
    margins: npt.NDArray
    worst: float
    passed: bool


def coercivity_check(grid: SpectralGrid, params: ModelParams,
                     n_trials: int = 100, seed: int = 0,
                     tol: float = 1e-10) -> CoercivityResult:
    """Sample (S u, u) >= |u_zeta|^2 + h_min |g1 u_v|^2 over random data.

    Frozen surface samples are clipped to the depth floor, so the boundary
    case 1 + eps*zeta = h_min is exercised rather than avoided. Margins are
    normalized by the form's own size.
    """
    rng = np.random.default_rng(seed)
    g1 = symbol_table(params.pair.g1, grid)
    margins = np.empty(n_trials)
    for k in range(n_trials):
        frozen = random_state(grid, rng, amp=1.0)
        if params.epsilon > 0:
            floor = (params.h_min - 1.0) / params.epsilon
            frozen = make_state(grid, np.maximum(frozen.zeta.values, floor),
                                frozen.v.values)
        u = random_state(grid, rng)
        q = quadratic_form(frozen, params, u)
        lower = (sobolev_norm(u.zeta, 0.0) ** 2
                 + params.h_min * sobolev_norm(apply_symbol(g1, u.v), 0.0) ** 2)
        margins[k] = q - lower
    worst = float(np.min(margins))
    return CoercivityResult(margins=margins, worst=worst, passed=worst >= -tol)


def _state_dot(a: State, b: State) -> float:
    total = inner_product(a.zeta, b.zeta)
    for i in range(a.grid.dim):
        total += inner_product(a.v.component(i), b.v.component(i))
    return total


def energy_identity_residual(frozen_traj: "Trajectory", u_traj: "Trajectory",
                             params: ModelParams
                             ) -> tuple[npt.NDArray, npt.NDArray]:
    """Defect of the exact-arithmetic energy rate along a linearized run.

    With q(t) = (S(U(t)) u(t), u(t)) the rate splits into the symmetrizer's
    own drift, the divergence of the weighted matrices, and the paired skew
    remainder. All three pieces are computable without time differencing;
    only dq/dt is discretized (centered), so the residual of a correct
    implementation shrinks like dt^2.
    """
    times = np.asarray(frozen_traj.times)
    if len(times) < 3:
        raise ValueError("need at least three stored steps")
    if len(u_traj.times) != len(times):
        raise ValueError("trajectories must share their time grid")
    dts = np.diff(times)
    if not np.allclose(dts, dts[0], rtol=1e-10):
        raise ValueError("time grid must be uniform")
    dt = float(dts[0])

    grid = frozen_traj.states[0].grid
    g2 = symbol_table(params.pair.g2, grid)
    eps = params.epsilon

    q = np.array([quadratic_form(fr, params, u)
                  for fr, u in zip(frozen_traj.states, u_traj.states)])

    residuals = np.empty(len(times) - 2)
    for k in range(1, len(times) - 1):
        frozen = frozen_traj.states[k]
        u = u_traj.states[k]
        dq = (q[k + 1] - q[k - 1]) / (2.0 * dt)

        # symmetrizer drift: eps * (g2[dt_zeta * g2[u_v]], u_v)
        dt_zeta = rhs(frozen, params).zeta
        drift = 0.0
        for i in range(grid.dim):
            g2uv = apply_symbol(g2, u.v.component(i))
            piece = apply_symbol(g2, dealias_product(dt_zeta, g2uv))
            drift += eps * inner_product(piece, u.v.component(i))

        divergence = sum(
            _state_dot(apply_weighted_derivative(frozen, params, j, u), u)
            for j in range(grid.dim))

        skew = 0.0
        for j in range(grid.dim):
            du = State(spectral_derivative(u.zeta, j),
                       spectral_derivative(u.v, j))
            skew += 2.0 * eps * _state_dot(
                apply_skew_remainder(frozen, params, j, du), u)

        residuals[k - 1] = dq - (drift + divergence + skew)
    return times[1:-1], residuals


@dataclass(frozen=True)
class BlowUpStatus:
    triggered: bool
    time: float | None
    threshold: float
    peak_norm: float


def blow_up_monitor(traj: "Trajectory",
                    threshold_factor: float = 100.0) -> BlowUpStatus:
    """Scan a trajectory's reports for norm escape past the threshold."""
    reports = [r for r in traj.reports if r is not None]
    if not reports:
        raise ValueError("trajectory carries no reports")
    base = max(reports[0].x_norm_s, 1e-12)
    threshold = threshold_factor * base
    peak = 0.0
    for r in reports:
        peak = max(peak, r.x_norm_s)
        if not r.is_finite() or r.x_norm_s > threshold:
            return BlowUpStatus(True, r.time, threshold, peak)
    return BlowUpStatus(False, None, threshold, peak)


@dataclass(frozen=True)
class EstimateRatioSample:
    estimate_id: str
    trial: int
    grid_n: int
    lhs: float
    bound: float
    ratio: float


ESTIMATE_IDS = ("product", "commutator_sobolev", "multiplier_bound",
                "commutator_order0", "skew_remainder")


def _fixed_profile(grid: SpectralGrid, amp: float = 0.3) -> State:
    """Analytic background used for the skew-remainder probe; identical in
    physical space at every resolution so constants are comparable."""
    phase = [2.0 * math.pi * x / grid.length for x in grid.x]
    zeta = amp * np.cos(phase[0])
    v = [amp * np.sin(phase[0])]
    if grid.dim == 2:
        zeta = zeta * np.cos(phase[1])
        v = [amp * np.sin(phase[0]) * np.cos(phase[1]),
             amp * np.cos(phase[0]) * np.sin(phase[1])]
    return bandlimit(make_state(grid, zeta, np.stack(v)))


def estimate_ratio_suite(pair: MultiplierPair, grid: SpectralGrid,
                         n_trials: int = 50, s: float | None = None,
                         t0: float | None = None, seed: int = 0,
                         band: int | None = None
                         ) -> list[EstimateRatioSample]:
    """Measured-to-bound ratios for the inequalities the theory leans on.

    product            |P(f P g)|_{H^s}            vs |f|_{H^max(t0,s)} |g|_{H^s}
    commutator_sobolev |[L^s, M_f] g|_{L2}          vs |f|_{H^max(t0+1,s)} |g|_{H^{s-1}}
    multiplier_bound   |G(D) f|_{H^s}               vs sup|G| |f|_{H^s}   (exact)
    commutator_order0  |[G(D), M_f] g|_{H^s}        vs |f|_{H^max(t0+1,s)} |g|_{H^{s-1}}
    skew_remainder     dual norm of F[d u], frozen  vs energy norm of u, level 0
                       background fixed

    (L^s is the bracket-weight multiplier of order s, M_f projected
    multiplication, F the order-zero skew remainder along axis 0. The last
    row is the cancellation that makes the skew part harmless: F composed
    with a derivative still maps the level-zero energy space into its dual
    boundedly, which no single term of F does.)
    Ratios carry the unknown constants, so their absolute size means little;
    stability of the per-id maxima under grid doubling is the observable. For
    that comparison pass a band (and the same seed) on every grid, so each
    trial refines one fixed function instead of redrawing.
    """
    if t0 is None:
        t0 = default_t0(grid.dim)
    if s is None:
        s = default_s(grid.dim)
    rng = np.random.default_rng(seed)
    g2 = symbol_table(pair.g2, grid)
    sup_g2 = float(np.max(np.abs(g2)))
    lam_s = grid.bracket ** s

    frozen = _fixed_profile(grid)
    fparams = ModelParams(pair=pair, epsilon=0.5)

    out: list[EstimateRatioSample] = []

    def push(eid, k, lhs, bound):
        out.append(EstimateRatioSample(estimate_id=eid, trial=k,
                                       grid_n=grid.n, lhs=lhs, bound=bound,
                                       ratio=lhs / bound))

    for k in range(n_trials):
        f = random_field(grid, rng, band=band)
        g = random_field(grid, rng, band=band)

        prod = dealias_product(f, g)
        push("product", k, sobolev_norm(prod, s),
             sobolev_norm(f, max(t0, s)) * sobolev_norm(g, s))

        lam_g = apply_symbol(lam_s, g)
        comm_s = ScalarField(grid,
                             apply_symbol(lam_s, dealias_product(f, g)).values
                             - dealias_product(f, lam_g).values)
        push("commutator_sobolev", k, sobolev_norm(comm_s, 0.0),
             sobolev_norm(f, max(t0 + 1.0, s)) * sobolev_norm(g, s - 1.0))

        push("multiplier_bound", k, sobolev_norm(apply_symbol(g2, g), s),
             sup_g2 * sobolev_norm(g, s))

        comm_0 = ScalarField(grid,
                             apply_symbol(g2, dealias_product(f, g)).values
                             - dealias_product(f, apply_symbol(g2, g)).values)
        push("commutator_order0", k, sobolev_norm(comm_0, s),
             sobolev_norm(f, max(t0 + 1.0, s)) * sobolev_norm(g, s - 1.0))

        u = random_state(grid, rng, band=band)
        du = State(spectral_derivative(u.zeta, 0),
                   spectral_derivative(u.v, 0))
        skew = apply_skew_remainder(frozen, fparams, 0, du)
        push("skew_remainder", k, dual_energy_norm(skew, fparams, 0.0),
             energy_norm(u, fparams, 0.0))
    return out
