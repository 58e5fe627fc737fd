"""State vectors, model parameters, and the frozen-coefficient operator zoo.

The evolution being studied is, on the torus, with g1, g2 the two dispersion
symbols and eps the nonlinearity strength:

    dt zeta = -g1^2 [div v] - eps * g2 [div (zeta * g2[v])]
    dt v    = -grad zeta    - eps * (g2[v] . grad) g2[v]

Writing U = (zeta, v), this is dt U + sum_j C_j(U)[d_j U] = 0 with C_j the
quasi-linear coefficient matrix along axis j. The energy machinery weights
C_j by the symmetrizer S = diag(1, Q), Q = g1^2 + eps*g2[zeta g2[.]]; the
weighted matrix W_j = S C_j splits into a self-adjoint part and a bounded
skew remainder, and those pieces are what the diagnostics measure.

Every pointwise product of fields goes through the dealias projection P on
both sides (an operator M_f = P m_f P). That keeps multiplication
self-adjoint under the quadrature inner product for arbitrary coefficient
fields, which in turn makes the structural adjoints below exact and the
discrete coercivity inequality hold with no fudge terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import numpy.typing as npt

from .spectral import (PHYSICAL, ScalarField, SpectralGrid, VectorField,
                       apply_symbol, sobolev_norm, spectral_derivative)
from .symbols import MultiplierPair, symbol_eval


@dataclass(frozen=True)
class ModelParams:
    """Multiplier pair plus the scalar parameters of one model instance.

    mu is recorded for reports and snapshots; the actual rescaling lives
    inside the SymbolSpecs, and from_preset keeps the two in sync.
    eps = 0 is allowed and gives the linear system.
    """

    pair: MultiplierPair
    epsilon: float
    mu: float = 1.0
    h_min: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0,1], got {self.epsilon}")
        if not 0.0 < self.mu <= 1.0:
            raise ValueError(f"mu must lie in (0,1], got {self.mu}")
        if not 0.0 < self.h_min <= 1.0:
            raise ValueError(f"h_min must lie in (0,1], got {self.h_min}")

    @classmethod
    def from_preset(cls, name: str, epsilon: float, mu: float = 1.0,
                    h_min: float = 0.5) -> "ModelParams":
        from .symbols import preset
        pair, _ = preset(name, mu=mu)
        return cls(pair=pair, epsilon=epsilon, mu=mu, h_min=h_min)


@dataclass
class State:
    """The unknown U = (zeta, v) at one time, stored physically."""

    zeta: ScalarField
    v: VectorField
    time: float = 0.0

    def __post_init__(self):
        if self.zeta.grid != self.v.grid:
            raise ValueError("zeta and v live on different grids")
        if self.zeta.rep != PHYSICAL or self.v.rep != PHYSICAL:
            raise ValueError("states store physical samples")

    @property
    def grid(self) -> SpectralGrid:
        return self.zeta.grid

    def copy(self) -> "State":
        return State(self.zeta.copy(), self.v.copy(), self.time)

    # arithmetic for time stepping; the left operand's clock is kept
    def __add__(self, other: "State") -> "State":
        return State(ScalarField(self.grid, self.zeta.values + other.zeta.values),
                     VectorField(self.grid, self.v.values + other.v.values),
                     self.time)

    def __sub__(self, other: "State") -> "State":
        return State(ScalarField(self.grid, self.zeta.values - other.zeta.values),
                     VectorField(self.grid, self.v.values - other.v.values),
                     self.time)

    def __mul__(self, c: float) -> "State":
        return State(ScalarField(self.grid, c * self.zeta.values),
                     VectorField(self.grid, c * self.v.values),
                     self.time)

    __rmul__ = __mul__

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.zeta.values))
                    and np.all(np.isfinite(self.v.values)))


def make_state(grid: SpectralGrid, zeta_values, v_values=None,
               time: float = 0.0) -> State:
    zeta = ScalarField(grid, np.asarray(zeta_values, dtype=np.float64))
    if v_values is None:
        v_values = np.zeros((grid.dim,) + grid.shape)
    v_values = np.asarray(v_values, dtype=np.float64)
    if v_values.shape == grid.shape:
        v_values = v_values[None] if grid.dim == 1 else v_values
    return State(zeta, VectorField(grid, v_values), time)


def zero_state(grid: SpectralGrid, time: float = 0.0) -> State:
    return make_state(grid, np.zeros(grid.shape), time=time)


def bandlimit(state: State) -> State:
    """Project both components through the dealias mask."""
    g = state.grid
    zh = g.fft(state.zeta.values) * g.dealias_mask
    vh = np.stack([g.fft(c) * g.dealias_mask for c in state.v.values])
    return make_state(g, g.ifft(zh), np.stack([g.ifft(c) for c in vh]),
                      time=state.time)


@lru_cache(maxsize=64)
def _tables(grid: SpectralGrid, pair: MultiplierPair):
    g1 = np.asarray(symbol_eval(pair.g1, grid.xi_abs))
    g2 = np.asarray(symbol_eval(pair.g2, grid.xi_abs))
    for a in (g1, g2):
        a.setflags(write=False)
    return g1, g2


def _m(grid: SpectralGrid, f_phys: npt.NDArray, ghat: npt.NDArray) -> npt.NDArray:
    """M_f in coefficient space: project, multiply by f, project."""
    inner = grid.ifft(grid.dealias_mask * ghat)
    return grid.dealias_mask * grid.fft(f_phys * inner)


class _Ctx:
    """Per-call bundle of tables and frozen-state-derived coefficient fields."""

    def __init__(self, frozen: State, params: ModelParams):
        self.grid = frozen.grid
        g1, g2 = _tables(self.grid, params.pair)
        self.g1sq = g1 * g1
        self.g2 = g2
        self.eps = params.epsilon
        self.zbar = frozen.zeta.values
        self.vbar_hat = [self.grid.fft(c) for c in frozen.v.values]

    def w(self, axis: int) -> npt.NDArray:
        """g2[vbar_axis] in physical space."""
        return self.grid.ifft(self.g2 * self.vbar_hat[axis])

    def q_hat(self, ghat: npt.NDArray) -> npt.NDArray:
        """The energy weight Q = g1^2 + eps*g2 M_zbar g2, in hat space."""
        return self.g1sq * ghat + self.eps * self.g2 * _m(self.grid, self.zbar,
                                                          self.g2 * ghat)


def _unpack(u: State):
    g = u.grid
    return g.fft(u.zeta.values), [g.fft(c) for c in u.v.values]


def _pack(grid: SpectralGrid, zhat, vhats, time: float) -> State:
    return make_state(grid, grid.ifft(zhat),
                      np.stack([grid.ifft(h) for h in vhats]), time=time)


def rhs(state: State, params: ModelParams) -> State:
    """Tendency of the nonlinear evolution; mass flux kept in divergence form
    so the zeta mean is conserved to machine precision every step."""
    g = state.grid
    c = _Ctx(state, params)
    zh = g.fft(state.zeta.values)
    vh = c.vbar_hat
    mask = g.dealias_mask
    w = [c.w(j) for j in range(g.dim)]

    div_v = sum(g.deriv(vh[j], j) for j in range(g.dim))
    mass_flux = sum(g.deriv(mask * g.fft(state.zeta.values * w[j]), j)
                    for j in range(g.dim))
    dz = -c.g1sq * div_v - c.eps * c.g2 * mass_flux

    dv = []
    for i in range(g.dim):
        adv = sum(mask * g.fft(w[j] * g.ifft(g.deriv(c.g2 * vh[i], j)))
                  for j in range(g.dim))
        dv.append(-g.deriv(zh, i) - c.eps * adv)

    out = _pack(g, dz, dv, time=state.time)
    if not out.is_finite():
        raise FloatingPointError("non-finite tendency (blow-up in progress)")
    return out


def apply_coefficient(frozen: State, params: ModelParams, axis: int,
                      u: State) -> State:
    """The quasi-linear coefficient matrix C_axis(frozen) applied to u.

    Differentiation is the caller's job: the evolution's spatial term along
    axis j is C_j(U)[d_j U].
    """
    if axis >= frozen.grid.dim:
        raise ValueError(f"axis {axis} out of range")
    if frozen.grid != u.grid:
        raise ValueError("frozen state and argument live on different grids")
    g = frozen.grid
    c = _Ctx(frozen, params)
    uz, uv = _unpack(u)
    w = c.w(axis)

    rz = (c.eps * c.g2 * _m(g, w, uz)
          + c.g1sq * uv[axis]
          + c.eps * c.g2 * _m(g, c.zbar, c.g2 * uv[axis]))
    rv = []
    for i in range(g.dim):
        row = c.eps * _m(g, w, c.g2 * uv[i])
        if i == axis:
            row = row + uz
        rv.append(row)
    return _pack(g, rz, rv, u.time)


def apply_symmetrizer(frozen: State, params: ModelParams, u: State) -> State:
    """S(frozen)[u]: identity on zeta, energy weight Q on each v component."""
    if frozen.grid != u.grid:
        raise ValueError("frozen state and argument live on different grids")
    g = frozen.grid
    c = _Ctx(frozen, params)
    uz, uv = _unpack(u)
    return _pack(g, uz, [c.q_hat(h) for h in uv], u.time)


def quadratic_form(frozen: State, params: ModelParams, u: State) -> float:
    """(S(frozen)u, u)_2, the energy the estimates propagate."""
    g = frozen.grid
    c = _Ctx(frozen, params)
    uz, uv = _unpack(u)
    cell = g.volume / g.n**g.dim
    total = np.sum(u.zeta.values**2) * cell
    for i, h in enumerate(uv):
        qv = g.ifft(c.q_hat(h))
        total += np.sum(qv * u.v.values[i]) * cell
    return float(total)


def apply_weighted_coefficient(frozen: State, params: ModelParams, axis: int,
                               u: State) -> State:
    """W_axis = S o C_axis applied to u (the symmetrizer-weighted matrix)."""
    g = frozen.grid
    c = _Ctx(frozen, params)
    uz, uv = _unpack(u)
    w = c.w(axis)

    rz = (c.eps * c.g2 * _m(g, w, uz)
          + c.g1sq * uv[axis]
          + c.eps * c.g2 * _m(g, c.zbar, c.g2 * uv[axis]))
    rv = []
    for i in range(g.dim):
        row = (c.eps * c.g1sq * _m(g, w, c.g2 * uv[i])
               + c.eps**2 * c.g2 * _m(g, c.zbar, c.g2 * _m(g, w, c.g2 * uv[i])))
        if i == axis:
            row = row + c.q_hat(uz)
        rv.append(row)
    return _pack(g, rz, rv, u.time)


def apply_weighted_adjoint(frozen: State, params: ModelParams, axis: int,
                           u: State) -> State:
    """Adjoint of W_axis under the quadrature inner product.

    Built structurally: reverse each composition, multipliers and M_f being
    self-adjoint. The dense-matrix tests check this against a transpose.
    """
    g = frozen.grid
    c = _Ctx(frozen, params)
    uz, uv = _unpack(u)
    w = c.w(axis)

    rz = c.eps * _m(g, w, c.g2 * uz) + c.q_hat(uv[axis])
    rv = []
    for i in range(g.dim):
        row = c.eps * c.g2 * _m(g, w, c.q_hat(uv[i]))
        if i == axis:
            row = row + c.q_hat(uz)
        rv.append(row)
    return _pack(g, rz, rv, u.time)


def apply_skew_remainder(frozen: State, params: ModelParams, axis: int,
                         u: State) -> State:
    """The order-zero skew remainder, i.e. -(W_axis - W_axis*)/(2 eps).

    The eps cancels against the commutator structure, so this is evaluated
    in the cancelled form and stays finite at eps = 0.
    """
    g = frozen.grid
    c = _Ctx(frozen, params)
    uz, uv = _unpack(u)
    w = c.w(axis)

    rz = -0.5 * (c.g2 * _m(g, w, uz) - _m(g, w, c.g2 * uz))
    rv = []
    for i in range(g.dim):
        lead = (c.g1sq * _m(g, w, c.g2 * uv[i])
                - c.g2 * _m(g, w, c.g1sq * uv[i]))
        nest = (c.g2 * _m(g, c.zbar, c.g2 * _m(g, w, c.g2 * uv[i]))
                - c.g2 * _m(g, w, c.g2 * _m(g, c.zbar, c.g2 * uv[i])))
        rv.append(-0.5 * lead - 0.5 * c.eps * nest)
    return _pack(g, rz, rv, u.time)


def split_symmetric(frozen: State, params: ModelParams, axis: int,
                    u: State) -> tuple[State, State]:
    """(sym_part[u], skew_part[u]) with W = sym - eps*skew.

    sym_part is self-adjoint by construction; skew_part is the order-zero
    remainder from apply_skew_remainder.
    """
    b = apply_weighted_coefficient(frozen, params, axis, u)
    bstar = apply_weighted_adjoint(frozen, params, axis, u)
    sym = 0.5 * (b + bstar)
    return sym, apply_skew_remainder(frozen, params, axis, u)


def apply_weighted_derivative(frozen: State, params: ModelParams, axis: int,
                              u: State) -> State:
    """d_axis W_axis(frozen) applied to u, from the explicit entry table.

    Each frozen coefficient slot is differentiated in turn (Leibniz), which
    is what the energy-identity diagnostic integrates against.
    """
    g = frozen.grid
    c = _Ctx(frozen, params)
    uz, uv = _unpack(u)
    w = c.w(axis)
    dzbar = g.ifft(g.deriv(g.fft(c.zbar), axis))
    dw = g.ifft(c.g2 * g.deriv(c.vbar_hat[axis], axis))

    rz = c.eps * c.g2 * _m(g, dw, uz) + c.eps * c.g2 * _m(g, dzbar, c.g2 * uv[axis])
    rv = []
    for i in range(g.dim):
        row = (c.eps * c.g1sq * _m(g, dw, c.g2 * uv[i])
               + c.eps**2 * c.g2 * _m(g, dzbar, c.g2 * _m(g, w, c.g2 * uv[i]))
               + c.eps**2 * c.g2 * _m(g, c.zbar, c.g2 * _m(g, dw, c.g2 * uv[i])))
        if i == axis:
            row = row + c.eps * c.g2 * _m(g, dzbar, c.g2 * uz)
        rv.append(row)
    return _pack(g, rz, rv, u.time)


def energy_norm(u: State, params: ModelParams, s: float) -> float:
    """|zeta|_{H^s} + |g1 v|_{H^s}, the norm the estimates control."""
    g1, _ = _tables(u.grid, params.pair)
    return sobolev_norm(u.zeta, s) + sobolev_norm(apply_symbol(g1, u.v), s)


def dual_energy_norm(u: State, params: ModelParams, s: float) -> float:
    """|zeta|_{H^s} + |g1^{-1} v|_{H^s}, the dual-weighted counterpart."""
    g1, _ = _tables(u.grid, params.pair)
    if np.any(g1 == 0.0):
        raise ValueError("g1 vanishes on a grid mode; dual norm undefined")
    return sobolev_norm(u.zeta, s) + sobolev_norm(apply_symbol(1.0 / g1, u.v), s)


def check_non_cavitation(zeta: ScalarField, epsilon: float,
                         h_min: float) -> tuple[bool, float]:
    """Pointwise depth check: min(1 + eps*zeta) against h_min."""
    vals = zeta.values if zeta.rep == PHYSICAL else zeta.grid.ifft(zeta.values)
    m = float(np.min(1.0 + epsilon * vals))
    return m >= h_min, m


def consistency_defect(state: State, params: ModelParams) -> float:
    """Max-norm mismatch between the transport form and the tendency.

    sum_j C_j(U)[d_j U] + rhs(U) vanishes identically for band-limited
    states; this measures how close to zero the assembled version is.
    """
    total = rhs(state, params)
    for j in range(state.grid.dim):
        du = State(spectral_derivative(state.zeta, j),
                   spectral_derivative(state.v, j), state.time)
        total = total + apply_coefficient(state, params, j, du)
    return float(max(np.max(np.abs(total.zeta.values)),
                     np.max(np.abs(total.v.values))))
