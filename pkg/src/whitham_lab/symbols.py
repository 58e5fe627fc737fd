"""Catalog of dispersion symbols and admissibility checking.

A symbol is a radial function G(|xi|) evaluated after the shallowness
rescaling r = sqrt(mu)*|xi|. The shipped kinds:

    identity            1
    sqrt_tanh_ratio     sqrt(tanh(r)/r)         (exact water-wave phase speed)
    tanh_ratio          tanh(r)/r
    inv_helmholtz       1/(1 + b r^2)
    bcs_boussinesq      sqrt(1 - a r^2)/(1 + b r^2)
    custom_table        linear interpolation of tabulated (r, G) knots

A pair (g1, g2) is admissible when both symbols and their weighted gradients
<xi>|G'| stay bounded on the sampled range, g1 is strictly positive, and
|g2| <= g1 everywhere. All of that is sampled, not proved; the report says
which clause failed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

KINDS = ("identity", "sqrt_tanh_ratio", "tanh_ratio", "inv_helmholtz",
         "bcs_boussinesq", "custom_table")

PRESET_NAMES = ("shallow_water", "abcd", "ddk", "quasilinear_wb", "open_wb")

_GRAD_STEP = 1e-4  # centered-difference step for the weighted gradient


@dataclass(frozen=True)
class SymbolSpec:
    kind: str
    mu: float = 1.0
    a: float = 0.0
    b: float = 0.0
    table: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown symbol kind {self.kind!r}")
        if not 0.0 < self.mu <= 1.0:
            raise ValueError(f"mu must lie in (0,1], got {self.mu}")
        if self.a < 0 or self.b < 0:
            raise ValueError("shape parameters a, b must be >= 0")
        if self.kind == "custom_table":
            if not self.table or len(self.table) < 2:
                raise ValueError("custom_table needs at least two knots")
            rs = [r for r, _ in self.table]
            if any(r2 <= r1 for r1, r2 in zip(rs, rs[1:])):
                raise ValueError("custom_table knots must be strictly increasing")


@dataclass(frozen=True)
class MultiplierPair:
    g1: SymbolSpec
    g2: SymbolSpec


@dataclass(frozen=True)
class AdmissibilityReport:
    sup_g1: float
    sup_g2: float
    sup_weighted_grad_g1: float
    sup_weighted_grad_g2: float
    min_g1: float
    domination_ok: bool
    n_samples: int
    sample_range: tuple[float, float]
    passed: bool
    failures: tuple[str, ...]


def symbol_eval(spec: SymbolSpec, xi) -> npt.NDArray | float:
    """Evaluate G(sqrt(mu)*|xi|). Scalar in, scalar out; array in, array out."""
    scalar = np.isscalar(xi)
    r = math.sqrt(spec.mu) * np.abs(np.asarray(xi, dtype=np.float64))
    if spec.kind == "identity":
        out = np.ones_like(r)
    elif spec.kind == "tanh_ratio":
        out = _tanh_ratio(r)
    elif spec.kind == "sqrt_tanh_ratio":
        out = np.sqrt(_tanh_ratio(r))
    elif spec.kind == "inv_helmholtz":
        out = 1.0 / (1.0 + spec.b * r**2)
    elif spec.kind == "bcs_boussinesq":
        arg = 1.0 - spec.a * r**2
        if np.any(arg < 0):
            raise ValueError("bcs_boussinesq undefined beyond r = 1/sqrt(a); "
                             "shrink the range or set a smaller a")
        out = np.sqrt(arg) / (1.0 + spec.b * r**2)
    else:  # custom_table
        knots_r = np.array([p[0] for p in spec.table])
        knots_g = np.array([p[1] for p in spec.table])
        if np.any(r < knots_r[0] - 1e-12) or np.any(r > knots_r[-1] + 1e-12):
            raise ValueError("custom_table evaluated outside its tabulated range")
        out = np.interp(r, knots_r, knots_g)
    return float(out) if scalar else out


def _tanh_ratio(r: npt.NDArray) -> npt.NDArray:
    # removable singularity at r = 0 handled exactly
    out = np.ones_like(r)
    nz = r > 0
    out[nz] = np.tanh(r[nz]) / r[nz]
    return out


def symbol_table(spec: SymbolSpec, grid) -> npt.NDArray:
    """Symbol values over a grid's modes (the form apply_symbol consumes)."""
    return symbol_eval(spec, grid.xi_abs)


def validate_admissible(pair: MultiplierPair,
                        sample_range: tuple[float, float],
                        n_samples: int = 256) -> AdmissibilityReport:
    """Sample the admissibility clauses on a log-spaced |xi| range.

    The gradient is taken by centered differences with a fixed step, which
    treats tabulated symbols the same as analytic ones.
    """
    if n_samples < 64:
        raise ValueError("n_samples must be at least 64")
    lo, hi = sample_range
    if not (hi > lo >= 0):
        raise ValueError(f"bad sample range {sample_range}")
    pts = np.concatenate([[lo],
                          np.geomspace(max(lo, 1e-3), hi, n_samples - 1)])

    h = _GRAD_STEP
    g = {}
    wgrad = {}
    for name, spec in (("g1", pair.g1), ("g2", pair.g2)):
        vals = symbol_eval(spec, pts)
        # symbols are even, so |pts - h| keeps the stencil in-range near 0
        dplus = symbol_eval(spec, pts + h)
        dminus = symbol_eval(spec, np.abs(pts - h))
        grad = (dplus - dminus) / (2.0 * h)
        g[name] = vals
        wgrad[name] = np.sqrt(1.0 + pts**2) * np.abs(grad)

    sup_g1 = float(np.max(np.abs(g["g1"])))
    sup_g2 = float(np.max(np.abs(g["g2"])))
    sup_w1 = float(np.max(wgrad["g1"]))
    sup_w2 = float(np.max(wgrad["g2"]))
    min_g1 = float(np.min(g["g1"]))
    domination = bool(np.all(np.abs(g["g2"]) <= g["g1"] + 1e-12))

    failures = []
    if not (np.isfinite(sup_g1) and np.isfinite(sup_g2)):
        failures.append("symbol unbounded on sampled range")
    if not (np.isfinite(sup_w1) and np.isfinite(sup_w2)):
        failures.append("weighted gradient unbounded on sampled range")
    if not min_g1 > 0:
        failures.append("g1 not strictly positive")
    if not domination:
        failures.append("domination |g2| <= g1 violated")

    return AdmissibilityReport(
        sup_g1=sup_g1, sup_g2=sup_g2,
        sup_weighted_grad_g1=sup_w1, sup_weighted_grad_g2=sup_w2,
        min_g1=min_g1, domination_ok=domination,
        n_samples=len(pts), sample_range=(float(lo), float(hi)),
        passed=not failures, failures=tuple(failures))


def admissibility_range(grid) -> tuple[float, float]:
    """Default sampling range: up to 4x the largest grid wavenumber."""
    return (0.0, 4.0 * float(np.max(grid.xi_abs)))


def weighted_sup_quantity(pair: MultiplierPair,
                          sample_range: tuple[float, float],
                          n_samples: int = 256) -> float:
    """max over both symbols of sup(|G|, <xi>|G'|) on the sampled range.

    This single number is what every stability constant of the model family
    depends on, so its behaviour under mu is worth watching on its own.
    """
    rep = validate_admissible(pair, sample_range, n_samples)
    return max(rep.sup_g1, rep.sup_g2,
               rep.sup_weighted_grad_g1, rep.sup_weighted_grad_g2)


def preset(name: str, mu: float = 1.0) -> tuple[MultiplierPair, str]:
    """Named model pairs plus their consistency-order tag.

    shallow_water   g1 = g2 = 1                       O(mu)
    abcd            g1 = g2 = 1/(1 + mu|xi|^2/6)      O(mu^2 + mu*eps)
    ddk             g1^2 = g2 = tanh ratio            O(mu*eps)
    quasilinear_wb  g1 = g2 = sqrt tanh ratio         O(mu*eps)
    open_wb         g1 = sqrt tanh ratio, g2 = 1      O(mu*eps), inadmissible
                    (|g2| <= g1 fails; shipped for experimentation only)
    """
    if name == "shallow_water":
        return (MultiplierPair(SymbolSpec("identity", mu=mu),
                               SymbolSpec("identity", mu=mu)), "O(mu)")
    if name == "abcd":
        return (MultiplierPair(SymbolSpec("bcs_boussinesq", mu=mu, a=0.0, b=1.0 / 6.0),
                               SymbolSpec("inv_helmholtz", mu=mu, b=1.0 / 6.0)),
                "O(mu^2 + mu*eps)")
    if name == "ddk":
        return (MultiplierPair(SymbolSpec("sqrt_tanh_ratio", mu=mu),
                               SymbolSpec("tanh_ratio", mu=mu)), "O(mu*eps)")
    if name == "quasilinear_wb":
        return (MultiplierPair(SymbolSpec("sqrt_tanh_ratio", mu=mu),
                               SymbolSpec("sqrt_tanh_ratio", mu=mu)), "O(mu*eps)")
    if name == "open_wb":
        return (MultiplierPair(SymbolSpec("sqrt_tanh_ratio", mu=mu),
                               SymbolSpec("identity", mu=mu)), "O(mu*eps)")
    raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
