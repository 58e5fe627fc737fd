"""Configuration, snapshot persistence, diagnostics CSV, and figure output.

Three formats leave this module, all of them contracts:

  * run configs: JSON, strict (unknown keys are errors, everything validated
    before a run starts);
  * snapshots: little-endian binary, magic "WBSNAP01", u64 dim and N, f64
    box length / time / mu / epsilon, then the surface and each velocity
    component as row-major f64 -- bit-exact round trips;
  * diagnostics: CSV with the fixed header below, floats at 17 significant
    digits so reruns are byte-comparable.

Figures are rendered with matplotlib's SVG backend pinned to a fixed hash
salt and no embedded date, which keeps them byte-stable too.
"""

from __future__ import annotations

import dataclasses
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .operators import ModelParams, State, bandlimit, check_non_cavitation, make_state
from .spectral import SpectralGrid, make_grid
from .stepping import StepperConfig, Trajectory
from .symbols import (MultiplierPair, SymbolSpec, admissibility_range, preset,
                      validate_admissible)

SNAPSHOT_MAGIC = b"WBSNAP01"

CSV_COLUMNS = ("time", "x_norm_0", "x_norm_t0", "x_norm_t0p1", "x_norm_s",
               "y_norm_0", "quad_form", "min_depth", "max_velocity")
CSV_HEADER = ",".join(CSV_COLUMNS)

PLOT_HASH_SALT = "whitham-lab"


class ConfigError(Exception):
    pass


class ParseError(ConfigError):
    def __init__(self, path, line: int, msg: str):
        super().__init__(f"{path}:{line}: {msg}")
        self.line = line


@dataclass(frozen=True)
class Violation:
    field: str
    reason: str


class ValidationError(ConfigError):
    def __init__(self, violations: list[Violation]):
        lines = "; ".join(f"{v.field}: {v.reason}" for v in violations)
        super().__init__(f"invalid config: {lines}")
        self.violations = violations


class SnapshotError(ValueError):
    pass


class BadMagic(SnapshotError):
    pass


class TruncatedPayload(SnapshotError):
    pass


@dataclass
class InitialSpec:
    """Initial surface shape; velocity starts at rest except for file input.

    center and width are fractions of the box length, mode an integer
    wavenumber for the cosine kind.
    """

    kind: str = "gaussian"
    amplitude: float = 0.1
    center: float = 0.5
    width: float = 0.1
    mode: int = 1
    path: str | None = None


@dataclass
class OutputSpec:
    dir: str = "out"
    csv_cadence: int = 1
    snapshot_cadence: int = 0   # 0 = final snapshot only
    blowup_factor: float = 100.0


@dataclass
class RunConfig:
    model: str | dict = "shallow_water"
    dim: int = 1
    n: int = 64
    length: float = 2.0 * math.pi
    mu: float = 1.0
    epsilon: float = 0.1
    h_min: float = 0.5
    s: float | None = None
    t0: float | None = None
    t_end_over_eps: float | None = None
    stepper: StepperConfig = field(default_factory=StepperConfig)
    initial: InitialSpec = field(default_factory=InitialSpec)
    seed: int = 0
    output: OutputSpec = field(default_factory=OutputSpec)

    def t_end(self) -> float:
        if self.t_end_over_eps is not None:
            if self.epsilon <= 0:
                raise ValueError("t_end_over_eps needs epsilon > 0")
            return self.t_end_over_eps / self.epsilon
        return self.stepper.t_end


def resolve_pair(config: RunConfig) -> tuple[MultiplierPair, str]:
    """Preset name or inline {g1: {...}, g2: {...}} spec to a symbol pair."""
    if isinstance(config.model, str):
        return preset(config.model, mu=config.mu)
    spec = dict(config.model)
    try:
        g1_kw, g2_kw = dict(spec.pop("g1")), dict(spec.pop("g2"))
    except KeyError as e:
        raise ValidationError([Violation("model", f"custom pair needs {e}")])
    if spec:
        raise ValidationError([Violation("model",
                                         f"unknown keys {sorted(spec)}")])
    def build(kw):
        kw = dict(kw)
        if "table" in kw and kw["table"] is not None:
            kw["table"] = tuple(tuple(p) for p in kw["table"])
        kw.setdefault("mu", config.mu)
        return SymbolSpec(**kw)
    return MultiplierPair(build(g1_kw), build(g2_kw)), "custom"


def model_params(config: RunConfig) -> ModelParams:
    pair, _ = resolve_pair(config)
    return ModelParams(pair=pair, epsilon=config.epsilon, mu=config.mu,
                       h_min=config.h_min)


def build_grid(config: RunConfig) -> SpectralGrid:
    return make_grid(config.dim, config.n, config.length)


def initial_state(config: RunConfig, grid: SpectralGrid | None = None) -> State:
    if grid is None:
        grid = build_grid(config)
    spec = config.initial
    if spec.kind == "gaussian":
        x0 = [spec.center * grid.length] * grid.dim
        sigma = spec.width * grid.length
        d2 = sum(((x - c + grid.length / 2.0) % grid.length
                  - grid.length / 2.0) ** 2 for x, c in zip(grid.x, x0))
        zeta = spec.amplitude * np.exp(-d2 / (2.0 * sigma * sigma))
        return bandlimit(make_state(grid, zeta))
    if spec.kind == "cosine":
        k = 2.0 * math.pi * spec.mode / grid.length
        zeta = spec.amplitude * np.prod(
            [np.cos(k * x) for x in grid.x], axis=0)
        return bandlimit(make_state(grid, zeta))
    if spec.kind == "file":
        if not spec.path:
            raise ValidationError([Violation("initial.path",
                                             "required for kind 'file'")])
        state, _ = read_snapshot(spec.path)
        if state.grid != grid:
            raise ValidationError([Violation(
                "initial.path", "snapshot grid does not match config")])
        return state
    raise ValidationError([Violation("initial.kind",
                                     f"unknown kind {spec.kind!r}")])


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]
    warnings: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_config(config: RunConfig) -> ValidationReport:
    """Full pre-run validation: ranges, admissibility, initial depth."""
    bad: list[Violation] = []
    warns: list[str] = []

    if config.dim not in (1, 2):
        bad.append(Violation("dim", "must be 1 or 2"))
    if not (isinstance(config.n, int) and config.n >= 8
            and config.n & (config.n - 1) == 0):
        bad.append(Violation("n", "must be a power of two, at least 8"))
    if not config.length > 0:
        bad.append(Violation("length", "must be positive"))
    if not 0.0 < config.mu <= 1.0:
        bad.append(Violation("mu", "must lie in (0,1]"))
    if not 0.0 <= config.epsilon <= 1.0:
        bad.append(Violation("epsilon", "must lie in (0,1]"))
    if not 0.0 < config.h_min <= 1.0:
        bad.append(Violation("h_min", "must lie in (0,1]"))
    if config.initial.kind not in ("gaussian", "cosine", "file"):
        bad.append(Violation("initial.kind",
                             f"unknown kind {config.initial.kind!r}"))
    if config.output.csv_cadence < 1:
        bad.append(Violation("output.csv_cadence", "must be >= 1"))
    if config.t_end_over_eps is not None and config.epsilon == 0.0:
        bad.append(Violation("t_end_over_eps", "needs epsilon > 0"))
    if bad:
        return ValidationReport(tuple(bad), tuple(warns))

    try:
        pair, _ = resolve_pair(config)
    except (ValidationError, ValueError) as e:
        vs = e.violations if isinstance(e, ValidationError) else \
            [Violation("model", str(e))]
        return ValidationReport(tuple(vs), tuple(warns))

    grid = build_grid(config)
    rep = validate_admissible(pair, admissibility_range(grid))
    for f in rep.failures:
        bad.append(Violation("model", f"pair not admissible: {f}"))

    try:
        init = initial_state(config, grid)
    except ValidationError as e:
        bad.extend(e.violations)
    except (SnapshotError, OSError) as e:
        bad.append(Violation("initial", str(e)))
    else:
        ok, depth = check_non_cavitation(init.zeta, config.epsilon,
                                         config.h_min)
        if not ok:
            bad.append(Violation(
                "initial", f"non-cavitation fails: min depth {depth:.6g} "
                           f"< h_min {config.h_min:.6g}"))

    s = config.s
    if s is not None and not s > config.dim / 2.0 + 1.0:
        warns.append(f"s = {s} is not above d/2 + 1 = {config.dim / 2 + 1}; "
                     "the well-posedness theory does not cover this index")
    return ValidationReport(tuple(bad), tuple(warns))


_SECTION_TYPES = {"stepper": StepperConfig, "initial": InitialSpec,
                  "output": OutputSpec}


def config_from_dict(data: dict) -> RunConfig:
    """Strict construction: unknown keys anywhere are violations."""
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValidationError([Violation(k, "unknown key")
                               for k in sorted(unknown)])
    kwargs = dict(data)
    for name, cls in _SECTION_TYPES.items():
        if name in kwargs and isinstance(kwargs[name], dict):
            sect = kwargs[name]
            sect_known = {f.name for f in dataclasses.fields(cls)}
            sect_unknown = set(sect) - sect_known
            if sect_unknown:
                raise ValidationError([Violation(f"{name}.{k}", "unknown key")
                                       for k in sorted(sect_unknown)])
            try:
                kwargs[name] = cls(**sect)
            except (TypeError, ValueError) as e:
                raise ValidationError([Violation(name, str(e))]) from None
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as e:
        raise ValidationError([Violation("config", str(e))]) from None


def config_to_dict(config: RunConfig) -> dict:
    return dataclasses.asdict(config)


def parse_config(path) -> RunConfig:
    """Read and build, without semantic validation (see validate_config)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror or e}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(path, e.lineno, e.msg) from None
    if not isinstance(data, dict):
        raise ParseError(path, 1, "top level must be a JSON object")
    return config_from_dict(data)


def load_config(path) -> RunConfig:
    """parse_config plus validate_config; raises on any violation."""
    config = parse_config(path)
    report = validate_config(config)
    if not report.ok:
        raise ValidationError(list(report.violations))
    return config


def write_config(config: RunConfig, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(config_to_dict(config), indent=2) + "\n",
                    encoding="utf-8")
    return path


def write_snapshot(path, state: State, mu: float, epsilon: float) -> Path:
    if not state.is_finite():
        raise SnapshotError("refusing to snapshot a non-finite state")
    grid = state.grid
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<2Q", grid.dim, grid.n))
        fh.write(struct.pack("<4d", grid.length, state.time, mu, epsilon))
        fh.write(np.ascontiguousarray(state.zeta.values, dtype="<f8").tobytes())
        for comp in state.v.values:
            fh.write(np.ascontiguousarray(comp, dtype="<f8").tobytes())
    return path


def read_snapshot(path) -> tuple[State, dict]:
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:8] != SNAPSHOT_MAGIC:
        raise BadMagic(f"{path}: not a snapshot file")
    head = 8 + 16 + 32
    if len(raw) < head:
        raise TruncatedPayload(f"{path}: header incomplete")
    dim, n = struct.unpack_from("<2Q", raw, 8)
    length, time, mu, epsilon = struct.unpack_from("<4d", raw, 24)
    count = n ** dim
    expected = head + 8 * count * (1 + dim)
    if len(raw) != expected:
        raise TruncatedPayload(
            f"{path}: expected {expected} bytes, found {len(raw)}")
    grid = make_grid(int(dim), int(n), float(length))
    flat = np.frombuffer(raw, dtype="<f8", offset=head)
    zeta = flat[:count].reshape(grid.shape).copy()
    v = np.stack([flat[(i + 1) * count:(i + 2) * count].reshape(grid.shape)
                  for i in range(int(dim))]).copy()
    if not (np.all(np.isfinite(zeta)) and np.all(np.isfinite(v))):
        raise SnapshotError(f"{path}: non-finite samples")
    state = make_state(grid, zeta, v, time=float(time))
    return state, {"dim": int(dim), "n": int(n), "length": float(length),
                   "time": float(time), "mu": float(mu),
                   "epsilon": float(epsilon)}


def write_diagnostics_csv(traj: Trajectory, path) -> Path:
    """One row per report-bearing step, 17 significant digits throughout."""
    path = Path(path)
    lines = [CSV_HEADER]
    for rep in traj.reports:
        if rep is None:
            continue
        lines.append(",".join(format(getattr(rep, c), ".17g")
                              for c in CSV_COLUMNS))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_csv_columns(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        import csv as _csv
        reader = _csv.DictReader(fh)
        rows = list(reader)
        names = reader.fieldnames or []
    return {name: np.array([float(r[name]) for r in rows]) for name in names}


def emit_plot(csv_path, columns, out_path, logy: bool = False) -> Path:
    """Render the named CSV columns against time into a deterministic SVG."""
    out_path = Path(out_path)
    if out_path.suffix.lower() != ".svg":
        raise ValueError("plots are emitted as .svg")
    data = read_csv_columns(csv_path)
    if "time" not in data:
        raise ValueError(f"{csv_path}: no time column")
    missing = [c for c in columns if c not in data]
    if missing:
        raise ValueError(f"unknown column(s): {', '.join(missing)}")

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": PLOT_HASH_SALT}):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for c in columns:
            ax.plot(data["time"], data[c], label=c)
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel("time")
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(out_path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return out_path
