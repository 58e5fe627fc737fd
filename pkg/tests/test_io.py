"""Config parsing and validation, snapshot format, CSV output, and plots."""

import json
import math
import struct

import numpy as np
import pytest

from whitham_lab.io import (CSV_HEADER, BadMagic, InitialSpec, OutputSpec,
                            ParseError, RunConfig, SnapshotError,
                            TruncatedPayload, ValidationError, build_grid,
                            config_from_dict, config_to_dict, emit_plot,
                            initial_state, load_config, model_params,
                            parse_config, read_csv_columns, read_snapshot,
                            resolve_pair, validate_config, write_config,
                            write_diagnostics_csv, write_snapshot)
from whitham_lab.operators import ModelParams, make_state
from whitham_lab.spectral import make_grid
from whitham_lab.stepping import StepperConfig, Trajectory, run


def minimal_config(**overrides) -> RunConfig:
    base = RunConfig(model="shallow_water", dim=1, n=64)
    for k, v in overrides.items():
        setattr(base, k, v)
    return base


# --- config construction and validation ---------------------------------

def test_minimal_config_passes_with_defaults():
    config = minimal_config()
    report = validate_config(config)
    assert report.ok
    assert config.epsilon == 0.1 and config.h_min == 0.5
    assert config.initial.kind == "gaussian"
    assert config.output.csv_cadence == 1


def test_epsilon_out_of_range_message():
    report = validate_config(minimal_config(epsilon=1.5))
    assert not report.ok
    (v,) = [v for v in report.violations if v.field == "epsilon"]
    assert v.reason == "must lie in (0,1]"


def test_epsilon_zero_is_tolerated_for_linear_runs():
    assert validate_config(minimal_config(epsilon=0.0)).ok


def test_large_cosine_amplitude_cavitates():
    config = minimal_config(epsilon=1.0, h_min=0.5)
    config.initial = InitialSpec(kind="cosine", amplitude=2.0, mode=1)
    report = validate_config(config)
    assert not report.ok
    assert any("non-cavitation" in v.reason for v in report.violations)
    # min(1 + eps*zeta) = 1 - 2 = -1, far below the floor
    assert any("-1" in v.reason for v in report.violations)


def test_small_norm_index_warns_but_passes():
    report = validate_config(minimal_config(s=1.2))
    assert report.ok
    assert report.warnings and "1.5" in report.warnings[0]


def test_bad_grid_parameters_rejected():
    report = validate_config(minimal_config(n=48))
    assert any(v.field == "n" for v in report.violations)
    report = validate_config(minimal_config(dim=3))
    assert any(v.field == "dim" for v in report.violations)


def test_undominated_custom_pair_fails_validation():
    config = minimal_config()
    config.model = {"g1": {"kind": "identity"},
                    "g2": {"kind": "custom_table",
                           "table": [[0.0, 2.0], [300.0, 2.0]]}}
    report = validate_config(config)
    assert not report.ok
    assert any("domination" in v.reason for v in report.violations)


def test_custom_pair_resolves():
    config = minimal_config()
    config.model = {"g1": {"kind": "sqrt_tanh_ratio"},
                    "g2": {"kind": "tanh_ratio"}}
    pair, name = resolve_pair(config)
    assert name == "custom"
    assert pair.g1.mu == config.mu
    assert validate_config(config).ok


def test_t_end_over_eps_requires_positive_epsilon():
    config = minimal_config(epsilon=0.0, t_end_over_eps=1.0)
    report = validate_config(config)
    assert any(v.field == "t_end_over_eps" for v in report.violations)
    good = minimal_config(epsilon=0.2, t_end_over_eps=1.0)
    assert good.t_end() == pytest.approx(5.0)


def test_model_params_carries_config_fields():
    params = model_params(minimal_config(epsilon=0.25, mu=0.5, h_min=0.7))
    assert isinstance(params, ModelParams)
    assert (params.epsilon, params.mu, params.h_min) == (0.25, 0.5, 0.7)


# --- dict and file round trips ------------------------------------------

def test_dict_round_trip_is_identity():
    config = minimal_config(epsilon=0.3, mu=0.25, seed=7)
    config.stepper = StepperConfig(cfl=0.3, t_end=2.0)
    config.initial = InitialSpec(kind="cosine", amplitude=0.2, mode=3)
    config.output = OutputSpec(dir="results", csv_cadence=4)
    assert config_from_dict(config_to_dict(config)) == config


def test_file_round_trip_is_identity(tmp_path):
    config = minimal_config(epsilon=0.2, mu=0.5)
    config.model = {"g1": {"kind": "sqrt_tanh_ratio"},
                    "g2": {"kind": "sqrt_tanh_ratio"}}
    path = write_config(config, tmp_path / "run.json")
    assert load_config(path) == config


def test_unknown_top_level_key_rejected(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"model": "shallow_water", "nn": 64}))
    with pytest.raises(ValidationError) as err:
        parse_config(path)
    assert err.value.violations[0].field == "nn"
    assert err.value.violations[0].reason == "unknown key"


def test_unknown_section_key_rejected(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"initial": {"kind": "cosine", "sigma": 1}}))
    with pytest.raises(ValidationError) as err:
        parse_config(path)
    assert err.value.violations[0].field == "initial.sigma"


def test_malformed_json_reports_line(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{\n  "model": "shallow_water",\n  oops\n}\n')
    with pytest.raises(ParseError) as err:
        parse_config(path)
    assert err.value.line == 3


def test_non_object_top_level(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("[1, 2, 3]\n")
    with pytest.raises(ParseError):
        parse_config(path)


def test_load_config_validates(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"model": "shallow_water", "epsilon": 1.5}))
    with pytest.raises(ValidationError):
        load_config(path)


# --- initial data builders ----------------------------------------------

def test_gaussian_initial_is_periodic_and_centered():
    config = minimal_config()
    config.initial = InitialSpec(kind="gaussian", amplitude=0.4,
                                 center=0.0, width=0.05)
    state = initial_state(config)
    grid = state.grid
    # peak sits at x = 0 even though the bump wraps around the boundary
    assert np.argmax(state.zeta.values) == 0
    assert state.zeta.values[0] == pytest.approx(0.4, rel=1e-6)
    left = state.zeta.values[1]
    right = state.zeta.values[-1]
    assert left == pytest.approx(right, rel=1e-12)
    assert np.all(state.v.values == 0.0)


def test_cosine_initial_matches_formula():
    config = minimal_config()
    config.initial = InitialSpec(kind="cosine", amplitude=0.3, mode=2)
    state = initial_state(config)
    x = state.grid.x[0]
    assert np.allclose(state.zeta.values, 0.3 * np.cos(2 * x), atol=1e-14)


def test_initial_from_snapshot_file(tmp_path):
    grid = make_grid(1, 64, 2 * math.pi)
    rng = np.random.default_rng(3)
    source = make_state(grid, 0.1 * rng.standard_normal(grid.shape),
                        0.1 * rng.standard_normal((1,) + grid.shape))
    path = write_snapshot(tmp_path / "s.bin", source, mu=1.0, epsilon=0.1)
    config = minimal_config()
    config.initial = InitialSpec(kind="file", path=str(path))
    state = initial_state(config)
    assert np.array_equal(state.zeta.values, source.zeta.values)
    assert np.array_equal(state.v.values, source.v.values)


def test_initial_file_grid_mismatch(tmp_path):
    grid = make_grid(1, 32, 2 * math.pi)
    path = write_snapshot(tmp_path / "s.bin",
                          make_state(grid, np.zeros(grid.shape)),
                          mu=1.0, epsilon=0.1)
    config = minimal_config()          # n = 64 here
    config.initial = InitialSpec(kind="file", path=str(path))
    with pytest.raises(ValidationError):
        initial_state(config)


# --- snapshots ----------------------------------------------------------

def random_snapshot_state(dim, n, seed=0):
    grid = make_grid(dim, n, 2 * math.pi)
    rng = np.random.default_rng(seed)
    return make_state(grid, rng.standard_normal(grid.shape),
                      rng.standard_normal((dim,) + grid.shape), time=1.25)


@pytest.mark.parametrize("dim,n", [(1, 32), (2, 16)])
def test_snapshot_round_trip_bit_exact(tmp_path, dim, n):
    state = random_snapshot_state(dim, n)
    path = write_snapshot(tmp_path / "s.bin", state, mu=0.5, epsilon=0.2)
    back, meta = read_snapshot(path)
    assert back.zeta.values.tobytes() == state.zeta.values.tobytes()
    assert back.v.values.tobytes() == state.v.values.tobytes()
    assert back.time == state.time
    assert meta == {"dim": dim, "n": n, "length": 2 * math.pi,
                    "time": 1.25, "mu": 0.5, "epsilon": 0.2}


def test_snapshot_size_2d_16():
    # 8 magic + 2 u64 + 4 f64 + 3 fields of 256 doubles
    import tempfile
    from pathlib import Path
    state = random_snapshot_state(2, 16)
    with tempfile.TemporaryDirectory() as d:
        path = write_snapshot(Path(d) / "s.bin", state, mu=1.0, epsilon=0.1)
        assert path.stat().st_size == 6200


def test_snapshot_header_layout(tmp_path):
    state = random_snapshot_state(1, 32)
    path = write_snapshot(tmp_path / "s.bin", state, mu=0.25, epsilon=0.3)
    raw = path.read_bytes()
    assert raw[:8] == b"WBSNAP01"
    assert struct.unpack_from("<2Q", raw, 8) == (1, 32)
    assert struct.unpack_from("<4d", raw, 24) == (2 * math.pi, 1.25, 0.25, 0.3)


def test_snapshot_bad_magic(tmp_path):
    path = tmp_path / "s.bin"
    path.write_bytes(b"NOTASNAP" + b"\x00" * 64)
    with pytest.raises(BadMagic):
        read_snapshot(path)


def test_snapshot_truncated(tmp_path):
    state = random_snapshot_state(1, 32)
    path = write_snapshot(tmp_path / "s.bin", state, mu=1.0, epsilon=0.1)
    raw = path.read_bytes()
    (tmp_path / "t.bin").write_bytes(raw[:-16])
    with pytest.raises(TruncatedPayload):
        read_snapshot(tmp_path / "t.bin")


def test_snapshot_rejects_non_finite_write(tmp_path):
    state = random_snapshot_state(1, 32)
    state.zeta.values[3] = np.nan
    with pytest.raises(SnapshotError):
        write_snapshot(tmp_path / "s.bin", state, mu=1.0, epsilon=0.1)


def test_snapshot_rejects_non_finite_read(tmp_path):
    state = random_snapshot_state(1, 32)
    path = write_snapshot(tmp_path / "s.bin", state, mu=1.0, epsilon=0.1)
    raw = bytearray(path.read_bytes())
    raw[56:64] = struct.pack("<d", math.inf)   # first zeta sample
    (tmp_path / "bad.bin").write_bytes(bytes(raw))
    with pytest.raises(SnapshotError):
        read_snapshot(tmp_path / "bad.bin")


# --- diagnostics CSV ----------------------------------------------------

def short_run(cadence=1, t_end=0.5, dt=0.05):
    config = minimal_config(epsilon=0.1)
    grid = build_grid(config)
    init = initial_state(config)
    params = model_params(config)
    stepper = StepperConfig(t_end=t_end, dt_override=dt)
    return run(init, params, stepper, cadence=cadence)


def test_csv_header_and_digits(tmp_path):
    traj = short_run()
    path = write_diagnostics_csv(traj, tmp_path / "d.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert lines[0] == ("time,x_norm_0,x_norm_t0,x_norm_t0p1,x_norm_s,"
                        "y_norm_0,quad_form,min_depth,max_velocity")
    # 17 significant digits survive a parse back to the same float
    cols = read_csv_columns(path)
    for name, values in cols.items():
        reparsed = [float(format(v, ".17g")) for v in values]
        assert np.array_equal(np.array(reparsed), values)


def test_csv_empty_trajectory_header_only(tmp_path):
    traj = Trajectory()
    path = write_diagnostics_csv(traj, tmp_path / "d.csv")
    assert path.read_text() == CSV_HEADER + "\n"


def test_csv_row_count_formula(tmp_path):
    # t_end 0.5, dt 0.05, cadence 2 -> floor(0.5/0.1) + 1 = 6 rows
    traj = short_run(cadence=2, t_end=0.5, dt=0.05)
    path = write_diagnostics_csv(traj, tmp_path / "d.csv")
    rows = path.read_text().splitlines()[1:]
    assert len(rows) == 6
    cols = read_csv_columns(path)
    assert cols["time"][0] == 0.0
    assert cols["time"][-1] == pytest.approx(0.5, abs=1e-12)


def test_csv_t_end_zero_single_row(tmp_path):
    config = minimal_config(epsilon=0.1)
    init = initial_state(config)
    traj = run(init, model_params(config),
               StepperConfig(t_end=0.0, dt_override=0.05))
    path = write_diagnostics_csv(traj, tmp_path / "d.csv")
    assert len(path.read_text().splitlines()) == 2


def test_csv_values_match_reports(tmp_path):
    traj = short_run(cadence=1, t_end=0.2, dt=0.05)
    path = write_diagnostics_csv(traj, tmp_path / "d.csv")
    cols = read_csv_columns(path)
    reps = [r for r in traj.reports if r is not None]
    assert np.array_equal(cols["x_norm_s"],
                          np.array([r.x_norm_s for r in reps]))
    assert np.array_equal(cols["min_depth"],
                          np.array([r.min_depth for r in reps]))


# --- plots --------------------------------------------------------------

@pytest.fixture()
def sample_csv(tmp_path):
    traj = short_run(cadence=1, t_end=0.3, dt=0.05)
    return write_diagnostics_csv(traj, tmp_path / "d.csv")


def test_emit_plot_writes_svg(tmp_path, sample_csv):
    out = emit_plot(sample_csv, ["x_norm_s", "quad_form"],
                    tmp_path / "fig.svg")
    text = out.read_text()
    assert text.lstrip().startswith("<?xml")
    assert "<svg" in text
    assert "x_norm_s" in text and "quad_form" in text


def test_emit_plot_deterministic(tmp_path, sample_csv):
    a = emit_plot(sample_csv, ["x_norm_s"], tmp_path / "a.svg")
    b = emit_plot(sample_csv, ["x_norm_s"], tmp_path / "b.svg")
    assert a.read_bytes() == b.read_bytes()


def test_emit_plot_log_axis(tmp_path, sample_csv):
    out = emit_plot(sample_csv, ["quad_form"], tmp_path / "l.svg", logy=True)
    assert out.exists() and out.stat().st_size > 0


def test_emit_plot_unknown_column(tmp_path, sample_csv):
    with pytest.raises(ValueError, match="unknown column"):
        emit_plot(sample_csv, ["nope"], tmp_path / "x.svg")


def test_emit_plot_requires_svg_suffix(tmp_path, sample_csv):
    with pytest.raises(ValueError):
        emit_plot(sample_csv, ["quad_form"], tmp_path / "fig.png")
