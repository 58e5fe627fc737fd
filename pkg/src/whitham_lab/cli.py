"""Command-line front end.

Subcommands:

    run       integrate one config; writes diagnostics.csv, a rendered
              figure, and snapshots into the configured output directory
    sweep     execute a study described by a JSON file
    validate  check a config (admissibility, non-cavitation) without running
    compare   two-model error/residual comparison
    selftest  quick invariant battery, exit 0 iff everything holds
    plot      render columns of a diagnostics CSV to SVG

Exit codes: 0 success, 1 usage, 2 validation, 3 blow-up or other run
failure, 4 internal error. Failed runs leave a ".failed" marker in the
output directory; a partial CSV is written with a ".failed" suffix so it
can never be mistaken for a completed run.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .io import (CSV_HEADER, ConfigError, PLOT_HASH_SALT, RunConfig,
                 ValidationError, build_grid, config_from_dict,
                 config_to_dict, emit_plot, initial_state, load_config,
                 model_params, parse_config, read_snapshot, validate_config,
                 write_config, write_diagnostics_csv, write_snapshot)
from .stepping import StepperError, linear_propagator, run
from .studies import StudyError, StudySpec, model_compare, run_study

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_BLOWUP = 3
EXIT_INTERNAL = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="whitham-lab",
                     description="pseudo-spectral workbench for dispersive "
                                 "shallow-water model families")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("run", help="integrate one configured run")
    p.add_argument("config")
    p.add_argument("--out", help="override the configured output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="execute a study config")
    p.add_argument("study")
    p.add_argument("--out", help="override the study output directory")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("validate", help="check a config without running")
    p.add_argument("config")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("compare", help="cross-model error vs residual bound")
    p.add_argument("config_a")
    p.add_argument("config_b")
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--out", help="directory for compare.csv and compare.svg")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("selftest", help="quick invariant battery")
    p.set_defaults(func=_cmd_selftest)

    p = sub.add_parser("plot", help="render CSV columns to SVG")
    p.add_argument("csv")
    p.add_argument("--cols", required=True,
                   help="comma-separated column names")
    p.add_argument("--out", required=True)
    p.add_argument("--log", action="store_true", help="log-scale y axis")
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:          # --help / --version
        return int(e.code or 0)
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except StudyError as e:
        print(f"study error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except StepperError as e:
        print(f"run failed: {e}", file=sys.stderr)
        return EXIT_BLOWUP
    except Exception as e:            # noqa: BLE001 - the exit-4 catchall
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


# --- run ----------------------------------------------------------------

def _cmd_run(args) -> int:
    config = load_config(args.config)
    outdir = Path(args.out or config.output.dir)
    outdir.mkdir(parents=True, exist_ok=True)
    marker = outdir / ".failed"
    if marker.exists():
        marker.unlink()

    grid = build_grid(config)
    params = model_params(config)
    init = initial_state(config, grid)
    stepper = dataclasses.replace(config.stepper, t_end=config.t_end())

    try:
        traj = run(init, params, stepper, s=config.s, t0=config.t0,
                   cadence=config.output.csv_cadence,
                   blowup_factor=config.output.blowup_factor)
    except StepperError as e:
        marker.write_text(f"{type(e).__name__}: {e}\n")
        partial = getattr(e, "trajectory", None)
        if partial is not None and len(partial):
            write_diagnostics_csv(partial, outdir / "diagnostics.csv.failed")
        print(f"run failed: {e}", file=sys.stderr)
        return EXIT_BLOWUP

    csv_path = write_diagnostics_csv(traj, outdir / "diagnostics.csv")
    emit_plot(csv_path, ["x_norm_s", "x_norm_0", "quad_form"],
              outdir / "diagnostics.svg")
    write_snapshot(outdir / "final.bin", traj.final, config.mu,
                   config.epsilon)
    cadence = config.output.snapshot_cadence
    if cadence > 0:
        for k in range(0, len(traj), cadence):
            write_snapshot(outdir / f"snapshot_{k:06d}.bin", traj.states[k],
                           config.mu, config.epsilon)
    last = [r for r in traj.reports if r is not None][-1]
    print(f"completed t={traj.times[-1]:.6g} steps={traj.meta['n_steps']} "
          f"x_norm_s={last.x_norm_s:.6g} min_depth={last.min_depth:.6g} "
          f"out={outdir}")
    return EXIT_OK


# --- sweep --------------------------------------------------------------

_STUDY_KEYS = {"kind", "base", "epsilons", "mus", "ns", "dts", "models",
               "t_target", "fit_window", "seed", "output_dir"}


def _load_study(path) -> tuple[StudySpec, str]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: {e.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    unknown = set(data) - _STUDY_KEYS
    if unknown:
        raise ConfigError(f"unknown study keys: {sorted(unknown)}")
    if "kind" not in data or "base" not in data:
        raise ConfigError("study config needs 'kind' and 'base'")
    outdir = data.pop("output_dir", "sweep_out")
    base = config_from_dict(data.pop("base"))
    report = validate_config(base)
    if not report.ok:
        raise ValidationError(list(report.violations))
    if "fit_window" in data:
        data["fit_window"] = tuple(data["fit_window"])
    if "models" in data:
        data["models"] = tuple(m if isinstance(m, str) else dict(m)
                               for m in data["models"])
    try:
        spec = StudySpec(base=base, **data)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None
    return spec, outdir


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _write_rows_csv(rows, path) -> None:
    names: list[str] = []
    for row in rows:
        for key in row:
            if key not in names:
                names.append(key)
    lines = [",".join(names)]
    for row in rows:
        lines.append(",".join(_format_cell(row.get(k, "")) for k in names))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _study_figure(spec: StudySpec, report, path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": PLOT_HASH_SALT}):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        kind = spec.kind
        if kind == "energy_growth":
            ax.plot(report.epsilons, report.rates, "o-", label="fitted rate")
            eps = np.linspace(0, max(report.epsilons), 32)
            ax.plot(eps, report.slope * eps, "--",
                    label=f"slope {report.slope:.3g}")
            ax.set_xlabel("epsilon")
            ax.set_ylabel("growth rate")
        elif kind == "timescale":
            for mu in sorted({c.mu for c in report.cells}):
                pts = [(c.epsilon, c.norm_ratio) for c in report.cells
                       if c.mu == mu and c.completed]
                if pts:
                    ax.plot(*zip(*pts), "o-", label=f"mu={mu:g}")
            ax.set_xlabel("epsilon")
            ax.set_ylabel("norm ratio at T/epsilon")
        elif kind == "stability":
            ax.semilogx(report.mus,
                        [c.bound_constant for c in report.compares], "o-")
            ax.set_xlabel("mu")
            ax.set_ylabel("measured bound constant")
        elif kind == "mu_scaling":
            ax.loglog(report.mus, report.errors, "o-",
                      label=f"slope {report.slope:.3g}")
            ax.set_xlabel("mu")
            ax.set_ylabel("cross-model gap")
        else:                         # convergence
            ax.loglog(report.temporal.dts, report.temporal.errors, "o-",
                      label="temporal")
            if report.spatial.errors:
                ax.loglog([1.0 / n for n in report.spatial.ns],
                          report.spatial.errors, "s-", label="spatial (1/N)")
            ax.set_xlabel("dt  /  1/N")
            ax.set_ylabel("error")
        ax.grid(True, alpha=0.3)
        if ax.get_legend_handles_labels()[0]:
            ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def _cmd_sweep(args) -> int:
    spec, outdir_name = _load_study(args.study)
    outdir = Path(args.out or outdir_name)
    outdir.mkdir(parents=True, exist_ok=True)
    report = run_study(spec)
    _write_rows_csv(report.rows(), outdir / "study.csv")
    (outdir / "summary.json").write_text(
        json.dumps(report.summary(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    _study_figure(spec, report, outdir / "study.svg")
    print(f"{spec.kind}: {json.dumps(report.summary(), sort_keys=True)}")
    return EXIT_OK


# --- validate -----------------------------------------------------------

def _cmd_validate(args) -> int:
    config = parse_config(args.config)
    report = validate_config(config)
    for v in report.violations:
        print(f"violation: {v.field}: {v.reason}")
    for w in report.warnings:
        print(f"warning: {w}")
    if report.ok:
        print("config valid")
        return EXIT_OK
    return EXIT_VALIDATION


# --- compare ------------------------------------------------------------

def _cmd_compare(args) -> int:
    config_a = load_config(args.config_a)
    config_b = load_config(args.config_b)
    report = model_compare(config_a, config_b, t_end=args.t_end)
    print(f"bound_constant={report.bound_constant:.6g} "
          f"residual_sup={report.residual_sup:.6g} "
          f"e0={report.e0:.6g} max_error={max(report.error_curve):.6g}")
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        _write_rows_csv(report.rows(), outdir / "compare.csv")
        emit_plot(outdir / "compare.csv", ["error"], outdir / "compare.svg")
    return EXIT_OK


# --- selftest -----------------------------------------------------------

def _selftest_checks():
    """Small end-to-end battery; each check raises on failure.

    This is a curated set of structural identities and round trips, fast
    enough to run on every install, not a replacement for the test suite.
    """
    import math

    from .diagnostics import coercivity_check, energy_report
    from .operators import (ModelParams, apply_coefficient,
                            apply_symmetrizer, apply_weighted_coefficient,
                            make_state)
    from .spectral import make_grid
    from .symbols import (PRESET_NAMES, admissibility_range, preset,
                          symbol_eval, validate_admissible)

    def check_spectral():
        grid = make_grid(1, 32, 2 * math.pi)
        f = np.cos(3 * grid.x[0])
        back = grid.ifft(grid.fft(f))
        assert np.allclose(back, f, atol=1e-13), "fft round trip"
        d = grid.ifft(grid.deriv(grid.fft(f), 0))
        assert np.allclose(d, -3 * np.sin(3 * grid.x[0]), atol=1e-12), \
            "spectral derivative"

    def check_presets():
        grid = make_grid(1, 64, 2 * math.pi)
        rng = admissibility_range(grid)
        for name in PRESET_NAMES:
            pair, _ = preset(name, mu=0.25)
            rep = validate_admissible(pair, rng)
            if name == "open_wb":
                assert not rep.passed, "open_wb must fail domination"
            else:
                assert rep.passed, f"{name} inadmissible: {rep.failures}"
        w1 = symbol_eval(preset("ddk", mu=1.0)[0].g1, 1.0)
        assert abs(w1 - math.sqrt(math.tanh(1.0))) < 1e-12, "ddk symbol"

    def check_operator_structure():
        grid = make_grid(1, 16, 2 * math.pi)
        params = ModelParams.from_preset("ddk", epsilon=0.3)
        rng = np.random.default_rng(0)
        frozen = make_state(grid, 0.2 * rng.standard_normal(16),
                            0.2 * rng.standard_normal((1, 16)))
        u = make_state(grid, rng.standard_normal(16),
                       rng.standard_normal((1, 16)))
        z = make_state(grid, rng.standard_normal(16),
                       rng.standard_normal((1, 16)))
        composed = apply_symmetrizer(
            frozen, params, apply_coefficient(frozen, params, 0, u))
        direct = apply_weighted_coefficient(frozen, params, 0, u)
        gap = max(np.max(np.abs(composed.zeta.values - direct.zeta.values)),
                  np.max(np.abs(composed.v.values - direct.v.values)))
        assert gap < 1e-12, f"weighted operator factorization: {gap}"

        def dot(a, b):
            w = grid.volume / grid.n ** grid.dim
            return w * (np.sum(a.zeta.values * b.zeta.values)
                        + np.sum(a.v.values * b.v.values))

        su = apply_symmetrizer(frozen, params, u)
        sz = apply_symmetrizer(frozen, params, z)
        assert abs(dot(su, z) - dot(u, sz)) < 1e-10, \
            "symmetrizer self-adjointness"

    def check_coercivity():
        grid = make_grid(1, 32, 2 * math.pi)
        params = ModelParams.from_preset("ddk", epsilon=0.5, h_min=0.5)
        result = coercivity_check(grid, params, n_trials=20, seed=1)
        assert result.passed, f"coercivity margin {result.worst}"

    def check_linear_flow():
        grid = make_grid(1, 32, 2 * math.pi)
        params = ModelParams.from_preset("ddk", epsilon=0.0)
        state = make_state(grid, 0.2 * np.cos(grid.x[0]))
        moved = linear_propagator(state, params, 4.0)
        back = linear_propagator(moved, params, -4.0)
        assert np.allclose(back.zeta.values, state.zeta.values,
                           atol=1e-12), "propagator group inverse"
        rep0 = energy_report(state, params, 2.01, 1.01)
        rep1 = energy_report(moved, params, 2.01, 1.01)
        assert abs(rep1.quad_form - rep0.quad_form) < 1e-12 * rep0.quad_form, \
            "linear quadratic-form conservation"

    def check_rk4_vs_exact():
        from .stepping import StepperConfig
        grid = make_grid(1, 32, 2 * math.pi)
        params = ModelParams.from_preset("shallow_water", epsilon=0.0)
        state = make_state(grid, 0.2 * np.cos(grid.x[0]))
        traj = run(state, params, StepperConfig(t_end=0.5, dt_override=0.025))
        exact = linear_propagator(state, params, 0.5)
        err = np.max(np.abs(traj.final.zeta.values - exact.zeta.values))
        assert err < 1e-6, f"rk4 against the exact flow: {err}"

    def check_snapshot_round_trip():
        grid = make_grid(2, 16, 2 * math.pi)
        rng = np.random.default_rng(2)
        state = make_state(grid, rng.standard_normal(grid.shape),
                           rng.standard_normal((2,) + grid.shape))
        with tempfile.TemporaryDirectory() as d:
            path = write_snapshot(Path(d) / "s.bin", state, 1.0, 0.1)
            assert path.stat().st_size == 6200, "snapshot size"
            back, _ = read_snapshot(path)
            assert back.zeta.values.tobytes() == state.zeta.values.tobytes()
            assert back.v.values.tobytes() == state.v.values.tobytes()

    def check_config_round_trip():
        config = RunConfig(model="ddk", dim=1, n=32, epsilon=0.2, mu=0.5)
        with tempfile.TemporaryDirectory() as d:
            path = write_config(config, Path(d) / "c.json")
            assert load_config(path) == config, "config round trip"

    def check_run_determinism():
        from .stepping import StepperConfig
        config = RunConfig(model="shallow_water", dim=1, n=32, epsilon=0.1)
        config.stepper = StepperConfig(t_end=0.2, dt_override=0.05)
        outs = []
        for _ in range(2):
            grid = build_grid(config)
            traj = run(initial_state(config, grid), model_params(config),
                       config.stepper)
            with tempfile.TemporaryDirectory() as d:
                p = write_diagnostics_csv(traj, Path(d) / "d.csv")
                outs.append(p.read_bytes())
        assert outs[0] == outs[1], "rerun not byte-identical"
        assert outs[0].splitlines()[0].decode() == CSV_HEADER

    return [("spectral transforms", check_spectral),
            ("symbol catalog", check_presets),
            ("operator structure", check_operator_structure),
            ("coercivity", check_coercivity),
            ("exact linear flow", check_linear_flow),
            ("rk4 accuracy", check_rk4_vs_exact),
            ("snapshot round trip", check_snapshot_round_trip),
            ("config round trip", check_config_round_trip),
            ("run determinism", check_run_determinism)]


def _cmd_selftest(args) -> int:
    failed = 0
    for name, check in _selftest_checks():
        try:
            check()
        except Exception as e:        # noqa: BLE001 - report and keep going
            failed += 1
            print(f"FAIL {name}: {e}")
        else:
            print(f"ok   {name}")
    if failed:
        print(f"{failed} check(s) failed")
        return EXIT_INTERNAL
    print("all checks passed")
    return EXIT_OK


# --- plot ---------------------------------------------------------------

def _cmd_plot(args) -> int:
    columns = [c.strip() for c in args.cols.split(",") if c.strip()]
    if not columns:
        print("no columns requested", file=sys.stderr)
        return EXIT_USAGE
    try:
        emit_plot(args.csv, columns, args.out, logy=args.log)
    except ValueError as e:
        print(str(e), file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
