"""Command-line entry point: ``qheat {sweep,kdq,fit,export-qasm,simulate}``.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 internal
consistency failure (QASM reconstruction mismatch).
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import analysis, heatflow, kdq, sampler, svgplot
from .circuits import PROTOCOLS, ReconstructionError, export_protocol
from .heatflow import ExperimentParams, default_theta_grid
from .sampler import NoiseModel

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3
MODES = ("analytic", "exact", "shots")
SWEEP_COLUMNS = analysis.EXPERIMENT_COLUMNS + (
    "qq_bar", "qsc_bar", "dq_q", "dq_sc", "violation_i", "violation_i_c")

# flag name -> (config key, type, default)
OPTIONS = {
    "tc": (float, math.pi / 3),
    "th": (float, math.pi / 6),
    "delta": (float, 1.0),
    "theta_points": (int, heatflow.DEFAULT_THETA_POINTS),
    "shots": (int, None),
    "runs": (int, sampler.DEFAULT_RUNS),
    "seed": (int, 0),
    "zeta": (float, 0.0),
    "delta_c": (float, 0.0),
    "delta_h": (float, 0.0),
    "eps_c": (float, 0.0),
    "eps_h": (float, 0.0),
    "midcircuit_mode": (str, "flip_state"),
    "mode": (str, "analytic"),
    "out": (str, "."),
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    params: ExperimentParams = field(default_factory=ExperimentParams)
    mode: str = "analytic"
    noise: NoiseModel = field(default_factory=NoiseModel)
    shots: Optional[int] = None
    runs: int = sampler.DEFAULT_RUNS
    seed: int = 0
    output_dir: Path = Path(".")

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.mode == "shots" and self.shots is None:
            raise ConfigError("mode=shots requires --shots")
        if self.mode != "shots" and self.shots is not None:
            raise ConfigError(f"--shots only applies to mode=shots (mode is {self.mode!r})")
        if self.shots is not None and self.shots < 1:
            raise ConfigError("shots must be >= 1")
        return self


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in OPTIONS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def _settings(args: argparse.Namespace, overrides: Optional[dict] = None) -> dict:
    merged = {k: default for k, (_, default) in OPTIONS.items()}
    merged.update(overrides or {})
    if getattr(args, "config", None):
        merged.update(read_config_file(args.config))
    for key in OPTIONS:
        v = getattr(args, key, None)
        if v is not None:
            merged[key] = v
    out = {}
    for key, (typ, _) in OPTIONS.items():
        v = merged[key]
        try:
            out[key] = None if v is None else typ(v)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: cannot parse {v!r} as {typ.__name__}") from None
    return out


def build_config(args: argparse.Namespace, **overrides) -> RunConfig:
    s = _settings(args, overrides)
    try:
        params = ExperimentParams(s["tc"], s["th"], s["delta"], default_theta_grid(s["theta_points"]))
        noise = NoiseModel(zeta=s["zeta"], delta_c=s["delta_c"], delta_h=s["delta_h"],
                           eps_read_c=s["eps_c"], eps_read_h=s["eps_h"],
                           midcircuit_mode=s["midcircuit_mode"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(params, s["mode"], noise, s["shots"], s["runs"], s["seed"],
                     Path(s["out"])).validate()


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _outdir(config: RunConfig) -> Path:
    config.output_dir.mkdir(parents=True, exist_ok=True)
    return config.output_dir


# --- sweep -----------------------------------------------------------------------

def sweep_rows(config: RunConfig) -> list[tuple[int, heatflow.HeatFlowResult]]:
    params, noise = config.params, config.noise
    if config.mode == "shots":
        records = sampler.simulate_records(params, config.shots, config.runs, noise, config.seed)
        return [(r.run_id, heatflow.result_from_heats(params, r.theta, r.qq_c, r.qq_h, r.qsc_c, r.qsc_h))
                for r in records]
    noisy = noise.zeta != 0 or noise.delta_c != 0 or noise.delta_h != 0
    if not noisy:
        return [(0, r) for r in heatflow.sweep(params, "analytic" if config.mode == "analytic" else "exact_sim")]
    noise.check(params)
    out = []
    for theta in params.theta_grid:
        if config.mode == "analytic":
            heats = analysis.model_qq(params, theta, noise.zeta) + analysis.model_qsc(
                params, theta, noise.delta_c, noise.delta_h)
        else:
            heats = sampler.exact_noisy_heats(params, theta, noise)
        out.append((0, heatflow.result_from_heats(params, theta, *heats)))
    return out


def _run_means(rows, attr):
    """Per-theta mean and standard deviation over runs, in grid order."""
    by_theta: dict = {}
    for _, r in rows:
        by_theta.setdefault(r.theta, []).append(getattr(r, attr))
    thetas = list(by_theta)
    mean = [float(np.mean(by_theta[t])) for t in thetas]
    std = [float(np.std(by_theta[t])) for t in thetas]
    return thetas, mean, std


def cmd_sweep(config: RunConfig) -> list[Path]:
    out = _outdir(config)
    rows = sweep_rows(config)
    csv_path = out / "sweep.csv"
    _write_csv(csv_path, SWEEP_COLUMNS, (
        (r.theta, r.qq_c, r.qq_h, r.qsc_c, r.qsc_h, run, r.qq_bar, r.qsc_bar, r.dq_q, r.dq_sc,
         r.violation_i, r.violation_i_c) for run, r in rows))
    panels = []
    multi = config.mode == "shots" and config.runs > 1
    for attr, title in (("qq_bar", "Q_q / Delta"), ("qsc_bar", "Q_sc / Delta"), ("violation_i", "I")):
        x, y, err = _run_means(rows, attr)
        series = svgplot.Series(config.mode, x, y, yerr=err if multi else None, markers=config.mode == "shots")
        panels.append(svgplot.Panel(title, "theta", title, [series]))
    svg_path = out / "sweep.svg"
    svgplot.write_svg(svg_path, panels)
    return [csv_path, svg_path]


# --- kdq ---------------------------------------------------------------------------

def cmd_kdq(config: RunConfig, theta: float) -> tuple[list[Path], str]:
    out = _outdir(config)
    rho = heatflow.prepare_initial_state(config.params)
    if config.noise.zeta:
        rho = sampler.apply_noise_to_state(rho, config.noise, "prep_coherence")
    dist = kdq.kdq_distribution(rho, theta, config.params)
    path = out / "kdq.csv"
    _write_csv(path, ("i_c", "i_h", "f_c", "f_h", "p"), dist.rows())
    qq_c, qq_h = kdq.kdq_heat(dist, config.params.delta)
    summary = (f"theta={theta!r} negativity={kdq.negativity(dist)!r} sum={float(dist.entries.sum())!r} "
               f"qq_c={qq_c!r} qq_h={qq_h!r}")
    return [path], summary


# --- fit -----------------------------------------------------------------------------

def cmd_fit(data_path, config: RunConfig) -> tuple[list[Path], str]:
    records = analysis.load_experiment_csv(data_path)
    params = config.params
    zfit = analysis.fit_zeta(records, params)
    dfit = analysis.fit_deltas(records, params)
    report = "\n".join([
        f"records={len(records)}",
        f"zeta={zfit.zeta!r}",
        f"zeta_stderr={zfit.stderr!r}",
        f"zeta_residual={zfit.residual!r}",
        f"delta_c={dfit.delta_c!r}",
        f"delta_c_stderr={dfit.stderr_c!r}",
        f"delta_h={dfit.delta_h!r}",
        f"delta_h_stderr={dfit.stderr_h!r}",
        f"delta_residual={dfit.residual!r}",
        f"dq_sc={dfit.dq_sc * params.delta!r}",
    ]) + "\n"
    out = _outdir(config)
    report_path = out / "fit.txt"
    report_path.write_text(report)

    by_theta: dict = {}
    for r in records:
        by_theta.setdefault(r.theta, []).append(r)
    thetas = sorted(by_theta)
    fine = np.linspace(0.0, math.pi, 121)
    ideal = [analysis.model_qsc(params, t) for t in fine]
    fitted = [analysis.model_qsc(params, t, dfit.delta_c, dfit.delta_h) for t in fine]
    quantities = (
        ("Q_sc^c / Delta", lambda r: r.qsc_c, lambda m: m[0]),
        ("-Q_sc^h / Delta", lambda r: -r.qsc_h, lambda m: -m[1]),
        ("mean Q_sc / Delta", lambda r: r.qsc_bar, lambda m: 0.5 * (m[0] - m[1])),
        ("dQ_sc / Delta", lambda r: r.dq_sc, lambda m: m[0] + m[1]),
    )
    panels = []
    for title, of_record, of_model in quantities:
        vals = [[of_record(r) / params.delta for r in by_theta[t]] for t in thetas]
        panels.append(svgplot.Panel(title, "theta", title, [
            svgplot.Series("data", thetas, [float(np.mean(v)) for v in vals],
                           yerr=[float(np.std(v)) for v in vals], markers=True),
            svgplot.Series("ideal", list(fine), [of_model(m) / params.delta for m in ideal]),
            svgplot.Series("fitted", list(fine), [of_model(m) / params.delta for m in fitted], dashed=True),
        ]))
    svg_path = out / "fit.svg"
    svgplot.write_svg(svg_path, panels, columns=2)
    return [report_path, svg_path], report


# --- export ------------------------------------------------------------------------------

def cmd_export_qasm(config: RunConfig, protocol: str, theta: float) -> tuple[list[Path], str]:
    out = _outdir(config)
    protocols = PROTOCOLS if protocol == "all" else (protocol,)
    paths, lines = [], []
    for p in protocols:
        result = export_protocol(config.params, p, theta)
        qasm_path = out / f"{p}.qasm"
        qasm_path.write_text(result.qasm)
        circ_path = out / f"{p}.circ"
        circ_path.write_text(result.decomposed.to_lines())
        paths += [qasm_path, circ_path]
        lines.append(f"{p}: rounds={len(result.document.measurement_rounds())} "
                     f"max_reconstruction_error={result.max_error:.3e}")
    return paths, "\n".join(lines)


# --- simulate ------------------------------------------------------------------------------

def cmd_simulate(config: RunConfig) -> list[Path]:
    out = _outdir(config)
    records = sampler.simulate_records(config.params, config.shots, config.runs, config.noise, config.seed)
    path = out / "data.csv"
    analysis.write_experiment_csv(records, path)
    return [path]


# --- argument parsing -----------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("parameters (defaults in brackets; --config FILE sets key = value pairs)")
    g.add_argument("--config", help="flat key = value file; command-line flags take precedence")
    g.add_argument("--tc", type=float, help="cold preparation angle t_c in radians [pi/3]")
    g.add_argument("--th", type=float, help="hot preparation angle t_h in radians [pi/6]")
    g.add_argument("--delta", type=float, help="qubit energy gap [1.0]")
    g.add_argument("--theta-points", dest="theta_points", type=int,
                   help="uniform theta grid points on [0, pi] [33]")
    g.add_argument("--shots", type=int, help="shots per circuit per theta (mode=shots only)")
    g.add_argument("--runs", type=int, help=f"independent repetitions [{sampler.DEFAULT_RUNS}]")
    g.add_argument("--seed", type=int, help="base random seed [0]")
    g.add_argument("--zeta", type=float, help="coherence shift of the initial state [0]")
    g.add_argument("--delta-c", dest="delta_c", type=float, help="mid-circuit population bias, cold [0]")
    g.add_argument("--delta-h", dest="delta_h", type=float, help="mid-circuit population bias, hot [0]")
    g.add_argument("--eps-c", dest="eps_c", type=float, help="P(read 0 | 1) on the cold qubit [0]")
    g.add_argument("--eps-h", dest="eps_h", type=float, help="P(read 0 | 1) on the hot qubit [0]")
    g.add_argument("--midcircuit-mode", dest="midcircuit_mode", choices=sampler.MIDCIRCUIT_MODES,
                   help="effect of a mid-circuit misread [flip_state]")
    g.add_argument("--mode", choices=MODES, help="evaluation mode [analytic]")
    g.add_argument("--out", help="output directory [.]")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qheat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("sweep", help="heat flows and witness over the theta grid (sweep.csv, sweep.svg)")
    _add_common(p)
    p = sub.add_parser("kdq", help="quasiprobability table at one theta (kdq.csv)")
    _add_common(p)
    p.add_argument("--theta", type=float, default=0.1, help="interaction angle [0.1]")
    p = sub.add_parser("fit", help="fit zeta, delta_c, delta_h to an experiment CSV (fit.txt, fit.svg)")
    p.add_argument("data", help="CSV with columns theta,qq_c,qq_h,qsc_c,qsc_h,run_id")
    _add_common(p)
    p = sub.add_parser("export-qasm", help="protocol circuits as OpenQASM 3 (<protocol>.qasm, .circ)")
    _add_common(p)
    p.add_argument("--protocol", choices=PROTOCOLS + ("all",), default="all")
    p.add_argument("--theta", type=float, default=math.pi / 2, help="interaction angle [pi/2]")
    p = sub.add_parser("simulate", help=f"shot-sampled dataset (data.csv); --shots defaults to "
                                        f"{sampler.DEFAULT_SHOTS}")
    _add_common(p)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            for path in cmd_sweep(build_config(args)):
                print(path)
        elif args.command == "kdq":
            paths, summary = cmd_kdq(build_config(args), args.theta)
            print(summary)
        elif args.command == "fit":
            paths, report = cmd_fit(args.data, build_config(args))
            print(report, end="")
        elif args.command == "export-qasm":
            paths, summary = cmd_export_qasm(build_config(args), args.protocol, args.theta)
            print(summary)
        elif args.command == "simulate":
            shots = {} if args.shots is not None else {"shots": sampler.DEFAULT_SHOTS}
            for path in cmd_simulate(build_config(args, mode="shots", **shots)):
                print(path)
    except ReconstructionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
