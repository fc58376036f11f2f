"""Command-line entry points.

Exit codes: 0 when the requested checks pass, 1 when a verification fails,
2 for configuration or usage errors.
"""

from __future__ import annotations

import pathlib
import sys

import click

from . import experiments
from .config import ExperimentConfig, load_config
from .errors import SchemeError
from .scheme import save_snapshot


def _load(config_path: str) -> ExperimentConfig:
    return load_config(pathlib.Path(config_path).read_text("utf-8"))


def _out_dir(cfg: ExperimentConfig, override: str | None) -> pathlib.Path:
    path = pathlib.Path(override) if override else pathlib.Path(cfg.output_path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _config_error(exc: SchemeError) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(2)


config_option = click.option(
    "--config", "config_path", required=True,
    type=click.Path(exists=True, dir_okay=False), help="Experiment JSON file.",
)
output_option = click.option(
    "--output", "output_dir", default=None,
    type=click.Path(file_okay=False), help="Directory for result files.",
)
format_option = click.option(
    "--format", "fmt", default=None, type=click.Choice(["json", "csv"]),
    help="Result file format.",
)
order_option = click.option(
    "--order", default=None, type=click.IntRange(1, 3), help="Expansion order.",
)


@click.group()
def main() -> None:
    """Relative-velocity lattice Boltzmann schemes: analysis and verification."""


@main.command()
@config_option
@output_option
@format_option
@order_option
def analyze(config_path, output_dir, fmt, order) -> None:
    """Derive the equivalent equation and write its coefficients."""
    try:
        cfg = _load(config_path)
        payload = experiments.analyze_payload(cfg, order)
        out = _out_dir(cfg, output_dir)
        fmt = fmt or cfg.output_format
        if fmt == "csv":
            experiments.write_csv(experiments.analyze_csv_rows(payload), out / "analyze.csv")
        else:
            experiments.write_json(payload, out / "analyze.json")
    except SchemeError as exc:
        _config_error(exc)
    click.echo(payload["pretty"])
    click.echo(f"wrote {out / ('analyze.' + fmt)}")


@main.command()
@config_option
@output_option
@format_option
@order_option
def dispersion(config_path, output_dir, fmt, order) -> None:
    """Extract oracle growth-rate series and compare with the prediction."""
    try:
        cfg = _load(config_path)
        report = experiments.dispersion_payload(cfg, order)
        out = _out_dir(cfg, output_dir)
        fmt = fmt or cfg.output_format
        if fmt == "csv":
            experiments.write_csv(report.csv_rows(), out / "dispersion.csv")
        else:
            experiments.write_json(report.to_json_dict(), out / "dispersion.json")
    except SchemeError as exc:
        _config_error(exc)
    click.echo(f"{len(report.records)} wavevectors, pass={report.passed}")
    click.echo(f"wrote {out / ('dispersion.' + fmt)}")
    if not report.passed:
        sys.exit(1)


@main.command()
@config_option
@output_option
@format_option
def simulate(config_path, output_dir, fmt) -> None:
    """Run the scheme and write observables plus a final snapshot."""
    try:
        cfg = _load(config_path)
        payload, state = experiments.simulate_payload(cfg)
        out = _out_dir(cfg, output_dir)
        fmt = fmt or cfg.output_format
        if fmt == "csv":
            experiments.write_csv(experiments.simulate_csv_rows(payload), out / "simulate.csv")
        else:
            experiments.write_json(payload, out / "simulate.json")
        save_snapshot(state, cfg.spec, out / "snapshot.csv", out / "snapshot_meta.json",
                      cfg.steps)
    except SchemeError as exc:
        _config_error(exc)
    click.echo(
        f"{cfg.steps} steps, mass drift {payload['mass_relative_drift']:.3e}"
    )
    click.echo(f"wrote {out / ('simulate.' + fmt)} and {out / 'snapshot.csv'}")


@main.command()
@config_option
@output_option
@format_option
def verify(config_path, output_dir, fmt) -> None:
    """Run every verification channel; exit 0 only if all pass."""
    try:
        cfg = _load(config_path)
        report = experiments.verify_report(cfg)
        out = _out_dir(cfg, output_dir)
        experiments.write_json(report, out / "verify.json")
    except SchemeError as exc:
        _config_error(exc)
    for section in (
        "predictor_vs_oracle",
        "u_invariance",
        "transition_scaling",
        "dhumieres_crosscheck",
    ):
        status = "PASS" if report[section].get("pass") else "FAIL"
        click.echo(f"{section}: {status}")
    click.echo(f"overall: {'PASS' if report['overall_pass'] else 'FAIL'}")
    click.echo(f"wrote {out / 'verify.json'}")
    if not report["overall_pass"]:
        sys.exit(1)


@main.command()
@config_option
@output_option
@format_option
def convergence(config_path, output_dir, fmt) -> None:
    """Refinement study of the equilibrium and transition residuals."""
    try:
        cfg = _load(config_path)
        study = experiments.convergence_payload(cfg)
        out = _out_dir(cfg, output_dir)
        fmt = fmt or cfg.output_format
        if fmt == "csv":
            experiments.write_csv(experiments.convergence_csv_rows(study), out / "convergence.csv")
        else:
            experiments.write_json(study, out / "convergence.json")
    except SchemeError as exc:
        _config_error(exc)
    click.echo(
        f"equilibrium slope {study['equilibrium_slope']}, "
        f"transition slope {study['transition_slope']}"
    )
    click.echo(f"wrote {out / ('convergence.' + fmt)}")
    if not study["overall_pass"]:
        sys.exit(1)


if __name__ == "__main__":
    main()
