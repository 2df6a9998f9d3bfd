"""Command-line interface for the multi-task learning lab."""

import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

import click
import numpy as np
import pandas as pd

from src.config.settings import RUNTIME_CONFIG
from src.evaluation.benchmark import ExperimentResult, run_experiment
from src.evaluation.figures import write_figure_data
from src.evaluation.transfer import NTReport
from src.mtl.checkpoint import save_checkpoint
from src.mtl.diagnostics import run_gradient_suite
from src.pipeline.validator import ConfigValidator, ExperimentConfig

logger = logging.getLogger(__name__)

EXIT_GRADCHECK = 1
EXIT_CONFIG = 2
EXIT_TRAINING = 3


def dump_json(path: Path, payload: Any) -> Path:
    """Write deterministic JSON (sorted keys, no NaN)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def _metrics_json(values: Optional[np.ndarray]) -> Optional[list[Optional[float]]]:
    if values is None:
        return None
    return [None if np.isnan(v) else float(v) for v in values]


def parse_seeds(ctx, param, value: Optional[str]) -> Optional[list[int]]:
    if value is None:
        return None
    try:
        seeds = [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}")
    if not seeds:
        raise click.BadParameter("seed list must not be empty")
    return seeds


def write_artifacts(result: ExperimentResult, run_dir: Path) -> dict[str, Any]:
    """Write every run and report below ``run_dir``; returns the timing sidecar."""
    cfg = result.config
    digest = cfg.digest
    dump_json(run_dir / "config.json", {"config": cfg.to_dict(), "config_digest": digest})
    dump_json(
        run_dir / "provenance.json",
        {
            "config_digest": digest,
            "train": result.split.train.provenance,
            "test": result.split.test.provenance,
        },
    )

    timings: dict[str, dict[str, float]] = {}
    for variant, runs in result.runs.items():
        for run in runs:
            seed_dir = run_dir / variant / str(run.seed)
            record: dict[str, Any] = {
                "config_digest": digest,
                "variant": variant,
                "seed": run.seed,
                "metrics": _metrics_json(run.metrics),
                "error": run.error,
                "history": None if run.history is None else run.history.to_dict(),
            }
            dump_json(seed_dir / "history.json", record)
            if run.state is not None:
                save_checkpoint(run.state, seed_dir / "checkpoint.bin")
            if run.history is not None:
                timings.setdefault(variant, {})[str(run.seed)] = run.history.wall_clock_seconds

    reports_dir = run_dir / "reports"
    for variant, report in result.reports.items():
        dump_json(reports_dir / f"nt_{variant}.json", report.to_dict())
        report.to_csv(reports_dir / f"nt_{variant}.csv")
    for variant, per_run in result.per_run_reports.items():
        dump_json(
            reports_dir / "runs" / f"nt_{variant}.json",
            [{"seed": seed, "report": report.to_dict()} for seed, report in per_run],
        )
    return timings


@click.group()
@click.version_option(version="0.1.0")
@click.option(
    "--log-level",
    default=RUNTIME_CONFIG["log_level"],
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    help="Logging verbosity",
)
def cli(log_level):
    """Multi-task learning lab - train STL/MTL/AMTFL/UAMTFL and measure negative transfer."""
    logging.basicConfig(
        level=log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _validate(config_path: Path, overrides: dict[str, Any]) -> ExperimentConfig:
    validator = ConfigValidator()
    result = validator.validate_file(config_path, overrides)
    for warning in result.warnings:
        click.echo(click.style(f"  ⚠️  {warning}", fg="yellow"))
    if not result.is_valid:
        click.echo(click.style("❌ Validation failed:", fg="red"))
        for error in result.errors:
            click.echo(f"  - {error}")
        sys.exit(EXIT_CONFIG)
    return result.metadata["config"]


@cli.command()
@click.argument("config_path", type=click.Path(path_type=Path))
@click.option("--seeds", callback=parse_seeds, help="Comma-separated seeds, e.g. 0,1,2")
@click.option("--out", "output_dir", type=click.Path(path_type=Path), help="Output root directory")
@click.option("--epsilon", type=float, help="Negative-transfer tolerance")
@click.option("--workers", type=int, default=None, help="Parallel runs per run set")
def train(config_path, seeds, output_dir, epsilon, workers):
    """
    Train every configured variant over the seed list.

    CONFIG_PATH: Path to the experiment JSON
    """
    click.echo(f"🚀 Starting experiment: {config_path}")
    click.echo("=" * 60)

    # Step 1: Validation
    click.echo("\n📋 Step 1: Validating configuration...")
    overrides: dict[str, Any] = {}
    if seeds is not None:
        overrides["seeds"] = seeds
    if epsilon is not None:
        overrides["epsilon"] = epsilon
    if output_dir is not None:
        overrides["output_dir"] = output_dir
    cfg = _validate(config_path, overrides)
    if workers is not None and workers < 1:
        click.echo(click.style(f"❌ --workers must be >= 1, got {workers}", fg="red"))
        sys.exit(EXIT_CONFIG)
    click.echo(click.style("✅ Validation passed", fg="green"))
    click.echo(f"  - Benchmark: {cfg.benchmark}")
    click.echo(f"  - Variants: {', '.join(cfg.variants)}")
    click.echo(f"  - Seeds: {list(cfg.train.seeds)}")
    click.echo(f"  - Digest: {cfg.digest[:12]}")

    # Step 2: Train
    click.echo("\n🧠 Step 2: Training run sets...")
    started = datetime.now(timezone.utc)
    try:
        result = run_experiment(cfg, workers=workers, checkpoint_root=cfg.run_dir)
    except Exception as e:
        logger.exception("experiment failed before training finished")
        click.echo(click.style(f"\n❌ Error: {str(e)}", fg="red"))
        sys.exit(EXIT_CONFIG)
    finished = datetime.now(timezone.utc)
    for variant, runs in result.runs.items():
        ok = sum(r.ok for r in runs)
        colour = "green" if ok == len(runs) else "yellow"
        click.echo(click.style(f"  - {variant}: {ok}/{len(runs)} runs completed", fg=colour))

    # Step 3: Write artifacts
    click.echo(f"\n💾 Step 3: Writing artifacts to {cfg.run_dir}...")
    timings = write_artifacts(result, cfg.run_dir)
    dump_json(
        cfg.run_dir / "timings.json",
        {"started": started.isoformat(), "finished": finished.isoformat(), "runs": timings},
    )
    for variant, report in result.reports.items():
        click.echo(
            f"  - {variant} vs STL: mean {report.metric} {report.mean_mtl:.4f} "
            f"(STL {report.mean_stl:.4f}), NT cases {report.nt_count}"
        )

    if result.failures:
        click.echo(click.style("\n❌ Training failed:", fg="red"))
        for run in result.failures:
            click.echo(f"  - {run.variant} seed {run.seed}: {run.error}")
        sys.exit(EXIT_TRAINING)

    click.echo("\n" + "=" * 60)
    click.echo(click.style("🎉 Experiment Complete!", fg="green", bold=True))
    click.echo(f"\n📊 Results: {cfg.run_dir}")


def _load_reports(run_dir: Path) -> dict[str, NTReport]:
    reports = {}
    for path in sorted((run_dir / "reports").glob("nt_*.json")):
        report = NTReport.from_json(path.read_text())
        reports[report.variant] = report
    return reports


@cli.command()
@click.argument("run_dir", type=click.Path(path_type=Path))
def report(run_dir):
    """
    Summarize a finished experiment and write figure data.

    RUN_DIR: Experiment directory (<out>/<digest>)
    """
    click.echo(f"📊 Report for: {run_dir}\n")
    reports = _load_reports(run_dir) if run_dir.is_dir() else {}
    if not reports:
        click.echo(click.style("❌ no reports found", fg="red"))
        sys.exit(EXIT_CONFIG)

    digests = {r.config_digest for r in reports.values()}
    config_path = run_dir / "config.json"
    expected: list[str] = []
    if config_path.exists():
        stored = json.loads(config_path.read_text())
        digests.add(stored["config_digest"])
        expected = [v for v in stored["config"]["variants"] if v != "STL"]
    if len(digests) != 1:
        click.echo(click.style("❌ reports come from different configurations", fg="red"))
        sys.exit(EXIT_CONFIG)

    first = next(iter(reports.values()))
    summary = pd.DataFrame(
        [("STL", first.mean_stl)] + [(v, r.mean_mtl) for v, r in reports.items()],
        columns=["method", f"mean_{first.metric}"],
    )
    click.echo(summary.to_string(index=False))

    deltas = pd.DataFrame(
        {variant: list(r.delta) for variant, r in reports.items()},
        index=pd.Index(first.task_names or range(first.task_count), name="task"),
    )
    click.echo("\nPer-task delta vs STL (positive = negative transfer):")
    click.echo(deltas.to_string(float_format=lambda v: f"{v:+.4f}"))
    click.echo("\nNegative-transfer cases: " + ", ".join(f"{v}={r.nt_count}" for v, r in reports.items()))

    gaps = [v for v in expected if v not in reports]
    if gaps:
        click.echo(click.style(f"\n⚠️  Missing reports (gaps): {', '.join(gaps)}", fg="yellow"))

    paths = write_figure_data(reports, run_dir / "reports")
    click.echo("\n💾 Figure data:")
    for name, path in paths.items():
        click.echo(f"  - {name}: {path}")


@cli.command()
def gradcheck():
    """Verify every analytic gradient against finite differences."""
    click.echo("🔍 Running gradient checks...\n")
    outcomes = run_gradient_suite()
    for outcome in outcomes:
        mark = "✅" if outcome.passed else "❌"
        colour = "green" if outcome.passed else "red"
        click.echo(click.style(f"  {mark} [{outcome.group}] {outcome.name}", fg=colour))
        if not outcome.passed:
            click.echo(f"      {outcome.result.describe()}")
    failed = [o.name for o in outcomes if not o.passed]
    click.echo(f"\nChecked {len(outcomes)} operations, {len(failed)} failed")
    if failed:
        click.echo(click.style(f"❌ Gradient check failed: {', '.join(failed)}", fg="red"))
        sys.exit(EXIT_GRADCHECK)
    click.echo(click.style("✅ All gradients match", fg="green"))


@cli.command()
@click.argument("config_path", type=click.Path(path_type=Path))
def validate(config_path):
    """
    Validate an experiment configuration without training.

    CONFIG_PATH: Path to the experiment JSON
    """
    click.echo(f"🔍 Validating: {config_path}\n")
    cfg = _validate(config_path, {})
    click.echo(click.style("✅ Configuration is valid", fg="green"))
    click.echo("\nMetadata:")
    click.echo(f"  - benchmark: {cfg.benchmark}")
    click.echo(f"  - variants: {list(cfg.variants)}")
    click.echo(f"  - seeds: {list(cfg.train.seeds)}")
    click.echo(f"  - digest: {cfg.digest}")
    click.echo(f"  - output: {cfg.run_dir}")


if __name__ == "__main__":
    cli()
