"""
Command-line front end
synth, transform, run, report and diagnose subcommands over a YAML run config
"""

import os
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

import typer
import yaml
from pydantic import ValidationError

from .config import CONFIG_ENV_VAR, CliConfig, ExperimentConfig
from .diagnostics import aggregate_drivers, export_driver_artifacts, summaries_from_store
from .errors import ConfigError, ForecastLabError, NoShrinkageCellsError
from .harness import evaluate, run_rolling
from .panel import load_catalog_csv, load_panel_csv, transform_panel, transform_report, write_catalog_csv, write_panel_csv
from .report_generator import ReportGenerator
from .store import load_store, persist_store
from .synthetic import generate_synthetic_panel
from .utils import banner, console, dump_json, file_sha256, say, set_verbosity

app = typer.Typer(help="Bayesian macro forecasting lab", no_args_is_help=True, add_completion=False)

ConfigOption = typer.Option(None, '--config', '-c', envvar=CONFIG_ENV_VAR,
                            help="YAML run configuration")
OutOption = typer.Option(None, '--out', '-o', help="Output directory (overrides output_dir)")

STORE_FILE = 'store.npz'
MANIFEST_FILE = 'run_manifest.json'


def load_cli_config(path: Optional[Path]) -> CliConfig:
    """Parse and validate the YAML run configuration (defaults when no path)"""
    if path is None:
        return CliConfig()
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            document = yaml.safe_load(fh) or {}
    except FileNotFoundError as exc:
        raise ConfigError(f"Config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"Config file is not valid YAML: {exc}") from exc
    if not isinstance(document, dict):
        raise ConfigError("Config document must be a mapping")
    try:
        return CliConfig(**document)
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration:\n{exc}") from exc


def _experiment(cfg: CliConfig, seed: Optional[int]) -> ExperimentConfig:
    if cfg.experiment is None:
        raise ConfigError("Config has no 'experiment' section")
    if seed is None:
        return cfg.experiment
    try:
        return ExperimentConfig(**{**cfg.experiment.model_dump(), 'seed': seed})
    except ValidationError as exc:
        raise ConfigError(f"Invalid seed override: {exc}") from exc


def _inputs(cfg: CliConfig):
    if not cfg.panel_csv or not cfg.catalog_csv:
        raise ConfigError("panel_csv and catalog_csv must be set")
    for label, path in (('panel_csv', cfg.panel_csv), ('catalog_csv', cfg.catalog_csv)):
        if not os.path.exists(path):
            raise ConfigError(f"{label} does not exist: {path}")
    catalog = load_catalog_csv(cfg.catalog_csv)
    return load_panel_csv(cfg.panel_csv, catalog, target_id=cfg.target_id)


def _output_dir(cfg: CliConfig, out: Optional[Path]) -> str:
    path = str(out) if out is not None else cfg.output_dir
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"Output directory is not writable: {path}") from exc
    return path


@contextmanager
def _exit_on_error():
    """Map lab errors to their exit codes"""
    try:
        yield
    except ForecastLabError as exc:
        console.print(f"[red]✗ {type(exc).__name__}:[/red] {exc}")
        raise typer.Exit(code=exc.exit_code)


@app.command()
def synth(
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = typer.Option(None, '--seed', help="Generator seed"),
    T: Optional[int] = typer.Option(None, '--months', help="Number of months"),
    p: Optional[int] = typer.Option(None, '--predictors', help="Number of predictors"),
    r_true: Optional[int] = typer.Option(None, '--factors', help="Number of latent factors"),
):
    """Generate a synthetic factor panel and its catalog"""
    with _exit_on_error():
        cfg = load_cli_config(config)
        set_verbosity(cfg.verbosity)
        spec = cfg.synthetic
        panel = generate_synthetic_panel(
            seed if seed is not None else spec.seed,
            T if T is not None else spec.T,
            p if p is not None else spec.p,
            r_true if r_true is not None else spec.r_true,
            target_spec=spec,
        )
        out_dir = _output_dir(cfg, out)
        panel_path = os.path.join(out_dir, 'panel.csv')
        catalog_path = os.path.join(out_dir, 'catalog.csv')
        write_panel_csv(panel, panel_path)
        write_catalog_csv(panel.metas, catalog_path)
        say(f"✓ Synthetic panel: {len(panel)} months x {len(panel.predictor_ids)} predictors")
        say(f"  {panel_path}\n  {catalog_path}")


@app.command()
def transform(
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
):
    """Apply transform codes and write the transformed panel plus a per-column report"""
    with _exit_on_error():
        cfg = load_cli_config(config)
        set_verbosity(cfg.verbosity)
        panel = _inputs(cfg)
        transformed = transform_panel(panel)
        report = transform_report(panel, transformed)
        out_dir = _output_dir(cfg, out)
        write_panel_csv(panel, os.path.join(out_dir, 'transformed.csv'), frame=transformed)
        report.rows.to_csv(os.path.join(out_dir, 'transform_report.csv'), index=False)
        dropped = report.dropped()
        marker = "✓" if not dropped else "⚠️"
        say(f"{marker} Transformed {transformed.shape[1]} series; {len(dropped)} dropped")


@app.command()
def run(
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = typer.Option(None, '--seed', help="Override the experiment seed"),
    threads: Optional[int] = typer.Option(None, '--threads', min=1, help="Parallel workers"),
):
    """Run the rolling experiment and write the forecast store with its manifest"""
    with _exit_on_error():
        cfg = load_cli_config(config)
        set_verbosity(cfg.verbosity)
        experiment = _experiment(cfg, seed)
        panel = _inputs(cfg)
        out_dir = _output_dir(cfg, out)
        workers = threads or cfg.threads or os.cpu_count() or 1

        store = run_rolling(panel, experiment, threads=workers)
        store.manifest['inputs'] = {
            'panel_csv': {'path': cfg.panel_csv, 'sha256': file_sha256(cfg.panel_csv)},
            'catalog_csv': {'path': cfg.catalog_csv, 'sha256': file_sha256(cfg.catalog_csv)},
        }
        store_path = os.path.join(out_dir, STORE_FILE)
        persist_store(store, store_path)

        manifest = dict(store.manifest)
        manifest['content_hash'] = store.content_hash()
        manifest['store'] = store_path
        manifest['threads'] = workers
        dump_json(manifest, os.path.join(out_dir, MANIFEST_FILE))

        banner("RUN COMPLETE")
        say(f"✓ {len(store)} records, {len(store.failures())} failed")
        say(f"  store: {store_path}")
        say(f"  content hash: {manifest['content_hash']}")


@app.command()
def report(
    store_path: Path = typer.Argument(..., help="Forecast store written by `run`"),
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
):
    """Score a stored run against the AR baseline and write report tables"""
    with _exit_on_error():
        cfg = load_cli_config(config)
        set_verbosity(cfg.verbosity)
        store = load_store(store_path, expected_config=cfg.experiment)
        experiment = cfg.experiment or store.experiment_config()
        tables = evaluate(store, experiment)
        generator = ReportGenerator(tables, manifest=store.manifest, failures=store.failures())
        paths = generator.write(_output_dir(cfg, out))
        say(f"✓ Wrote {len(paths)} report files to {os.path.dirname(paths['scores'])}")


@app.command()
def diagnose(
    store_path: Path = typer.Argument(..., help="Forecast store written by `run`"),
    config: Optional[Path] = ConfigOption,
    out: Optional[Path] = OutOption,
    top: Optional[int] = typer.Option(None, '--top-k', min=1, help="Drivers kept per origin"),
):
    """Aggregate horseshoe keep signals into per-horizon driver tables"""
    with _exit_on_error():
        cfg = load_cli_config(config)
        set_verbosity(cfg.verbosity)
        store = load_store(store_path, expected_config=cfg.experiment)
        experiment = cfg.experiment or store.experiment_config()
        K = top or (experiment.top_k if experiment is not None else 20)
        blocks = store.manifest.get('predictor_blocks') or {}
        out_dir = _output_dir(cfg, out)

        per_horizon = {h: summaries_from_store(store, h) for h in store.horizons()}
        if not any(per_horizon.values()):
            raise NoShrinkageCellsError("Store holds no successful horseshoe cells")

        banner(f"SHRINKAGE DIAGNOSTICS (top {K})")
        for h, summaries in per_horizon.items():
            if not summaries:
                say(f"⚠️ h={h}: no horseshoe cells")
                continue
            ledger = aggregate_drivers(summaries, K)
            export_driver_artifacts(ledger, out_dir, prefix=f"drivers_h{h}",
                                    metas=blocks or None, write_json=True)
            leader = max(ledger.mean_keep, key=ledger.mean_keep.get)
            say(f"✓ h={h}: {ledger.n_origins} origins, strongest keeper {leader}")


def main():
    app()


if __name__ == '__main__':
    main()
