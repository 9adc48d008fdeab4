"""Command-line entry points: synth, run, eval, serve."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import click

from .orchestrator import Run, RunConfig, load_run_for_eval
from .synth import SynthConfig, synth_generate


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable info logging.")
def main(verbose: bool):
    """Adaptive multi-view rule discovery for compatible-products prediction."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="Synthetic benchmark config (JSON).")
@click.option("--out", "outdir", required=True, type=click.Path(),
              help="Output directory for catalogs, log, and planted rules.")
def synth(config_path: str, outdir: str):
    """Generate a planted-rule benchmark dataset."""
    cfg = SynthConfig.from_file(config_path)
    result = synth_generate(cfg)
    result.write(outdir)
    click.echo(f"catalogs: 2 x {len(result.catalog_a)} products")
    click.echo(f"co-purchase records: {len(result.copurchase)}")
    click.echo(f"unlabeled pairs: {len(result.unlabeled)}")
    click.echo(f"planted rules: {len(result.ground_truth_rules)} -> "
               f"{Path(outdir) / 'rules_truth.json'}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="Run config (JSON).")
@click.option("--out", "run_dir", required=True, type=click.Path(),
              help="Run directory for all artifacts.")
@click.option("--decisions", type=click.Path(exists=True), default=None,
              help="Headless mode: replay this decisions file.")
@click.option("--ablation", type=str, default=None,
              help="Override the configured ablation mode.")
@click.option("--seed", type=int, default=None, help="Override the configured seed.")
def run(config_path: str, run_dir: str, decisions: str | None,
        ablation: str | None, seed: int | None):
    """Execute the full iterative rule-discovery run headlessly."""
    cfg = RunConfig.from_file(config_path)
    if decisions is not None:
        cfg.decisions = decisions
        cfg.annotator = "decisions"
    if ablation is not None:
        cfg.ablation = ablation
    if seed is not None:
        cfg.seed = seed
    cfg.__post_init__()
    if cfg.annotator == "api":
        raise click.UsageError(
            "annotator 'api' needs the annotation service; use `amrule serve`")
    r = Run(cfg, run_dir)
    r.run_all()
    doc = r.metrics_doc()
    click.echo(json.dumps(doc["final"], indent=2, sort_keys=True))


@main.command("eval")
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True),
              help="A finished run directory.")
@click.option("--split", type=click.Choice(["train", "validation", "test"]),
              default="test")
def eval_cmd(run_dir: str, split: str):
    """Evaluate the persisted ensemble on a dataset split."""
    r = load_run_for_eval(run_dir)
    click.echo(json.dumps(r.evaluate_split(split), indent=2, sort_keys=True))


@main.command()
@click.option("--run", "config_path", required=True, type=click.Path(exists=True),
              help="Run directory containing config.json, or a config file; "
                   "the loop executes with annotation served over HTTP.")
@click.option("--bind", default="127.0.0.1:8765", help="host:port to bind.")
@click.option("--out", "run_dir", default=None, type=click.Path(),
              help="Run directory when --run points at a config file.")
@click.option("--static", "static_dir", default=None, type=click.Path(),
              help="Directory with the built workbench (frontend/dist).")
def serve(config_path: str, bind: str, run_dir: str | None, static_dir: str | None):
    """Host the annotation API (and workbench) for an interactive run."""
    from .service import serve as serve_run

    path = Path(config_path)
    if path.is_dir():
        cfg = RunConfig.from_file(path / "config.json")
        target = run_dir or str(path)
    else:
        cfg = RunConfig.from_file(path)
        if run_dir is None:
            raise click.UsageError("--out is required when --run is a config file")
        target = run_dir
    cfg.annotator = "api"
    host, _, port = bind.partition(":")
    r = Run(cfg, target)
    click.echo(f"serving annotation API on http://{bind} (run dir: {target})")
    serve_run(r, host=host or "127.0.0.1", port=int(port or 8765),
              static_dir=static_dir)


if __name__ == "__main__":
    main()
