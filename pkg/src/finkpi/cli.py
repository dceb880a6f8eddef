"""Command-line entry points: ingest, query, serve, eval, ablate."""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

import click

from .pipeline import PipelineConfig, ingest_paths
from .query import ClarificationNeeded, answer
from .rules import RuleSet
from .store import init_store
from .taxonomy import default_taxonomy

EXIT_CLARIFICATION = 2


def _load_config(config_path, store, no_rules, backend) -> PipelineConfig:
    config = PipelineConfig.from_file(config_path) if config_path else PipelineConfig()
    if store:
        config = replace(config, store_path=str(store))
    if no_rules:
        config = replace(config, rules=config.rules.with_disabled(list(no_rules)))
    if backend:
        config = replace(config, backend=backend)
    return config


@click.group()
def main():
    """Financial KPI extraction and natural-language querying."""


@main.command()
@click.argument("paths", nargs=-1, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--store", type=click.Path(), default=None, help="store file path")
@click.option("--no-rule", "no_rules", multiple=True,
              help="disable a rule flag (repeatable)")
@click.option("--backend", type=click.Choice(["mock", "live"]), default=None)
def ingest(paths, config_path, store, no_rules, backend):
    """Ingest .txt/.html filings (with .meta.json sidecars) into the store."""
    config = _load_config(config_path, store, no_rules, backend)
    files = []
    for path in paths:
        p = Path(path)
        if p.is_dir():
            files += sorted(x for x in p.iterdir()
                            if x.suffix.lower() in (".txt", ".html", ".htm"))
        else:
            files.append(p)
    if not files:
        click.echo("0 files processed")
        return
    reports = ingest_paths(files, config)
    failures = 0
    for report in reports:
        if report.persisted == 0 and report.rejections and report.accepted == 0 \
                and "LoadError" in (report.rejections[0] if report.rejections else ""):
            failures += 1
            click.echo(f"{report.doc_id}: ERROR {report.rejections[0]}")
        else:
            click.echo(f"{report.doc_id}: accepted={report.accepted} "
                       f"corrected={report.corrected} flagged={report.flagged} "
                       f"rejected={report.rejected}")
    if failures == len(reports):
        sys.exit(1)


@main.command()
@click.argument("question")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--store", type=click.Path(), default=None)
@click.option("--json", "as_json", is_flag=True, help="emit the answer bundle as JSON")
def query(question, config_path, store, as_json):
    """Answer a natural-language question over the store."""
    config = _load_config(config_path, store, (), None)
    handle = config.open_store()
    try:
        bundle = answer(question, handle, default_taxonomy(),
                        max_retries=config.max_retries)
    except ClarificationNeeded as exc:
        click.echo(f"Cannot answer: no known metric matches {exc.phrase!r}. "
                   "Try naming a metric like 'revenue' or 'operating margin'.")
        sys.exit(EXIT_CLARIFICATION)
    finally:
        handle.close()
    if as_json:
        click.echo(json.dumps(bundle.to_json(), sort_keys=True))
        return
    click.echo(f"SQL: {bundle.candidate.sql}")
    click.echo(f"Explanation: {bundle.explanation}")
    if bundle.result.columns:
        click.echo(" | ".join(bundle.result.columns))
        for row in bundle.result.rows:
            click.echo(" | ".join(str(v) for v in row))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--store", type=click.Path(), default=None)
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(config_path, store, host, port):
    """Run the HTTP query service."""
    import uvicorn

    from .service import create_app
    config = _load_config(config_path, store, (), None)
    handle = config.open_store()
    uvicorn.run(create_app(handle, config), host=host, port=port)


@main.command("eval")
@click.option("--seed", default=42, type=int)
@click.option("--docs", "n_docs", default=200, type=int)
@click.option("--workdir", type=click.Path(), default=".finkpi-eval")
@click.option("--json-out", type=click.Path(), default=None)
def eval_cmd(seed, n_docs, workdir, json_out):
    """Run the synthetic-corpus evaluation with all rules on."""
    from .harness import generate_synthetic_corpus, run_pipeline_eval
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    store_path = workdir / f"eval-{seed}-{n_docs}.db"
    if store_path.exists():
        store_path.unlink()
    corpus = generate_synthetic_corpus(seed, n_docs)
    run = run_pipeline_eval(corpus, RuleSet.all_on(), store_path)
    payload = run.to_json()
    if json_out:
        Path(json_out).write_text(json.dumps(payload, sort_keys=True, indent=2))
    click.echo(json.dumps(payload, sort_keys=True, indent=2))


@main.command()
@click.option("--seed", default=42, type=int)
@click.option("--docs", "n_docs", default=200, type=int)
@click.option("--ablate", "flags", multiple=True,
              help="rule flag to disable in the comparison run (repeatable); "
                   "default disables all four")
@click.option("--workdir", type=click.Path(), default=".finkpi-eval")
@click.option("--json-out", type=click.Path(), default=None)
def ablate(seed, n_docs, flags, workdir, json_out):
    """Compare all-rules-on against a degraded configuration."""
    from .harness import generate_synthetic_corpus, run_ablation
    corpus = generate_synthetic_corpus(seed, n_docs)
    degraded = RuleSet.all_off() if not flags else \
        RuleSet.all_on().with_disabled(list(flags))
    report = run_ablation(corpus, [RuleSet.all_on(), degraded], workdir)
    click.echo(report.to_markdown())
    if json_out:
        Path(json_out).write_text(json.dumps(report.to_json(), sort_keys=True, indent=2))


if __name__ == "__main__":
    main()
