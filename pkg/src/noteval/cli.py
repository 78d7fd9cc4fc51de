"""Command-line entry points: validate, rouge, judge, report, generate, serve."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .agreement import read_rating_csv, write_rating_csv
from .corpus import (
    attach_external_scores,
    default_rater_groups_path,
    load_corpus,
    synthetic_corpus_path,
)
from .decoding import GenerationConfig, GenerationMode, ScriptedLm, beam_search
from .demo import run_demo
from .judge import ChatClient, Criterion, JudgeConfig
from .notes import Provenance, render_note
from .reports import (
    RaterGroups,
    RunManifest,
    compile_report,
    run_judge_eval,
    run_rouge_eval,
    write_report_bundle,
)

_MODELS = {"genmod": Provenance.GENMOD, "specmod": Provenance.SPECMOD}


@click.group()
def main() -> None:
    """Evaluation toolkit for section-tagged clinical notes."""


def _load_or_fail(corpus: str):
    load = load_corpus(corpus)
    for issue in load.issues:
        click.echo(f"violation: {issue}", err=True)
    return load


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
def validate(corpus: str) -> None:
    """Strictly validate every note field of a JSONL corpus."""
    load = _load_or_fail(corpus)
    click.echo(f"{len(load.records)} record(s) loaded, {len(load.issues)} line(s) with violations")
    if load.issues:
        sys.exit(1)


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--which", type=click.Choice(["genmod", "specmod", "both"]), default="both")
@click.option("--out", type=click.Path(file_okay=False), default=None)
def rouge(corpus: str, which: str, out: str | None) -> None:
    """Average ROUGE of hypothesis notes against references."""
    load = _load_or_fail(corpus)
    models = list(_MODELS) if which == "both" else [which]
    tables = [run_rouge_eval(load.records, _MODELS[m]) for m in models]
    header = f"| {'Model':8} | {'Section':9} | R-1    | R-2    | R-3    | R-L    |"
    click.echo(header)
    click.echo("|" + "-" * (len(header) - 2) + "|")
    for table in tables:
        for row in table.rows:
            cells = " | ".join(f"{row.scores[k].f1 * 100:6.2f}" for k in ("r1", "r2", "r3", "rl"))
            click.echo(f"| {row.model:8} | {row.section:9} | {cells} |")
    if out:
        out_path = Path(out)
        out_path.mkdir(parents=True, exist_ok=True)
        for model, table in zip(models, tables):
            rows = table.csv_rows()
            target = out_path / f"rouge_{model}.csv"
            target.write_text("\n".join(",".join(r) for r in rows) + "\n", encoding="utf-8")
            click.echo(f"wrote {target}")


def _judge_config(judge_config: str | None, endpoint: str | None, model: str | None, shots: int | None) -> JudgeConfig:
    if judge_config:
        cfg = JudgeConfig.from_file(judge_config)
    elif endpoint and model:
        cfg = JudgeConfig(endpoint=endpoint, model_name=model)
    else:
        raise click.UsageError("provide --judge-config or both --endpoint and --model")
    if shots is not None:
        cfg = cfg.with_shots(shots)
    cfg.validate()
    return cfg


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--judge-config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--endpoint", default=None, help="Chat endpoint URL (or stub:always-true / stub:hash).")
@click.option("--model", default=None, help="Model name sent to the endpoint.")
@click.option("--shots", type=click.IntRange(0, 3), default=None)
@click.option("--ratings", multiple=True, type=click.Path(exists=True, dir_okay=False),
              help="Human rating CSV(s) to merge into the matrices.")
@click.option("--out", required=True, type=click.Path(file_okay=False))
def judge(corpus: str, judge_config: str | None, endpoint: str | None, model: str | None,
          shots: int | None, ratings: tuple[str, ...], out: str) -> None:
    """Judge every hypothesis note on all four criteria."""
    load = _load_or_fail(corpus)
    cfg = _judge_config(judge_config, endpoint, model, shots)
    with ChatClient(cfg) as client:
        matrices = run_judge_eval(load, cfg, client=client, human_csv_paths=ratings)
        requests = client.request_count
    out_path = Path(out)
    out_path.mkdir(parents=True, exist_ok=True)
    ratings_path = out_path / "ratings.csv"
    write_rating_csv([matrices[c.value] for c in Criterion if c.value in matrices], ratings_path)
    manifest = RunManifest.create(
        run_id=load.digest[:12],
        corpus_digest=load.digest,
        config={"endpoint": cfg.endpoint, "model_name": cfg.model_name, "shots": cfg.shots,
                "temperature": cfg.temperature, "rater_id": cfg.rater_id},
    )
    (out_path / "manifest.json").write_text(manifest.to_json() + "\n", encoding="utf-8")
    click.echo(f"judged {len(load.all_hypothesis_notes())} note(s) with {requests} request(s)")
    click.echo(f"wrote {ratings_path}")


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--ratings", multiple=True, required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--rater-groups", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--rouge", "rouge_models", type=click.Choice(["genmod", "specmod", "both", "none"]),
              default="none", help="Recompute ROUGE tables for the report.")
@click.option("--external-scores", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", required=True, type=click.Path(file_okay=False))
def report(corpus: str, ratings: tuple[str, ...], rater_groups: str | None,
           rouge_models: str, external_scores: str | None, out: str) -> None:
    """Compile the evaluation report from rating CSVs (plus optional extras)."""
    load = _load_or_fail(corpus)
    matrices: dict = {}
    for path in ratings:
        for criterion_value, matrix in read_rating_csv(path).items():
            if criterion_value in matrices:
                matrices[criterion_value] = matrices[criterion_value].merged(matrix)
            else:
                matrices[criterion_value] = matrix
    groups = RaterGroups.from_file(rater_groups or default_rater_groups_path())
    tables = []
    if rouge_models != "none":
        models = list(_MODELS) if rouge_models == "both" else [rouge_models]
        tables = [run_rouge_eval(load.records, _MODELS[m]) for m in models]
    scores = None
    if external_scores:
        attachment = attach_external_scores(load.records, external_scores)
        for warning in attachment.warnings:
            click.echo(f"warning: {warning}", err=True)
        scores = attachment.scores
    run_id = load.digest[:12]
    markdown = compile_report(matrices, groups, rouge_tables=tables,
                              external_scores=scores, run_id=run_id)
    manifest = RunManifest.create(run_id=run_id, corpus_digest=load.digest,
                                  config={"ratings": [str(p) for p in ratings]})
    written = write_report_bundle(out, markdown, matrices, rouge_tables=tables, manifest=manifest)
    for path in written:
        click.echo(f"wrote {path}")


@main.command()
@click.option("--nrns", type=int, default=5)
@click.option("--beam-size", type=int, default=4)
@click.option("--max-len", type=int, default=64)
@click.option("--lm-table", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Decode a scripted LM table instead of running the built-in demo.")
@click.option("--prompt", default="", help="Space-separated prompt tokens for --lm-table.")
def generate(nrns: int, beam_size: int, max_len: int, lm_table: str | None, prompt: str) -> None:
    """Toy decoding demos for the single-pass vs per-section designs."""
    if lm_table:
        lm = ScriptedLm.from_table(Path(lm_table).read_text(encoding="utf-8"))
        cfg = GenerationConfig(beam_size=beam_size, nrns=nrns, max_len=max_len,
                               mode=GenerationMode.SINGLE_PASS)
        tokens = beam_search(lm, tuple(prompt.split()), cfg)
        click.echo(" ".join(tokens))
        return
    result = run_demo(nrns=nrns, beam_size=beam_size, max_len=max_len)
    click.echo(f"single-pass note (nrns={nrns}):")
    click.echo(render_note(result.single_pass.note, with_tags=True))
    click.echo("")
    click.echo(f"per-section note (nrns={nrns}):")
    click.echo(render_note(result.per_section.note, with_tags=True))
    click.echo("")
    single = [kind.label for kind in result.phrase_sections_single]
    per = [kind.label for kind in result.phrase_sections_per_section]
    click.echo(f"shared 5-gram appears in single-pass sections: {single or 'none'}")
    click.echo(f"shared 5-gram appears in per-section sections: {per or 'none'}")


@main.command()
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Defaults to the packaged synthetic corpus.")
@click.option("--run-id", default=None)
@click.option("--log", type=click.Path(dir_okay=False), default="review_log.jsonl")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(corpus: str | None, run_id: str | None, log: str, host: str, port: int) -> None:
    """Run the blind human-review service."""
    import uvicorn

    from .review import create_app

    corpus_path = Path(corpus) if corpus else synthetic_corpus_path()
    app = create_app(corpus_path, run_id=run_id, log_path=log)
    click.echo(f"serving corpus {corpus_path} as run {app.state.store.run_id!r}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
