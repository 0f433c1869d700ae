"""Command-line front door.

Every stage subcommand is a thin adapter over evisynth.pipeline: it reads
artifact JSON, calls the same stage function the service calls, and writes
pipeline.artifact_json output atomically — byte-identical to a library run.
Exit codes: 0 ok, 1 runtime failure, 2 usage error. stdout stays clean;
diagnostics go to stderr.
"""

from __future__ import annotations

import json
import os
import sys
import tempfile
from pathlib import Path

import click

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from . import pipeline as pl
from .core import PicoQuestion, validate_pico
from .errors import EviSynthError
from .evalharness import (
    MetricsReport,
    ResultRecord,
    ReviewMetrics,
    eval_extraction,
    eval_results,
    eval_screening,
    eval_search,
    load_benchmark,
    report,
)
from .extraction import ExtractedCell, FieldSpec
from .gateway import (
    Gateway,
    MockProvider,
    load_transcript,
    provider_from_env,
    provider_from_transcript,
)
from .pubmed import FixtureClient, FixtureIndex, LivePubMedClient
from .screening import CriteriaSet, RankedList
from .synthesis import EffectRow, OutcomeSpec

EVAL_STAGES = ("search", "screen", "extract", "results")


# ---------------------------------------------------------------- plumbing


def _fail(message: str) -> "click.ClickException":
    # ClickException prints to stderr and exits 1
    return click.ClickException(message)


def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise _fail(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise _fail(f"{path} is not valid JSON: {exc}") from exc


def _write_atomic(path: str, text: str) -> None:
    """Write via temp file + rename so readers never see a torn artifact."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise _fail(f"cannot write {path}: {exc}") from exc


def _note(message: str) -> None:
    click.echo(message, err=True)


def _load_pico(path: str) -> PicoQuestion:
    data = _read_json(path)
    try:
        return validate_pico(PicoQuestion.from_dict(data))
    except (EviSynthError, KeyError, TypeError, ValueError) as exc:
        raise _fail(f"bad pico in {path}: {exc}") from exc


def _script_provider(path: str) -> MockProvider:
    """Build a mock provider from a script file.

    Two formats are accepted: a JSON array of
    {"template_id", "slots" | "fingerprint", "response"} entries, or a
    recorded transcript (JSONL of transcript entries).
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _fail(f"cannot read script {path}: {exc}") from exc
    stripped = text.lstrip()
    if stripped.startswith("["):
        try:
            entries = json.loads(text)
        except json.JSONDecodeError as exc:
            raise _fail(f"script {path} is not valid JSON: {exc}") from exc
        provider = MockProvider()
        for i, entry in enumerate(entries):
            if not isinstance(entry, dict) or "template_id" not in entry or "response" not in entry:
                raise _fail(f"script {path} entry #{i + 1}: need template_id and response")
            key = entry.get("slots", entry.get("fingerprint"))
            if key is None:
                raise _fail(f"script {path} entry #{i + 1}: need slots or fingerprint")
            try:
                provider.script(entry["template_id"], key, entry["response"])
            except EviSynthError as exc:
                raise _fail(f"script {path} entry #{i + 1}: {exc}") from exc
        return provider
    try:
        return provider_from_transcript(load_transcript(path))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise _fail(f"script {path} is neither a script array nor a transcript: {exc}") from exc


def _make_gateway(ctx, provider_kind: str, script: str | None, transcript: str | None) -> Gateway:
    replay_transcript = (ctx.obj or {}).get("replay_transcript")
    if replay_transcript is not None and script is None:
        script = replay_transcript
    if provider_kind == "mock":
        if script is None:
            raise click.UsageError("--provider mock requires --script")
        provider = _script_provider(script)
    elif provider_kind == "env":
        provider = provider_from_env()
    else:  # pragma: no cover - click Choice guards this
        raise click.UsageError(f"unknown provider {provider_kind!r}")
    return Gateway(provider, transcript_path=transcript)


def _make_client(fixture: str | None):
    if fixture is not None:
        try:
            return FixtureClient(FixtureIndex.load(fixture))
        except (EviSynthError, OSError, json.JSONDecodeError, KeyError) as exc:
            raise _fail(f"cannot load fixture {fixture}: {exc}") from exc
    return LivePubMedClient()


def _provider_options(fn):
    fn = click.option(
        "--provider",
        type=click.Choice(["mock", "env"]),
        default="mock",
        show_default=True,
        help="mock replays a --script file; env builds a live provider from LLM_* vars.",
    )(fn)
    fn = click.option(
        "--script",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="Scripted responses: JSON array of entries, or a recorded transcript (JSONL).",
    )(fn)
    fn = click.option(
        "--transcript",
        type=click.Path(dir_okay=False),
        default=None,
        help="Append every LLM call made during this run to this JSONL file.",
    )(fn)
    return fn


def _run_stage(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except EviSynthError as exc:
        raise _fail(str(exc)) from exc


# ---------------------------------------------------------------- commands


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.pass_context
def main(ctx):
    """Evidence-synthesis pipeline: run stages on local files, evaluate
    against a benchmark, or launch the HTTP service."""
    ctx.ensure_object(dict)


@main.command()
@click.option("--pico", "pico_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--fixture", type=click.Path(exists=True, file_okay=False), default=None,
              help="Offline article corpus directory; omit to use the live PubMed client.")
@click.option("--cap", type=int, default=None, help="Max results per query.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Where to write the queries artifact (JSON).")
@click.option("--studies-out", type=click.Path(dir_okay=False), default=None,
              help="Also run retrieval and write the studies artifact here.")
@_provider_options
@click.pass_context
def search(ctx, pico_path, fixture, cap, out_path, studies_out, provider, script, transcript):
    """Generate and refine retrieval queries (and optionally retrieve)."""
    gateway = _make_gateway(ctx, provider, script, transcript)
    client = _make_client(fixture)
    pico = _load_pico(pico_path)
    queries = _run_stage(pl.generate_queries_stage, pico, gateway, client, cap=cap)
    _write_atomic(out_path, pl.artifact_json(queries))
    _note(f"queries -> {out_path}")
    if studies_out:
        studies = _run_stage(pl.run_search_stage, queries, client, cap=cap)
        _write_atomic(studies_out, pl.artifact_json(studies))
        _note(f"studies ({len(studies.pmids)}) -> {studies_out}")


@main.command()
@click.option("--pico", "pico_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--studies", "studies_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--criteria", "criteria_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Criteria JSON; omitted, criteria are generated first.")
@click.option("--criteria-out", type=click.Path(dir_okay=False), default=None,
              help="Write the (possibly generated) criteria artifact here.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None,
              help="Also write the ranking as CSV.")
@_provider_options
@click.pass_context
def screen(ctx, pico_path, studies_path, criteria_path, criteria_out, out_path, csv_path,
           provider, script, transcript):
    """Screen retrieved studies against eligibility criteria and rank them."""
    gateway = _make_gateway(ctx, provider, script, transcript)
    pico = _load_pico(pico_path)
    studies = _artifact(pl.StudiesArtifact, studies_path)
    if criteria_path:
        try:
            criteria = CriteriaSet.from_dict(_read_json(criteria_path))
        except (EviSynthError, KeyError, TypeError, ValueError) as exc:
            raise _fail(f"bad criteria in {criteria_path}: {exc}") from exc
    else:
        criteria = _run_stage(pl.generate_criteria_stage, pico, gateway)
    if criteria_out:
        _write_atomic(criteria_out, pl.artifact_json(criteria))
        _note(f"criteria -> {criteria_out}")
    screening = _run_stage(pl.run_screening_stage, pico, criteria, studies.studies, gateway)
    _write_atomic(out_path, pl.artifact_json(screening))
    _note(f"screening -> {out_path}")
    if csv_path:
        _write_atomic(csv_path, screening.ranking.to_csv())
        _note(f"ranking csv -> {csv_path}")


@main.command()
@click.option("--studies", "studies_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--fields", "fields_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Field specs JSON; enables the field table.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Where to write the field-extraction artifact (requires --fields).")
@click.option("--outcome", "outcome_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Outcome spec JSON; enables numeric result extraction.")
@click.option("--results-out", type=click.Path(dir_okay=False), default=None,
              help="Where to write the results artifact (requires --outcome).")
@click.option("--fixture", type=click.Path(exists=True, file_okay=False), default=None,
              help="Corpus directory for full-text fetches.")
@_provider_options
@click.pass_context
def extract(ctx, studies_path, fields_path, out_path, outcome_path, results_out, fixture,
            provider, script, transcript):
    """Extract study fields and/or numeric outcome results."""
    if fields_path is None and outcome_path is None:
        raise click.UsageError("nothing to extract: pass --fields and/or --outcome")
    if (fields_path is None) != (out_path is None):
        raise click.UsageError("--fields and --out go together")
    if (outcome_path is None) != (results_out is None):
        raise click.UsageError("--outcome and --results-out go together")
    gateway = _make_gateway(ctx, provider, script, transcript)
    client = _make_client(fixture) if fixture else None
    studies = _artifact(pl.StudiesArtifact, studies_path)
    if fields_path:
        raw = _read_json(fields_path)
        raw = raw.get("fields", raw) if isinstance(raw, dict) else raw
        try:
            fields = [FieldSpec.from_dict(f) for f in raw]
        except (EviSynthError, KeyError, TypeError, ValueError) as exc:
            raise _fail(f"bad field specs in {fields_path}: {exc}") from exc
        extraction = _run_stage(
            pl.run_extraction_stage, studies.studies, fields, gateway, client=client
        )
        _write_atomic(out_path, pl.artifact_json(extraction))
        _note(f"extraction -> {out_path}")
    if outcome_path:
        try:
            outcome = OutcomeSpec.from_dict(_read_json(outcome_path))
        except (EviSynthError, KeyError, TypeError, ValueError) as exc:
            raise _fail(f"bad outcome spec in {outcome_path}: {exc}") from exc
        results = _run_stage(
            pl.run_results_stage, studies.studies, outcome, gateway, client=client
        )
        _write_atomic(results_out, pl.artifact_json(results))
        _note(f"results -> {results_out}")


@main.command()
@click.option("--results", "results_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice(["random_dl", "fixed_iv"]), default="random_dl",
              show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--forest", "forest_path", type=click.Path(dir_okay=False), default=None,
              help="Also write the forest plot SVG on its own.")
def synthesize(results_path, method, out_path, forest_path):
    """Pool extracted effects into a meta-analysis artifact."""
    results = _artifact(pl.ResultsArtifact, results_path)
    synthesis = _run_stage(pl.run_pooling_stage, results.effect_rows(), method=method)
    _write_atomic(out_path, pl.artifact_json(synthesis))
    _note(f"synthesis -> {out_path}")
    if forest_path:
        _write_atomic(forest_path, synthesis.forest_svg)
        _note(f"forest svg -> {forest_path}")


def _artifact(cls, path: str):
    try:
        return cls.from_dict(_read_json(path))
    except (EviSynthError, KeyError, TypeError, ValueError) as exc:
        raise _fail(f"bad {cls.__name__} in {path}: {exc}") from exc


# ------------------------------------------------------------------- eval


def _review_metrics(review, raw_review: dict, stages: set[str]) -> ReviewMetrics:
    predictions = raw_review.get("predictions") or {}
    kwargs: dict = {"review_id": review.id}

    if "search" in stages and "found_pmids" in predictions and review.ground_truth_pmids:
        kwargs["search_recall"] = eval_search(
            set(predictions["found_pmids"]), review.ground_truth_pmids
        )

    if "screen" in stages and "ranking" in predictions and review.ground_truth_pmids:
        raw_ranking = predictions["ranking"]
        entries = raw_ranking["entries"] if isinstance(raw_ranking, dict) else raw_ranking
        ranked = RankedList(
            entries=tuple((e["pmid"], float(e["score"])) for e in entries)
        )
        kwargs["recall_curve"] = eval_screening(ranked, review.ground_truth_pmids)

    if "extract" in stages and "extraction" in predictions and review.field_truth:
        if "fields" not in raw_review:
            raise _fail(f"review {review.id}: extraction predictions need a 'fields' list")
        fields = [FieldSpec.from_dict(f) for f in raw_review["fields"]]
        cells_by_pmid = {
            pmid: tuple(ExtractedCell.from_dict(c) for c in cells)
            for pmid, cells in predictions["extraction"].items()
        }
        kwargs["extraction"] = eval_extraction(cells_by_pmid, review.field_truth, fields)

    if "results" in stages and "results" in predictions and review.outcome_truth:
        records = []
        for raw in predictions["results"]:
            row = raw.get("row")
            records.append(
                ResultRecord(
                    pmid=raw["pmid"],
                    outcome=raw["outcome"],
                    status=raw["status"],
                    row=EffectRow.from_dict({**row, "pmid": raw["pmid"]}) if row else None,
                )
            )
        kwargs["result_score"] = eval_results(records, review.outcome_truth)

    return ReviewMetrics(**kwargs)


@main.command("eval")
@click.option("--benchmark", "benchmark_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--stages", default=",".join(EVAL_STAGES), show_default=True,
              help="Comma-separated subset of search,screen,extract,results.")
@click.option("--format", "fmt", type=click.Choice(["markdown", "json"]), default="markdown",
              show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def eval_cmd(benchmark_path, stages, fmt, out_path):
    """Score recorded predictions in a benchmark file and write a report.

    Each review in the benchmark may carry a "predictions" object
    (found_pmids, ranking, extraction, results) holding a pipeline run's
    outputs; reviews without predictions appear in the report unmeasured.
    """
    wanted = {s.strip() for s in stages.split(",") if s.strip()}
    unknown = wanted - set(EVAL_STAGES)
    if unknown:
        raise click.UsageError(f"unknown stages: {', '.join(sorted(unknown))}")
    try:
        reviews = load_benchmark(benchmark_path)
    except EviSynthError as exc:
        raise _fail(f"bad benchmark {benchmark_path}: {exc}") from exc
    raw_by_id = {r["id"]: r for r in _read_json(benchmark_path)["reviews"]}
    try:
        metrics = MetricsReport(
            reviews=tuple(_review_metrics(r, raw_by_id[r.id], wanted) for r in reviews)
        )
    except (EviSynthError, KeyError, TypeError, ValueError) as exc:
        raise _fail(f"bad predictions in {benchmark_path}: {exc}") from exc
    _write_atomic(out_path, report(metrics, format=fmt))
    _note(f"report ({len(reviews)} reviews) -> {out_path}")


# ----------------------------------------------------------------- replay


@main.group()
@click.option("--transcript", "transcript_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Recorded transcript (JSONL) to replay.")
@click.pass_context
def replay(ctx, transcript_path):
    """Re-run a stage with LLM calls answered from a recorded transcript.

    Usage: evisynth replay --transcript t.jsonl search --pico ... --out ...
    A replayed run writes artifacts byte-identical to the recorded run.
    """
    ctx.ensure_object(dict)
    ctx.obj["replay_transcript"] = transcript_path


replay.add_command(search)
replay.add_command(screen)
replay.add_command(extract)


# ------------------------------------------------------------------ serve


def _load_serve_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise _fail(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise _fail(f"config {path} is not valid TOML: {exc}") from exc


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="TOML config file.")
@click.option("--check", is_flag=True, help="Validate config and build the app, then exit.")
def serve(config_path, check):
    """Launch the HTTP service from a TOML config.

    Keys: store_root (required), host, port, token, ui_dir;
    [provider] kind = "mock"|"env", script = path;
    [pubmed] fixture = corpus directory (omit for the live client).
    """
    from .service import create_app

    config = _load_serve_config(config_path)
    store_root = config.get("store_root")
    if not store_root:
        raise _fail(f"config {config_path}: store_root is required")
    host = str(config.get("host", "127.0.0.1"))
    port = int(config.get("port", 8000))

    provider_cfg = config.get("provider") or {}
    kind = provider_cfg.get("kind", "mock")
    if kind == "mock":
        script = provider_cfg.get("script")
        provider = _script_provider(script) if script else MockProvider()
    elif kind == "env":
        provider = provider_from_env()
    else:
        raise _fail(f"config {config_path}: unknown provider kind {kind!r}")
    transcript = provider_cfg.get("transcript")
    gateway = Gateway(provider, transcript_path=transcript)

    pubmed_cfg = config.get("pubmed") or {}
    client = _make_client(pubmed_cfg.get("fixture"))

    ui_dir = config.get("ui_dir")
    if ui_dir is not None and not Path(ui_dir).is_dir():
        raise _fail(f"config {config_path}: ui_dir {ui_dir!r} is not a directory")

    app = create_app(
        store_root,
        gateway,
        client,
        token=config.get("token"),
        ui_dir=ui_dir,
    )
    if check:
        _note(f"config ok: store at {store_root}, would bind {host}:{port}")
        return

    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level=str(config.get("log_level", "info")))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
