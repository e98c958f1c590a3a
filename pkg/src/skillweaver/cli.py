"""Operator CLI: build/inspect the knowledge index, run offline smoke chats,
and launch the HTTP service.

Exit codes are uniform across subcommands: 0 success, 1 domain error,
2 usage or configuration error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import agents, knowledge
from .config import ConfigError, load_provider_config, load_service_config
from .providers import OpenAIProvider, StubProvider
from .session import SessionStore, UnknownScenario


def _echo_report(report: agents.FeedbackReport) -> None:
    click.echo(f"## {agents.SECTION_OVERALL}")
    click.echo(report.overall_style)
    for title, items in ((agents.SECTION_STRENGTHS, report.strengths),
                         (agents.SECTION_IMPROVEMENTS, report.improvements),
                         (agents.SECTION_RECOMMENDATIONS, report.recommendations)):
        click.echo(f"\n## {title}")
        for item in items:
            click.echo(f"- {item}")
    if report.grounding:
        click.echo("\nGuidance sources:")
        for r in report.grounding:
            click.echo(f"- {r.chunk_id} (score {r.score:.3f})")


def _build_embedder(kind: str) -> knowledge.Embedder:
    if kind == "stub":
        return knowledge.stub_embedder
    provider = OpenAIProvider(load_provider_config())
    return provider.embed


@click.group()
def main():
    """Conversation-practice service tooling."""


@main.command()
@click.option("--corpus", "corpus_dir", required=True,
              type=click.Path(exists=True, file_okay=False),
              help="Directory of .txt/.md guidance documents.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Index file to write.")
@click.option("--chunk-size", default=knowledge.DEFAULT_CHUNK_SIZE,
              show_default=True, help="Chunk size in characters.")
@click.option("--overlap", default=knowledge.DEFAULT_OVERLAP, show_default=True,
              help="Chunk overlap in characters.")
@click.option("--embedder", "embedder_kind",
              type=click.Choice(["stub", "live"]), default="stub",
              show_default=True)
@click.option("--json", "as_json", is_flag=True,
              help="Emit a machine-readable report.")
def ingest(corpus_dir, out_path, chunk_size, overlap, embedder_kind, as_json):
    """Chunk, embed, and index a corpus directory."""
    if chunk_size <= overlap or overlap < 0:
        raise click.UsageError("--chunk-size must be greater than --overlap")
    index = knowledge.VectorIndex()
    report = knowledge.ingest(corpus_dir, _build_embedder(embedder_kind), index,
                              chunk_size=chunk_size, overlap=overlap)
    knowledge.save_index(index, out_path)
    if as_json:
        click.echo(json.dumps({
            "docs": report.docs, "chunks": report.chunks, "dim": report.dim,
            "skipped": report.skipped, "index": str(out_path),
        }))
    else:
        click.echo(f"{report.docs} documents, {report.chunks} chunks "
                   f"(dim {report.dim}) -> {out_path}")
    for skipped in report.skipped:
        click.echo(f"skipped: {skipped}", err=True)


@main.command()
@click.option("--index", "index_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--text", "query_text", required=True)
@click.option("--k", default=knowledge.DEFAULT_TOP_K, show_default=True)
@click.option("--embedder", "embedder_kind",
              type=click.Choice(["stub", "live"]), default="stub",
              show_default=True)
@click.option("--json", "as_json", is_flag=True)
def query(index_path, query_text, k, embedder_kind, as_json):
    """Run a top-k retrieval against a saved index."""
    try:
        index = knowledge.load_index(index_path,
                                     embedder=_build_embedder(embedder_kind))
    except knowledge.FormatError as exc:
        click.echo(f"error: {exc}", err=True)
        raise SystemExit(1)
    results = knowledge.search_top_k(index, query_text, k=max(1, k))
    if as_json:
        click.echo(json.dumps([
            {"rank": i, "chunk_id": r.chunk_id, "score": r.score,
             "chunk_text": r.chunk_text}
            for i, r in enumerate(results, 1)
        ]))
        return
    if not results:
        click.echo("no results")
        return
    for i, r in enumerate(results, 1):
        snippet = " ".join(r.chunk_text.split())
        if len(snippet) > 80:
            snippet = snippet[:77] + "..."
        click.echo(f"{i:>2}. {r.score:.3f}  {r.chunk_id}  {snippet}")


@main.command()
@click.option("--scenario", "scenario_id", required=True,
              help="Preset scenario id (see the bundled library).")
@click.option("--script", "script_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="File with one user utterance per line.")
@click.option("--index", "index_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Optional saved index for feedback grounding.")
def chat(scenario_id, script_path, index_path):
    """Run a fully offline scripted conversation plus feedback (stub providers)."""
    provider = StubProvider()
    store = SessionStore()
    index = (knowledge.load_index(index_path) if index_path
             else knowledge.VectorIndex())
    try:
        session = store.create(scenario_id=scenario_id)
    except UnknownScenario:
        raise click.UsageError(f"unknown scenario id {scenario_id!r}")

    lines = [line.strip() for line in
             Path(script_path).read_text(encoding="utf-8").splitlines()
             if line.strip()]
    if not lines:
        click.echo("error: script contains no utterances (no_user_turns)",
                   err=True)
        raise SystemExit(1)

    click.echo(f"Scenario: {session.scenario.title}\n")
    for line in lines:
        reply = agents.converse(store, session.id, line, provider)
        click.echo(f"You: {line}")
        click.echo(f"Agent: {reply}")
    click.echo("")
    report = agents.generate_feedback(store.get(session.id), index, provider)
    _echo_report(report)


@main.command()
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=None, type=int,
              help="Override the configured port.")
def serve(config_path, host, port):
    """Run the HTTP service until interrupted."""
    import logging

    import uvicorn

    from .api import create_app

    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(name)s %(message)s")

    try:
        service = load_service_config(config_path)
        provider_config = load_provider_config(config_path)
    except ConfigError as exc:
        raise click.UsageError(str(exc))

    if service.provider_mode == "live":
        if not provider_config.api_key:
            raise click.UsageError(
                "live provider mode requires an api key (SW_API_KEY)")
        provider = OpenAIProvider(provider_config)
        embedder = provider.embed
    else:
        provider = StubProvider()
        embedder = knowledge.stub_embedder

    if service.index_path:
        try:
            index = knowledge.load_index(service.index_path, embedder=embedder)
        except (OSError, knowledge.FormatError) as exc:
            raise click.UsageError(f"cannot load index: {exc}")
    else:
        index = knowledge.VectorIndex(embedder=embedder)

    app = create_app(provider=provider, store=SessionStore(), index=index,
                     provider_mode=service.provider_mode,
                     cors_origin=service.cors_origin)
    # uvicorn's access log would print raw paths (session ids); the app's own
    # middleware logs redacted routes instead
    uvicorn.run(app, host=host, port=port or service.port, log_level="info",
                access_log=False)


if __name__ == "__main__":
    sys.exit(main())
