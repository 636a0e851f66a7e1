"""End-to-end ingest: dialogue turns -> extraction -> scored graph + samples.

All service traffic flows through the content-addressed cache, so rerunning
with a warm cache directory performs zero external calls and reproduces the
output files byte for byte.
"""

from __future__ import annotations

from pathlib import Path

from .build import BuildConfig, QaItem, build_graph
from .cache import CachedChatClient, CachedEmbeddingClient, ResponseCache
from .clients import ChatClient, EmbeddingClient
from .extraction import Turn, extract_events

__all__ = ["run_ingest"]


def run_ingest(
    turns: list[Turn],
    qa: list[QaItem],
    embedder: EmbeddingClient,
    chat: ChatClient,
    cache_dir,
    out_dir,
    config: BuildConfig = None,
) -> dict:
    """Run the full pipeline and return the build report plus call counts."""
    cache = ResponseCache(cache_dir)
    cached_chat = CachedChatClient(chat, cache)
    cached_embed = CachedEmbeddingClient(embedder, cache)

    records = extract_events(turns, cached_chat)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = build_graph(
        records, qa, cached_embed,
        out_graph=out / "graph.jsonl",
        out_samples=out / "samples.jsonl",
        scorer=cached_chat,
        config=config,
    )
    report["external_calls"] = cached_chat.calls + cached_embed.calls
    report["graph_file"] = str(out / "graph.jsonl")
    report["sample_file"] = str(out / "samples.jsonl")
    return report
