"""Ingest a small dialogue into graph/sample files, then query it.

Uses the deterministic offline clients (hash embedder, rule analyzer), so no
credentials or network are needed; swapping in the HTTP clients changes
nothing else. The second run_ingest call demonstrates the warm cache: zero
external calls, byte-identical files.
"""

import tempfile
from pathlib import Path

from hage import RouterParams, load_graph, load_samples, synthesize_context
from hage.query import select_anchors
from hage_ingest import (HashEmbeddingClient, QaItem, RuleChatClient, Turn,
                         run_ingest)

dialogue = [
    Turn("Alice", "I moved to Lisbon in 2021 because my company opened an "
                  "office there.", timestamp=100, session=0),
    Turn("Bob", "Lisbon sounds great. I visited Portugal last summer.",
         timestamp=160, session=0),
    Turn("Alice", "The office move led to a promotion for me in March.",
         timestamp=220, session=0),
    Turn("Alice", "My sister Carol also works in Lisbon now.",
         timestamp=5060, session=1),
]
qa = [QaItem("q0", "When did Alice move to Lisbon?", "2021")]

work = Path(tempfile.mkdtemp())
report = run_ingest(dialogue, qa, HashEmbeddingClient(dim=64),
                    RuleChatClient(), work / "cache", work / "out")
print(f"cold run: {report['nodes']} nodes, {report['edges']} edges, "
      f"{report['samples']} samples, {report['external_calls']} service calls")

rerun = run_ingest(dialogue, qa, HashEmbeddingClient(dim=64),
                   RuleChatClient(), work / "cache", work / "out2")
print(f"warm rerun: {rerun['external_calls']} service calls (cache hits only)")

graph = load_graph(report["graph_file"])
samples = load_samples(report["sample_file"], graph=graph)
sample = samples[0]
anchors = select_anchors(graph, sample.query, 3)
context = synthesize_context(graph, set(anchors), sample.query, 64)
print(f"\nquery: {sample.query_text!r} ({sample.query.intent.label} intent)")
print(f"anchor nodes {anchors}, context ordered {context.ordering}ly:")
print(context.rendered)
