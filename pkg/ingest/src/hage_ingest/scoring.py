"""Phase-1 edge scoring: per-pair relation-strength scores with provenance.

The scoring prompt is a reconstruction (the original is unpublished), so its
version string and the serving model id travel with every cache entry. Scores
are clamped to [0, 1] before they can reach edge features.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .clients import ChatClient

__all__ = ["ScoreCacheEntry", "score_edge", "build_scoring_prompt",
           "SCORING_PROMPT_VERSION"]

SCORING_PROMPT_VERSION = "score-v1"

_SCORE_FIELDS = ("s_temp", "s_sem", "s_causal", "s_ent")


@dataclass
class ScoreCacheEntry:
    src: int
    dst: int
    scores: tuple[float, float, float, float]
    provenance: dict

    def __post_init__(self):
        self.scores = tuple(min(1.0, max(0.0, float(s))) for s in self.scores)
        if len(self.scores) != 4:
            raise ValueError("exactly four relation scores are required")
        for key in ("model", "prompt_hash"):
            if key not in self.provenance:
                raise ValueError(f"provenance must include {key!r}")


def build_scoring_prompt(src_summary: str, dst_summary: str) -> str:
    payload = {"src": src_summary, "dst": dst_summary,
               "version": SCORING_PROMPT_VERSION}
    return (
        "Score the relation strength between two memory events.\n"
        "Return a JSON object with fields s_temp, s_sem, s_causal, s_ent, "
        "each in [0, 1].\n"
        + json.dumps(payload, sort_keys=True, separators=(",", ":"))
    )


def score_edge(src_id: int, dst_id: int, src_summary: str, dst_summary: str,
               chat: ChatClient) -> ScoreCacheEntry:
    prompt = build_scoring_prompt(src_summary, dst_summary)
    doc = chat.complete(prompt)
    scores = tuple(float(doc.get(f, 0.0)) for f in _SCORE_FIELDS)
    provenance = {
        "model": chat.model_id,
        "prompt_hash": hashlib.sha256(prompt.encode()).hexdigest()[:16],
        "prompt_version": SCORING_PROMPT_VERSION,
    }
    return ScoreCacheEntry(src_id, dst_id, scores, provenance)
