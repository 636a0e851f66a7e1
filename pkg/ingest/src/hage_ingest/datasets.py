"""Readers for conversational/QA dataset distributions.

Both readers are schema-tolerant: they pull out only what the pipeline needs
(speaker, text, timestamp, session, and QA pairs) and ignore the rest.
"""

from __future__ import annotations

import json
from pathlib import Path

from .build import QaItem
from .extraction import Turn

__all__ = ["load_locomo", "load_hotpotqa"]


def _as_int(value, default: int) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        return default


def load_locomo(path) -> tuple[list[Turn], list[QaItem]]:
    """Multi-session dialogues: {"sessions": [{"turns": [...]}], "qa": [...]}.

    Session structure is preserved through the Turn.session index."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    turns: list[Turn] = []
    counter = 0
    for s_idx, session in enumerate(doc.get("sessions", [])):
        for t in session.get("turns", []):
            turns.append(Turn(
                speaker=str(t.get("speaker", "unknown")),
                text=str(t.get("text", "")),
                timestamp=_as_int(t.get("timestamp"), counter),
                session=s_idx,
            ))
            counter += 1
    qa = [QaItem(qid=str(q.get("id", f"q{i}")),
                 question=str(q.get("question", "")),
                 answer=str(q.get("answer", "")))
          for i, q in enumerate(doc.get("qa", []))]
    return turns, qa


def load_hotpotqa(path) -> tuple[list[Turn], list[QaItem]]:
    """Multi-hop QA items: context paragraphs become single-session turns
    attributed to their article title."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    items = doc if isinstance(doc, list) else [doc]
    turns: list[Turn] = []
    qa: list[QaItem] = []
    counter = 0
    for i, item in enumerate(items):
        for title, sentences in item.get("context", []):
            text = " ".join(sentences) if isinstance(sentences, list) else str(sentences)
            turns.append(Turn(speaker=str(title), text=text,
                              timestamp=counter, session=i))
            counter += 1
        qa.append(QaItem(qid=str(item.get("_id", f"hotpot-{i}")),
                         question=str(item.get("question", "")),
                         answer=str(item.get("answer", ""))))
    return turns, qa
