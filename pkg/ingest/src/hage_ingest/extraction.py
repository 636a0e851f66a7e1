"""Structured event extraction from dialogue turns.

Each turn is sent to the analysis service with a fixed, versioned prompt and
comes back as an ExtractionRecord mirroring the prompt's output schema. Failed
turns are retried once, then dropped with a log entry rather than failing the
whole corpus.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from .clients import ChatClient, ServiceError

__all__ = ["ExtractionRecord", "Turn", "extract_events",
           "build_extraction_prompt", "EXTRACTION_PROMPT_VERSION"]

log = logging.getLogger(__name__)

EXTRACTION_PROMPT_VERSION = "extract-v1"


@dataclass
class Turn:
    speaker: str
    text: str
    timestamp: int
    session: int = 0


@dataclass
class ExtractionRecord:
    """Structured memory unit for one dialogue turn."""

    speaker: str
    text: str
    entities: list[str]
    topic: str
    relationships: list[dict]
    key_facts: list[str]
    temporal: list[str]
    summary: str
    timestamp: int = 0
    session: int = 0

    def __post_init__(self):
        if not self.summary or not self.summary.strip():
            raise ValueError("extraction summary must be non-empty")


def build_extraction_prompt(speaker: str, text: str,
                            prev_summary: str = "") -> str:
    """Versioned prompt; the payload rides as one canonical JSON object so
    responses are cacheable by content."""
    payload = {"speaker": speaker, "text": text, "prev_summary": prev_summary,
               "version": EXTRACTION_PROMPT_VERSION}
    return (
        "Extract structured memory information from conversational text.\n"
        "Return a JSON object with fields: entities, topic, relationships, "
        "key_facts, temporal, summary.\n"
        + json.dumps(payload, sort_keys=True, separators=(",", ":"))
    )


def _record_from_reply(turn: Turn, doc: dict) -> ExtractionRecord:
    return ExtractionRecord(
        speaker=turn.speaker,
        text=turn.text,
        entities=list(doc.get("entities", [])),
        topic=str(doc.get("topic", "general")),
        relationships=list(doc.get("relationships", [])),
        key_facts=list(doc.get("key_facts", [])),
        temporal=list(doc.get("temporal", [])),
        summary=str(doc.get("summary", "")),
        timestamp=turn.timestamp,
        session=turn.session,
    )


def extract_events(dialogue: list[Turn], chat: ChatClient) -> list[ExtractionRecord]:
    """Run extraction over every turn; one retry per turn, then skip."""
    records = []
    prev_summary = ""
    for i, turn in enumerate(dialogue):
        prompt = build_extraction_prompt(turn.speaker, turn.text, prev_summary)
        doc = None
        for attempt in (1, 2):
            try:
                doc = chat.complete(prompt)
                break
            except ServiceError as exc:
                if attempt == 2:
                    log.warning("turn %d failed after retry, skipping: %s",
                                i, exc)
        if doc is None:
            continue
        try:
            record = _record_from_reply(turn, doc)
        except ValueError as exc:
            log.warning("turn %d produced an invalid record, skipping: %s",
                        i, exc)
            continue
        records.append(record)
        prev_summary = record.summary
    return records
