"""hage_ingest: converts conversational/QA corpora into hage graph and
sample files, with cached service calls for embeddings, event extraction,
and relation scoring."""

from .build import BuildConfig, QaItem, build_graph
from .cache import (CachedChatClient, CachedEmbeddingClient, ResponseCache,
                    request_key)
from .clients import (ChatClient, EmbeddingClient, HashEmbeddingClient,
                      HttpChatClient, HttpEmbeddingClient, RuleChatClient,
                      ServiceError)
from .datasets import load_hotpotqa, load_locomo
from .extraction import (EXTRACTION_PROMPT_VERSION, ExtractionRecord, Turn,
                         build_extraction_prompt, extract_events)
from .pipeline import run_ingest
from .scoring import (SCORING_PROMPT_VERSION, ScoreCacheEntry,
                      build_scoring_prompt, score_edge)

__version__ = "0.1.0"
