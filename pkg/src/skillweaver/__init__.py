"""Role-play practice for everyday conversations with retrieval-grounded feedback."""

__version__ = "0.1.0"

from .agents import FeedbackReport, generate_feedback, parse_feedback
from .knowledge import VectorIndex, ingest, load_index, save_index, search_top_k
from .providers import OpenAIProvider, ProviderConfig, StubProvider
from .session import SessionStore

__all__ = [
    "FeedbackReport",
    "OpenAIProvider",
    "ProviderConfig",
    "SessionStore",
    "StubProvider",
    "VectorIndex",
    "generate_feedback",
    "ingest",
    "load_index",
    "parse_feedback",
    "save_index",
    "search_top_k",
    "__version__",
]
