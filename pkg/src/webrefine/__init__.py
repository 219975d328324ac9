"""Web-corpus refinement: document preparation, heuristic filtering, and deduplication."""

__version__ = "0.1.0"

from .records import Document, RejectReason, StageStats, kept_rates  # noqa: F401
