"""PubMed access: live E-utilities client and the offline fixture client."""

from __future__ import annotations

from .client import (
    CACHE_TTL_SECONDS,
    DEFAULT_BASE_URL,
    EFETCH_BATCH_SIZE,
    ESEARCH_MAX_RETMAX,
    ESearchPage,
    LivePubMedClient,
    NotAvailable,
    ProviderError,
    PubMedClientBase,
    RateLimited,
    RateLimiter,
    ResponseCache,
    TransportError,
    default_cache_dir,
)
from .fixture import FixtureClient, FixtureIndex
from .records import UnparseableRecord, parse_records

__all__ = [
    "CACHE_TTL_SECONDS",
    "DEFAULT_BASE_URL",
    "EFETCH_BATCH_SIZE",
    "ESEARCH_MAX_RETMAX",
    "ESearchPage",
    "FixtureClient",
    "FixtureIndex",
    "LivePubMedClient",
    "NotAvailable",
    "ProviderError",
    "PubMedClientBase",
    "RateLimited",
    "RateLimiter",
    "ResponseCache",
    "TransportError",
    "UnparseableRecord",
    "default_cache_dir",
    "parse_records",
]
