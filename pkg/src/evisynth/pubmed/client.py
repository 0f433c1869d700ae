"""PubMed E-utilities client: esearch / efetch / fetch_fulltext.

Shared behavior (batching, preconditions) lives in PubMedClientBase so the
live HTTP client and the offline fixture client cannot drift apart. The
live client adds a sliding-window rate limiter (3 req/s, 10 req/s with an
API key) and a content-addressed on-disk response cache with a 7-day TTL
and atomic writes.

Environment:
    PUBMED_API_KEY      raises the rate limit and is sent with requests
    PUBMED_BASE_URL     E-utilities root override (e.g. a local fixture server)
    EVISYNTH_CACHE_DIR  cache directory (default ~/.cache/evisynth)
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import tempfile
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import httpx

from ..core import StudyRecord
from ..errors import EviSynthError
from .records import UnparseableRecord, parse_records

DEFAULT_BASE_URL = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils"
EFETCH_BATCH_SIZE = 200
ESEARCH_MAX_RETMAX = 10_000
CACHE_TTL_SECONDS = 7 * 24 * 3600


class TransportError(EviSynthError):
    code = "transport_error"


class RateLimited(EviSynthError):
    code = "rate_limited"


class ProviderError(EviSynthError):
    code = "provider_error"

    def __init__(self, status: int, body: str = ""):
        super().__init__(f"E-utilities returned HTTP {status}", detail=body[:200])
        self.status = status


class NotAvailable(EviSynthError):
    code = "not_available"

    def __init__(self, identifier: str):
        super().__init__(f"full text not available for {identifier!r}", detail=identifier)
        self.identifier = identifier


@dataclass(frozen=True)
class ESearchPage:
    pmids: tuple[str, ...]
    total: int
    retstart: int
    retmax: int

    def __post_init__(self):
        if len(self.pmids) > self.retmax:
            raise ValueError("page holds more ids than retmax")
        if self.total < 0 or self.retstart < 0:
            raise ValueError("total and retstart must be non-negative")


class RateLimiter:
    """Sliding-window limiter: at most ``per_second`` acquisitions in any
    one-second window. Clock and sleep injectable for simulated-time tests."""

    def __init__(self, per_second: int, clock=time.monotonic, sleep=time.sleep):
        self.per_second = per_second
        self._clock = clock
        self._sleep = sleep
        self._times: deque[float] = deque()

    def acquire(self) -> float:
        while True:
            now = self._clock()
            while self._times and self._times[0] <= now - 1.0:
                self._times.popleft()
            if len(self._times) < self.per_second:
                self._times.append(now)
                return now
            self._sleep(self._times[0] + 1.0 - now)


class ResponseCache:
    """Content-addressed response cache. Hits return byte-identical bodies;
    entries expire after ``ttl_seconds``; writes are atomic (temp file then
    rename) so a crashed writer can never leave a torn entry."""

    def __init__(self, root: str | os.PathLike, ttl_seconds: float = CACHE_TTL_SECONDS, clock=time.time):
        self.root = Path(root)
        self.ttl = ttl_seconds
        self._clock = clock

    @staticmethod
    def key(parts: dict) -> str:
        return hashlib.sha256(json.dumps(parts, sort_keys=True).encode("utf-8")).hexdigest()

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> bytes | None:
        path = self._path(key)
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return None
        if self._clock() - entry["stored_at"] > self.ttl:
            try:
                path.unlink()
            except OSError:
                pass
            return None
        return base64.b64decode(entry["body_b64"])

    def put(self, key: str, body: bytes) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = json.dumps(
            {"stored_at": self._clock(), "body_b64": base64.b64encode(body).decode("ascii")}
        )
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(payload)
            os.replace(tmp, path)
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise


def default_cache_dir(env=None) -> Path:
    env = os.environ if env is None else env
    configured = env.get("EVISYNTH_CACHE_DIR")
    if configured:
        return Path(configured)
    return Path.home() / ".cache" / "evisynth"


def _batched(items: list, size: int):
    for i in range(0, len(items), size):
        yield items[i : i + size]


class PubMedClientBase:
    """Preconditions and batching shared by every client implementation."""

    parse_errors: list[UnparseableRecord]

    def __init__(self):
        self.parse_errors = []

    def esearch(self, term: str, retstart: int = 0, retmax: int = 1000) -> ESearchPage:
        if not 1 <= retmax <= ESEARCH_MAX_RETMAX:
            raise ValueError(f"retmax must be in [1, {ESEARCH_MAX_RETMAX}], got {retmax}")
        if retstart < 0:
            raise ValueError(f"retstart must be >= 0, got {retstart}")
        return self._esearch(term, retstart, retmax)

    def efetch(self, pmids: list[str]) -> list[StudyRecord]:
        """Fetch records in batches of EFETCH_BATCH_SIZE; output order equals
        input order. Per-record parse failures land in ``parse_errors``."""
        self.parse_errors = []
        out: list[StudyRecord] = []
        for batch in _batched(list(pmids), EFETCH_BATCH_SIZE):
            records, errors = self._efetch_batch(batch)
            self.parse_errors.extend(errors)
            by_pmid = {r.pmid: r for r in records}
            out.extend(by_pmid[p] for p in batch if p in by_pmid)
        return out

    def fetch_fulltext(self, identifier: str) -> tuple[str, str]:
        """Return (content, format) with format in {xml, text,
        pdf-extracted-text}; raises NotAvailable when there is none."""
        raise NotImplementedError

    def _esearch(self, term: str, retstart: int, retmax: int) -> ESearchPage:
        raise NotImplementedError

    def _efetch_batch(self, pmids: list[str]) -> tuple[list[StudyRecord], list[UnparseableRecord]]:
        raise NotImplementedError


def _detect_format(path_or_content: str, content: str) -> str:
    lowered = path_or_content.lower()
    if lowered.endswith(".pdf.txt"):
        return "pdf-extracted-text"
    if lowered.endswith(".xml") or content.lstrip().startswith("<"):
        return "xml"
    return "text"


class LivePubMedClient(PubMedClientBase):
    """HTTP client for the real E-utilities endpoints."""

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        cache: ResponseCache | None = None,
        rate_limiter: RateLimiter | None = None,
        http: httpx.Client | None = None,
        env=None,
    ):
        super().__init__()
        env = os.environ if env is None else env
        self.base_url = (base_url or env.get("PUBMED_BASE_URL") or DEFAULT_BASE_URL).rstrip("/")
        self.api_key = api_key if api_key is not None else env.get("PUBMED_API_KEY", "")
        self.cache = cache if cache is not None else ResponseCache(default_cache_dir(env))
        self.rate_limiter = rate_limiter or RateLimiter(10 if self.api_key else 3)
        self._http = http or httpx.Client(timeout=60.0)

    def _get(self, endpoint: str, params: dict) -> bytes:
        params = dict(params)
        if self.api_key:
            params["api_key"] = self.api_key
        cache_key = ResponseCache.key({"endpoint": endpoint, "params": params})
        if self.cache is not None:
            hit = self.cache.get(cache_key)
            if hit is not None:
                return hit
        body = self._get_uncached(endpoint, params)
        if self.cache is not None:
            self.cache.put(cache_key, body)
        return body

    def _get_uncached(self, endpoint: str, params: dict) -> bytes:
        url = f"{self.base_url}/{endpoint}"
        for attempt in range(3):
            self.rate_limiter.acquire()
            try:
                resp = self._http.get(url, params=params)
            except httpx.HTTPError as exc:
                raise TransportError(str(exc)) from exc
            if resp.status_code == 429:
                if attempt == 2:
                    raise RateLimited(f"still rate limited after {attempt + 1} attempts")
                time.sleep(float(resp.headers.get("Retry-After", 1.0)))
                continue
            if resp.status_code >= 400:
                raise ProviderError(resp.status_code, resp.text)
            return resp.content
        raise RateLimited("unreachable")  # pragma: no cover

    def _esearch(self, term: str, retstart: int, retmax: int) -> ESearchPage:
        body = self._get(
            "esearch.fcgi",
            {"db": "pubmed", "term": term, "retstart": retstart, "retmax": retmax, "retmode": "json"},
        )
        try:
            result = json.loads(body)["esearchresult"]
            return ESearchPage(
                pmids=tuple(result["idlist"]),
                total=int(result["count"]),
                retstart=retstart,
                retmax=retmax,
            )
        except (KeyError, ValueError) as exc:
            raise ProviderError(0, f"malformed esearch response: {exc}") from exc

    def _efetch_batch(self, pmids: list[str]) -> tuple[list[StudyRecord], list[UnparseableRecord]]:
        body = self._get(
            "efetch.fcgi", {"db": "pubmed", "id": ",".join(pmids), "retmode": "xml"}
        )
        return parse_records(body.decode("utf-8", errors="replace"))

    def fetch_fulltext(self, identifier: str) -> tuple[str, str]:
        path = Path(identifier)
        if path.exists():
            content = path.read_text(encoding="utf-8", errors="replace")
            return content, _detect_format(identifier, content)
        if identifier.upper().startswith("PMC"):
            body = self._get(
                "efetch.fcgi", {"db": "pmc", "id": identifier, "retmode": "xml"}
            )
            content = body.decode("utf-8", errors="replace")
            if "<article" not in content:
                raise NotAvailable(identifier)
            return content, "xml"
        raise NotAvailable(identifier)
