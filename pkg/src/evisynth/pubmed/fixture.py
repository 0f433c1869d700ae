"""Offline fixture index: the whole test corpus in memory.

On disk a fixture is a directory of per-article efetch XML files plus a
manifest mapping query-term -> pmid list:

    fixture/
      manifest.json          {"term text": ["1001", "1002"], ...}
      1001.xml               one <PubmedArticle> (or a full ArticleSet)
      ...
      fulltext/1001.xml      optional full texts, keyed by identifier

FixtureClient evaluates boolean queries against the manifest (term text
matched case-insensitively, field tags ignored), returning pmids in
ascending numeric order, and serves records and full texts from memory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..core import StudyRecord
from ..search.ast import And, Not, Or, QueryAst, Term
from ..search.parser import parse_query
from .client import ESearchPage, NotAvailable, PubMedClientBase, _detect_format
from .records import UnparseableRecord, parse_records


@dataclass
class FixtureIndex:
    articles: dict[str, StudyRecord] = field(default_factory=dict)
    term_map: dict[str, tuple[str, ...]] = field(default_factory=dict)
    fulltext: dict[str, tuple[str, str]] = field(default_factory=dict)  # id -> (content, format)

    def __post_init__(self):
        self.term_map = {k.lower(): tuple(v) for k, v in self.term_map.items()}

    @property
    def universe(self) -> frozenset[str]:
        pmids = set(self.articles)
        for ids in self.term_map.values():
            pmids.update(ids)
        return frozenset(pmids)

    @classmethod
    def load(cls, root: str | Path) -> FixtureIndex:
        root = Path(root)
        manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
        articles: dict[str, StudyRecord] = {}
        for xml_path in sorted(root.glob("*.xml")):
            records, errors = parse_records(xml_path.read_text(encoding="utf-8"))
            if errors:
                raise errors[0]
            for record in records:
                articles[record.pmid] = record
        fulltext: dict[str, tuple[str, str]] = {}
        ft_dir = root / "fulltext"
        if ft_dir.is_dir():
            for path in sorted(ft_dir.iterdir()):
                content = path.read_text(encoding="utf-8")
                fulltext[path.stem] = (content, _detect_format(path.name, content))
        return cls(articles=articles, term_map=manifest, fulltext=fulltext)


def _evaluate(node: QueryAst, index: FixtureIndex) -> set[str]:
    if isinstance(node, Term):
        return set(index.term_map.get(node.text.lower(), ()))
    if isinstance(node, And):
        result = _evaluate(node.children[0], index)
        for child in node.children[1:]:
            result &= _evaluate(child, index)
        return result
    if isinstance(node, Or):
        result: set[str] = set()
        for child in node.children:
            result |= _evaluate(child, index)
        return result
    return set(index.universe) - _evaluate(node.child, index)


class FixtureClient(PubMedClientBase):
    """PubMed client backed entirely by a FixtureIndex."""

    def __init__(self, index: FixtureIndex):
        super().__init__()
        self.index = index

    def _esearch(self, term: str, retstart: int, retmax: int) -> ESearchPage:
        matched = sorted(_evaluate(parse_query(term), self.index), key=int)
        return ESearchPage(
            pmids=tuple(matched[retstart : retstart + retmax]),
            total=len(matched),
            retstart=retstart,
            retmax=retmax,
        )

    def _efetch_batch(self, pmids: list[str]) -> tuple[list[StudyRecord], list[UnparseableRecord]]:
        return [self.index.articles[p] for p in pmids if p in self.index.articles], []

    def fetch_fulltext(self, identifier: str) -> tuple[str, str]:
        if identifier in self.index.fulltext:
            return self.index.fulltext[identifier]
        path = Path(identifier)
        if path.exists():
            content = path.read_text(encoding="utf-8", errors="replace")
            return content, _detect_format(identifier, content)
        raise NotAvailable(identifier)
