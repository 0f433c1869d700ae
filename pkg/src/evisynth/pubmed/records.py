"""Parsing of PubMed efetch XML into StudyRecord values."""

from __future__ import annotations

import xml.etree.ElementTree as ET

from ..core import StudyRecord
from ..errors import EviSynthError


class UnparseableRecord(EviSynthError):
    """One article element could not be parsed; collected, never fatal."""

    code = "unparseable_record"

    def __init__(self, pmid: str, reason: str):
        super().__init__(f"record {pmid or '<no pmid>'}: {reason}", detail=pmid)
        self.pmid = pmid


def _text(elem: ET.Element | None) -> str:
    if elem is None:
        return ""
    return "".join(elem.itertext()).strip()


def _parse_article(article: ET.Element) -> StudyRecord:
    pmid = _text(article.find("./MedlineCitation/PMID"))
    if not pmid:
        raise UnparseableRecord("", "missing PMID")
    node = article.find("./MedlineCitation/Article")
    if node is None:
        raise UnparseableRecord(pmid, "missing Article element")
    title = _text(node.find("ArticleTitle"))
    # AbstractText may repeat (structured abstracts); join the sections.
    abstract = " ".join(
        filter(None, (_text(t) for t in node.findall("./Abstract/AbstractText")))
    )
    year: int | None = None
    year_text = _text(node.find("./Journal/JournalIssue/PubDate/Year")) or _text(
        node.find("./ArticleDate/Year")
    )
    if year_text.isdigit():
        year = int(year_text)
    mesh = tuple(
        _text(d)
        for d in article.findall("./MedlineCitation/MeshHeadingList/MeshHeading/DescriptorName")
        if _text(d)
    )
    try:
        return StudyRecord(pmid=pmid, title=title, abstract=abstract, year=year, mesh_terms=mesh)
    except ValueError as exc:
        raise UnparseableRecord(pmid, str(exc)) from exc


def parse_records(xml_text: str) -> tuple[list[StudyRecord], list[UnparseableRecord]]:
    """Parse an efetch payload. Bad individual records are collected in the
    second element rather than aborting the batch."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        return [], [UnparseableRecord("", f"malformed XML: {exc}")]
    records: list[StudyRecord] = []
    errors: list[UnparseableRecord] = []
    articles = root.findall(".//PubmedArticle") if root.tag != "PubmedArticle" else [root]
    for article in articles:
        try:
            records.append(_parse_article(article))
        except UnparseableRecord as exc:
            errors.append(exc)
    return records, errors
