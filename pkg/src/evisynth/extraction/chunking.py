"""Deterministic document chunking with stable, citable chunk ids.

The chunker normalizes a document into an ordered list of paragraphs
(whitespace collapsed, sections tracked for XML), splits any paragraph
longer than the policy limit at word boundaries, then greedily packs
consecutive same-section paragraphs into chunks of at most
``max_chunk_chars``. Chunk ids are c0001, c0002, ... in source order, so
re-chunking identical bytes always reproduces identical ids and
boundaries.

Losslessness: "\\n\\n".join(chunk texts) equals "\\n\\n".join(normalized
paragraphs) — nothing is dropped or reordered, only whitespace is
canonicalized.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from ..core import is_chunk_id, make_chunk_id
from ..errors import EviSynthError

DEFAULT_MAX_CHUNK_CHARS = 1200


class EmptyDocument(EviSynthError):
    code = "empty_document"


class InvalidChunking(EviSynthError):
    code = "invalid_chunking"


@dataclass(frozen=True)
class ChunkPolicy:
    max_chunk_chars: int = DEFAULT_MAX_CHUNK_CHARS

    def __post_init__(self):
        if self.max_chunk_chars < 50:
            raise ValueError("max_chunk_chars must be at least 50")


@dataclass(frozen=True)
class Chunk:
    id: str
    section_path: str
    text: str

    def __post_init__(self):
        if not is_chunk_id(self.id):
            raise InvalidChunking(f"bad chunk id {self.id!r}")
        if not self.text:
            raise InvalidChunking(f"chunk {self.id} is empty")

    def to_dict(self) -> dict:
        return {"id": self.id, "section_path": self.section_path, "text": self.text}

    @classmethod
    def from_dict(cls, data: dict) -> Chunk:
        return cls(id=data["id"], section_path=data.get("section_path", ""), text=data["text"])


@dataclass(frozen=True)
class ChunkedDocument:
    pmid: str
    chunks: tuple[Chunk, ...]
    _by_id: dict = field(default=None, repr=False, compare=False)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "chunks", tuple(self.chunks))
        for i, chunk in enumerate(self.chunks, start=1):
            if chunk.id != make_chunk_id(i):
                raise InvalidChunking(
                    f"chunk ids must be sequential: position {i} has {chunk.id!r}"
                )
        object.__setattr__(self, "_by_id", {c.id: c for c in self.chunks})

    def get(self, chunk_id: str) -> Chunk | None:
        return self._by_id.get(chunk_id)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._by_id

    @property
    def chunk_ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.chunks)

    def to_dict(self) -> dict:
        return {"pmid": self.pmid, "chunks": [c.to_dict() for c in self.chunks]}

    @classmethod
    def from_dict(cls, data: dict) -> ChunkedDocument:
        return cls(
            pmid=data["pmid"], chunks=tuple(Chunk.from_dict(c) for c in data["chunks"])
        )


def _collapse(text: str) -> str:
    return " ".join(text.split())


def _split_long(text: str, limit: int) -> list[str]:
    """Split one over-long collapsed paragraph at word boundaries."""
    pieces: list[str] = []
    while len(text) > limit:
        cut = text.rfind(" ", 1, limit + 1)
        if cut <= 0:
            cut = limit  # one giant token; hard cut
        pieces.append(text[:cut].rstrip())
        text = text[cut:].lstrip()
    if text:
        pieces.append(text)
    return pieces


def _paragraphs_from_text(content: str) -> list[tuple[str, str]]:
    out = []
    for block in re.split(r"\n\s*\n", content):
        text = _collapse(block)
        if text:
            out.append(("", text))
    return out


def _walk_section(element: ET.Element, path: tuple[str, ...], out: list[tuple[str, str]]):
    if element.tag == "sec":
        title_el = element.find("title")
        name = _collapse("".join(title_el.itertext())) if title_el is not None else "Section"
        path = path + (name,)
    for child in element:
        if child.tag == "title":
            continue
        if child.tag == "sec":
            _walk_section(child, path, out)
        elif child.tag == "p":
            text = _collapse("".join(child.itertext()))
            if text:
                out.append(("/".join(path), text))
        else:
            for p in child.iter("p"):
                text = _collapse("".join(p.itertext()))
                if text:
                    out.append(("/".join(path), text))


def _paragraphs_from_xml_root(root: ET.Element) -> list[tuple[str, str]]:
    out: list[tuple[str, str]] = []
    for abstract in root.iter("abstract"):
        _walk_section(abstract, ("Abstract",), out)
    for body in root.iter("body"):
        _walk_section(body, (), out)
    if not out:
        # No abstract/body structure; take any paragraph, else all text.
        for p in root.iter("p"):
            text = _collapse("".join(p.itertext()))
            if text:
                out.append(("", text))
    if not out:
        text = _collapse("".join(root.itertext()))
        if text:
            out.append(("", text))
    return out


def _load_paragraphs(content: str, fmt: str) -> tuple[list[tuple[str, str]], bool]:
    """Paragraph list plus whether sections should be packed (XML only)."""
    if fmt == "xml":
        try:
            root = ET.fromstring(content)
        except ET.ParseError:
            # Advertised as XML but not well-formed: degrade to the
            # plain-text path rather than losing the document.
            return _paragraphs_from_text(content), False
        return _paragraphs_from_xml_root(root), True
    if fmt in ("text", "pdf-extracted-text"):
        return _paragraphs_from_text(content), False
    raise ValueError(f"unknown document format {fmt!r}")


def normalize_document(
    content: str, fmt: str, policy: ChunkPolicy | None = None
) -> list[tuple[str, str]]:
    """(section_path, paragraph) pairs after whitespace collapse and
    oversize splitting — exactly the text the chunker is allowed to emit."""
    policy = policy or ChunkPolicy()
    paragraphs, _ = _load_paragraphs(content, fmt)
    out: list[tuple[str, str]] = []
    for section, text in paragraphs:
        if len(text) > policy.max_chunk_chars:
            out.extend((section, piece) for piece in _split_long(text, policy.max_chunk_chars))
        else:
            out.append((section, text))
    return out


def chunk_document(
    pmid: str, content: str, fmt: str = "text", policy: ChunkPolicy | None = None
) -> ChunkedDocument:
    """Chunk raw document content. Pure function of its inputs.

    Plain text yields one chunk per paragraph. XML yields one chunk per
    section when the section fits the limit, otherwise the section is
    split at paragraph boundaries.
    """
    policy = policy or ChunkPolicy()
    if not content or not content.strip():
        raise EmptyDocument(f"no content to chunk for {pmid}")
    raw_paragraphs, pack = _load_paragraphs(content, fmt)
    paragraphs: list[tuple[str, str]] = []
    for section, text in raw_paragraphs:
        if len(text) > policy.max_chunk_chars:
            paragraphs.extend(
                (section, piece) for piece in _split_long(text, policy.max_chunk_chars)
            )
        else:
            paragraphs.append((section, text))
    if not paragraphs:
        raise EmptyDocument(f"document for {pmid} normalized to nothing")

    chunks: list[Chunk] = []

    def emit(section: str, texts: list[str]):
        chunks.append(
            Chunk(
                id=make_chunk_id(len(chunks) + 1),
                section_path=section,
                text="\n\n".join(texts),
            )
        )

    if not pack:
        for section, text in paragraphs:
            emit(section, [text])
        return ChunkedDocument(pmid=pmid, chunks=tuple(chunks))

    group: list[str] = []
    group_section = ""
    for section, text in paragraphs:
        grown = len("\n\n".join(group + [text]))
        if group and (section != group_section or grown > policy.max_chunk_chars):
            emit(group_section, group)
            group = []
        group_section = section
        group.append(text)
    if group:
        emit(group_section, group)
    return ChunkedDocument(pmid=pmid, chunks=tuple(chunks))
