"""Guideline corpus loading and overlapping character chunking.

Documents are ingested from pre-extracted UTF-8 text (plain text or
markdown, treated verbatim) and split into fixed-size character chunks
with a configured overlap. Offsets count Unicode scalar values, never
bytes, so multi-byte characters are never split.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from .errors import (
    EmptyCorpusError,
    EmptyDocumentError,
    EncodingError,
    InvalidChunkingConfigError,
)

#: File suffixes picked up by directory ingest.
INGESTIBLE_SUFFIXES = (".txt", ".md")

#: A chunk's identity: (doc_id, chunk_index).
ChunkKey = tuple[str, int]


@dataclass(frozen=True)
class ChunkingConfig:
    """Chunk size and overlap, both in Unicode scalar values."""

    chunk_size: int = 10_000
    overlap: int = 2_000

    def __post_init__(self):
        if self.chunk_size <= 0:
            raise InvalidChunkingConfigError(
                f"invalid chunking config: chunk_size must be positive, got {self.chunk_size}"
            )
        if not 0 <= self.overlap < self.chunk_size:
            raise InvalidChunkingConfigError(
                f"invalid chunking config: overlap must satisfy 0 <= overlap < chunk_size, "
                f"got overlap={self.overlap} chunk_size={self.chunk_size}"
            )

    @property
    def step(self) -> int:
        return self.chunk_size - self.overlap


@dataclass(frozen=True)
class Document:
    """A source document with a stable content-derived identifier."""

    doc_id: str
    source_tag: str
    title: str
    text: str


@dataclass(frozen=True)
class Chunk:
    """A contiguous span of a document's text.

    ``char_start``/``char_end`` form a half-open interval in Unicode
    scalar values into the parent document's text.
    """

    doc_id: str
    chunk_index: int
    text: str
    char_start: int
    char_end: int

    @property
    def key(self) -> ChunkKey:
        return (self.doc_id, self.chunk_index)


@dataclass(frozen=True)
class ManifestEntry:
    doc_id: str
    source_tag: str
    title: str
    chunk_count: int


@dataclass(frozen=True)
class CorpusManifest:
    """Summary of an ingested corpus.

    ``embedding_dimension`` is 0 until the chunks have been embedded;
    the indexing step fills it in before the manifest is persisted.
    """

    documents: tuple[ManifestEntry, ...]
    embedding_dimension: int = 0
    created_at: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat()
    )

    def with_dimension(self, dimension: int) -> "CorpusManifest":
        return replace(self, embedding_dimension=dimension)

    def to_json(self) -> str:
        payload = {
            "documents": [
                {
                    "doc_id": e.doc_id,
                    "source_tag": e.source_tag,
                    "title": e.title,
                    "chunk_count": e.chunk_count,
                }
                for e in self.documents
            ],
            "embedding_dimension": self.embedding_dimension,
            "created_at": self.created_at,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, raw: str) -> "CorpusManifest":
        payload = json.loads(raw)
        entries = tuple(
            ManifestEntry(
                doc_id=d["doc_id"],
                source_tag=d["source_tag"],
                title=d["title"],
                chunk_count=d["chunk_count"],
            )
            for d in payload["documents"]
        )
        return cls(
            documents=entries,
            embedding_dimension=payload["embedding_dimension"],
            created_at=payload["created_at"],
        )


def chunk_text(text: str, config: ChunkingConfig) -> list[tuple[int, int]]:
    """Compute overlapping chunk spans for ``text``.

    Spans start at 0, step, 2*step, ... where ``step = chunk_size - overlap``.
    Each span covers ``chunk_size`` characters except the final one, which is
    clamped to the end of the text: as soon as ``start + chunk_size`` reaches
    or passes the text length, the span ``[start, len)`` is emitted and
    generation stops. Every character is covered by at least one span.
    """
    if not text:
        raise EmptyDocumentError("empty document")
    if config.overlap >= config.chunk_size or config.chunk_size <= 0:
        raise InvalidChunkingConfigError("invalid chunking config")

    spans: list[tuple[int, int]] = []
    start = 0
    length = len(text)
    while True:
        if start + config.chunk_size >= length:
            spans.append((start, length))
            break
        spans.append((start, start + config.chunk_size))
        start += config.step
    return spans


def _derive_doc_id(text: str) -> str:
    # Content hash, not filename: identity survives file moves/renames.
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def ingest_document(
    raw: bytes,
    source_tag: str,
    config: ChunkingConfig,
    *,
    name: str = "<memory>",
    title: str | None = None,
) -> tuple[Document, list[Chunk]]:
    """Decode raw file content and split it into chunks.

    The document id is derived from a hash of the decoded text, so
    re-ingesting identical content always yields the same id.
    """
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError(f"encoding error in {name}: {exc}") from exc
    if not text:
        raise EmptyDocumentError(f"empty document: {name}")

    doc = Document(
        doc_id=_derive_doc_id(text),
        source_tag=source_tag,
        title=title if title is not None else Path(name).stem,
        text=text,
    )
    chunks = [
        Chunk(
            doc_id=doc.doc_id,
            chunk_index=i,
            text=text[start:end],
            char_start=start,
            char_end=end,
        )
        for i, (start, end) in enumerate(chunk_text(text, config))
    ]
    return doc, chunks


@dataclass(frozen=True)
class IngestError:
    """A per-file failure collected during corpus ingest."""

    path: str
    message: str


@dataclass
class CorpusIngestResult:
    manifest: CorpusManifest
    documents: list[Document]
    chunks: list[Chunk]
    errors: list[IngestError]


def ingest_corpus(
    directory: Path | str,
    config: ChunkingConfig,
    *,
    source_tag: str | None = None,
) -> CorpusIngestResult:
    """Ingest every .txt/.md file under ``directory``.

    Files are processed in lexicographic order of their path relative to
    ``directory``, so repeated runs over an unchanged tree produce the
    same manifest (modulo ``created_at``). Per-file failures are collected
    in the result instead of aborting the whole ingest.
    """
    root = Path(directory)
    if not root.is_dir():
        raise EmptyCorpusError(f"empty corpus: {root} is not a directory")
    tag = source_tag if source_tag is not None else root.name

    files = sorted(
        (p for p in root.rglob("*") if p.is_file() and p.suffix in INGESTIBLE_SUFFIXES),
        key=lambda p: p.relative_to(root).as_posix(),
    )
    if not files:
        raise EmptyCorpusError(f"empty corpus: no ingestible files in {root}")

    documents: list[Document] = []
    chunks: list[Chunk] = []
    errors: list[IngestError] = []
    seen_ids: set[str] = set()
    entries: list[ManifestEntry] = []

    for path in files:
        rel = path.relative_to(root).as_posix()
        try:
            doc, doc_chunks = ingest_document(
                path.read_bytes(), tag, config, name=rel
            )
        except (EncodingError, EmptyDocumentError) as exc:
            errors.append(IngestError(path=rel, message=str(exc)))
            continue
        if doc.doc_id in seen_ids:
            errors.append(
                IngestError(path=rel, message=f"duplicate document content: {rel}")
            )
            continue
        seen_ids.add(doc.doc_id)
        documents.append(doc)
        chunks.extend(doc_chunks)
        entries.append(
            ManifestEntry(
                doc_id=doc.doc_id,
                source_tag=doc.source_tag,
                title=doc.title,
                chunk_count=len(doc_chunks),
            )
        )

    if not documents:
        raise EmptyCorpusError(
            f"empty corpus: all {len(files)} files failed to ingest"
        )
    return CorpusIngestResult(
        manifest=CorpusManifest(documents=tuple(entries)),
        documents=documents,
        chunks=chunks,
        errors=errors,
    )


class ChunkStore:
    """Chunk texts addressable by (doc_id, chunk_index).

    The vector index stores only keys and embeddings; this store resolves
    keys back to text for reranking, prompting and display.
    """

    def __init__(self, chunks: list[Chunk] | None = None):
        self._chunks: dict[ChunkKey, Chunk] = {}
        for chunk in chunks or []:
            self.add(chunk)

    def add(self, chunk: Chunk) -> None:
        if chunk.key in self._chunks:
            raise DuplicateChunkKeyError(chunk.key)
        self._chunks[chunk.key] = chunk

    def get(self, key: ChunkKey) -> Chunk:
        return self._chunks[key]

    def __len__(self) -> int:
        return len(self._chunks)

    def __contains__(self, key: ChunkKey) -> bool:
        return key in self._chunks

    def keys(self) -> list[ChunkKey]:
        return list(self._chunks)

    def save(self, path: Path | str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for chunk in self._chunks.values():
                fh.write(
                    json.dumps(
                        {
                            "doc_id": chunk.doc_id,
                            "chunk_index": chunk.chunk_index,
                            "text": chunk.text,
                            "char_start": chunk.char_start,
                            "char_end": chunk.char_end,
                        },
                        sort_keys=True,
                        ensure_ascii=False,
                    )
                    + "\n"
                )

    @classmethod
    def load(cls, path: Path | str) -> "ChunkStore":
        store = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                store.add(
                    Chunk(
                        doc_id=row["doc_id"],
                        chunk_index=row["chunk_index"],
                        text=row["text"],
                        char_start=row["char_start"],
                        char_end=row["char_end"],
                    )
                )
        return store


class DuplicateChunkKeyError(KeyError):
    """A chunk key was added to a store twice."""
