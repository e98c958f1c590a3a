"""Guidance knowledge base: chunking, embedding, exact dense retrieval, persistence.

The index is deliberately exact (brute-force cosine over every stored vector):
the guidance corpus is small and curated, and exactness keeps retrieval
reproducible and testable. Vectors come either from the deterministic
token-hash embedder below (offline mode) or from a provider embedder
injected by the caller.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

INDEX_FORMAT_VERSION = 1
DEFAULT_CHUNK_SIZE = 800
DEFAULT_OVERLAP = 200
DEFAULT_TOP_K = 4
STUB_EMBED_DIM = 64

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF

# Batch embedder signature shared by stub and provider-backed callables.
Embedder = Callable[[Sequence[str]], list[list[float]]]


class InvalidParams(ValueError):
    """Chunking parameters out of range (chunk_size must exceed overlap)."""


class DimMismatch(ValueError):
    """Vector dimension differs from the index dimension."""


class FormatError(ValueError):
    """Index file has a bad version or malformed entries."""


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _U64
    return h


@dataclass(frozen=True)
class Document:
    """One guidance document; id is a content hash so re-ingest is idempotent."""

    id: str
    source: str
    title: str
    body: str
    tags: tuple[str, ...] = ()

    @classmethod
    def from_text(cls, source: str, title: str, body: str,
                  tags: Iterable[str] = ()) -> "Document":
        if not body:
            raise ValueError("document body must be non-empty")
        doc_id = format(fnv1a_64(body.encode("utf-8")), "016x")
        return cls(id=doc_id, source=source, title=title, body=body,
                   tags=tuple(tags))


@dataclass(frozen=True)
class Chunk:
    id: str
    doc_id: str
    ordinal: int
    text: str
    span: tuple[int, int]


@dataclass(frozen=True)
class RetrievalResult:
    chunk_id: str
    score: float
    chunk_text: str


@dataclass
class IngestReport:
    docs: int = 0
    chunks: int = 0
    dim: int = 0
    skipped: list[str] = field(default_factory=list)


def chunk_text(body: str, chunk_size: int = DEFAULT_CHUNK_SIZE,
               overlap: int = DEFAULT_OVERLAP) -> list[tuple[int, int]]:
    """Split ``body`` into half-open character spans.

    Spans stride by ``chunk_size - overlap`` so consecutive spans share
    exactly ``overlap`` characters; the final span ends at ``len(body)``.
    Offsets count Unicode scalar values, not bytes.
    """
    if overlap < 0 or chunk_size <= overlap:
        raise InvalidParams(
            f"chunk_size ({chunk_size}) must be greater than overlap ({overlap})"
        )
    if not body:
        raise ValueError("body must be non-empty")

    stride = chunk_size - overlap
    spans: list[tuple[int, int]] = []
    start = 0
    while True:
        end = min(start + chunk_size, len(body))
        spans.append((start, end))
        if end >= len(body):
            return spans
        start += stride


def chunk_document(doc: Document, chunk_size: int = DEFAULT_CHUNK_SIZE,
                   overlap: int = DEFAULT_OVERLAP) -> list[Chunk]:
    return [
        Chunk(id=f"{doc.id}:{ordinal}", doc_id=doc.id, ordinal=ordinal,
              text=doc.body[start:end], span=(start, end))
        for ordinal, (start, end) in enumerate(chunk_text(doc.body, chunk_size, overlap))
    ]


def stub_embed_text(text: str, dim: int = STUB_EMBED_DIM) -> list[float]:
    """Deterministic token-hash embedding for offline use.

    Tokens are lowercased whitespace splits; each token bumps the component
    at ``fnv1a_64(token) % dim`` and the result is L2-normalized. Text with
    no tokens maps to the first basis vector.
    """
    counts = [0.0] * dim
    tokens = text.lower().split()
    if not tokens:
        counts[0] = 1.0
        return counts
    for token in tokens:
        counts[fnv1a_64(token.encode("utf-8")) % dim] += 1.0
    norm = math.sqrt(sum(c * c for c in counts))
    return [c / norm for c in counts]


def stub_embedder(texts: Sequence[str]) -> list[list[float]]:
    """Batch adapter around :func:`stub_embed_text`."""
    return [stub_embed_text(t) for t in texts]


@dataclass(frozen=True)
class IndexEntry:
    chunk_id: str
    doc_id: str
    span: tuple[int, int]
    text: str
    vector: tuple[float, ...]


class VectorIndex:
    """Exact dense-retrieval index over chunk embeddings.

    Many readers may search concurrently; upserts take the writer lock so a
    search observes either the pre- or post-ingest state, never a partial one.
    """

    def __init__(self, embedder: Embedder | None = None):
        self._embedder: Embedder = embedder or stub_embedder
        self._entries: dict[str, IndexEntry] = {}
        self._dim: int | None = None
        self._lock = threading.RLock()

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def dim(self) -> int | None:
        return self._dim

    def entries(self) -> list[IndexEntry]:
        """Snapshot of entries in canonical (chunk_id) order."""
        with self._lock:
            return sorted(self._entries.values(), key=lambda e: e.chunk_id)

    def add(self, chunk_id: str, doc_id: str, span: tuple[int, int],
            text: str, vector: Sequence[float]) -> None:
        vec = tuple(float(v) for v in vector)
        with self._lock:
            if self._dim is None:
                self._dim = len(vec)
            elif len(vec) != self._dim:
                raise DimMismatch(
                    f"vector dim {len(vec)} != index dim {self._dim}"
                )
            self._entries[chunk_id] = IndexEntry(
                chunk_id=chunk_id, doc_id=doc_id, span=(span[0], span[1]),
                text=text, vector=vec,
            )

    def remove_document(self, doc_id: str) -> int:
        with self._lock:
            stale = [cid for cid, e in self._entries.items() if e.doc_id == doc_id]
            for cid in stale:
                del self._entries[cid]
            return len(stale)

    def upsert_document(self, doc: Document, chunks: Sequence[Chunk],
                        vectors: Sequence[Sequence[float]]) -> None:
        """Replace any previous entries for ``doc`` with the given chunks."""
        if len(chunks) != len(vectors):
            raise ValueError("one vector per chunk required")
        with self._lock:
            self.remove_document(doc.id)
            for chunk, vector in zip(chunks, vectors):
                self.add(chunk.id, chunk.doc_id, chunk.span, chunk.text, vector)

    def embed_query(self, query: str) -> list[float]:
        return self._embedder([query])[0]

    def search(self, query_vector: Sequence[float], k: int = DEFAULT_TOP_K
               ) -> list[RetrievalResult]:
        """Exact cosine top-k, ties broken by chunk_id ascending.

        Scores are compared at 1e-9 granularity so that mathematically equal
        similarities computed along different float paths still tie
        deterministically.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        with self._lock:
            entries = sorted(self._entries.values(), key=lambda e: e.chunk_id)
        if not entries:
            return []

        q = np.asarray(query_vector, dtype=np.float64)
        if self._dim is not None and q.shape[0] != self._dim:
            raise DimMismatch(f"query dim {q.shape[0]} != index dim {self._dim}")
        matrix = np.asarray([e.vector for e in entries], dtype=np.float64)
        qnorm = float(np.linalg.norm(q))
        vnorms = np.linalg.norm(matrix, axis=1)
        dots = matrix @ q
        scores: list[float] = []
        for dot, vnorm in zip(dots, vnorms):
            denom = qnorm * float(vnorm)
            raw = float(dot) / denom if denom > 0.0 else 0.0
            scores.append(max(-1.0, min(1.0, raw)))

        ranked = sorted(zip(entries, scores),
                        key=lambda es: (-round(es[1], 9), es[0].chunk_id))
        return [
            RetrievalResult(chunk_id=e.chunk_id, score=s, chunk_text=e.text)
            for e, s in ranked[:k]
        ]


def search_top_k(index: VectorIndex, query: str, k: int = DEFAULT_TOP_K
                 ) -> list[RetrievalResult]:
    """Embed ``query`` with the index's embedder and return the top-k chunks."""
    if len(index) == 0:
        return []
    return index.search(index.embed_query(query), k)


def save_index(index: VectorIndex, path: str | Path) -> None:
    """Write the index as a single versioned JSON document (canonical order)."""
    payload = {
        "format_version": INDEX_FORMAT_VERSION,
        "dim": index.dim or 0,
        "entries": [
            {
                "chunk_id": e.chunk_id,
                "doc_id": e.doc_id,
                "span": [e.span[0], e.span[1]],
                "text": e.text,
                "vector": list(e.vector),
            }
            for e in index.entries()
        ],
    }
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, separators=(",", ":"), sort_keys=True),
        encoding="utf-8",
    )


def load_index(path: str | Path, embedder: Embedder | None = None) -> VectorIndex:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"index file is not valid JSON: {exc}") from exc

    if not isinstance(payload, dict):
        raise FormatError("index file must contain a JSON object")
    if payload.get("format_version") != INDEX_FORMAT_VERSION:
        raise FormatError(
            f"unsupported index format_version {payload.get('format_version')!r}"
        )
    entries = payload.get("entries")
    if not isinstance(entries, list):
        raise FormatError("index entries must be a list")

    index = VectorIndex(embedder=embedder)
    seen: set[str] = set()
    for raw in entries:
        try:
            chunk_id = raw["chunk_id"]
            if chunk_id in seen:
                raise FormatError(f"duplicate chunk_id {chunk_id!r}")
            seen.add(chunk_id)
            index.add(chunk_id, raw["doc_id"],
                      (int(raw["span"][0]), int(raw["span"][1])),
                      raw["text"], raw["vector"])
        except FormatError:
            raise
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise FormatError(f"malformed index entry: {exc}") from exc
    declared_dim = payload.get("dim")
    if entries and declared_dim != index.dim:
        raise FormatError(
            f"declared dim {declared_dim!r} does not match vectors ({index.dim})"
        )
    return index


def read_corpus_file(path: Path) -> Document:
    """Parse one corpus file: file name is the title, optional ``tags:`` first line."""
    body = path.read_text(encoding="utf-8")
    tags: tuple[str, ...] = ()
    first_line, sep, rest = body.partition("\n")
    if first_line.lower().startswith("tags:"):
        tags = tuple(
            t.strip() for t in first_line[len("tags:"):].split(",") if t.strip()
        )
        body = rest if sep else ""
    if not body:
        raise ValueError(f"{path.name}: empty body")
    return Document.from_text(source=str(path), title=path.stem, body=body, tags=tags)


def ingest(corpus_dir: str | Path, embedder: Embedder, index: VectorIndex,
           chunk_size: int = DEFAULT_CHUNK_SIZE,
           overlap: int = DEFAULT_OVERLAP) -> IngestReport:
    """Chunk, embed, and upsert every ``.txt``/``.md`` file under ``corpus_dir``.

    Unreadable files are skipped and reported rather than aborting the run.
    Re-ingesting an unchanged file replaces its chunks (same doc id).
    """
    corpus = Path(corpus_dir)
    if not corpus.is_dir():
        raise NotADirectoryError(f"corpus directory not found: {corpus}")

    report = IngestReport()
    paths = sorted(p for p in corpus.rglob("*") if p.suffix in (".txt", ".md"))
    for path in paths:
        try:
            doc = read_corpus_file(path)
        except (OSError, UnicodeDecodeError, ValueError) as exc:
            report.skipped.append(f"{path.name}: {exc}")
            continue
        chunks = chunk_document(doc, chunk_size, overlap)
        vectors = embedder([c.text for c in chunks])
        index.upsert_document(doc, chunks, vectors)
        report.docs += 1
        report.chunks += len(chunks)
    report.dim = index.dim or 0
    return report
