"""Exact dense similarity search over chunk embeddings.

The index is an exhaustive-scan cosine searcher over pre-normalized
float32 vectors (similarity = dot product). Exactness is part of the
contract: results must equal a brute-force scan, including tie order
(ties sort by ascending (doc_id, chunk_index)).

On-disk format, all little-endian:

    magic     8 bytes  b"QRAGIDX1"
    version   u32      1
    dimension u32
    count     u64
    entries   count ×ᅟ[key_len u32][key utf-8 "doc_id#chunk_index"][dimension × f32]

Round-trips are bitwise: load(save(x)) preserves entry order and float bits.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import ChunkKey
from .errors import CorruptIndexError, DimensionError, DuplicateChunkError
from .gateway import EmbeddingVector

MAGIC = b"QRAGIDX1"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class SearchHit:
    key: ChunkKey
    similarity: float


def _as_query_array(vector: EmbeddingVector | np.ndarray) -> np.ndarray:
    if isinstance(vector, EmbeddingVector):
        return vector.values
    return np.asarray(vector, dtype=np.float32)


class VectorIndex:
    """In-memory vector store with exact top-k search.

    Concurrency contract: many concurrent readers or one writer; ``save``
    requires no concurrent writer.
    """

    def __init__(self, dimension: int):
        if dimension < 1:
            raise DimensionError(f"dimension error: must be >= 1, got {dimension}")
        self._dimension = dimension
        self._keys: list[ChunkKey] = []
        self._positions: dict[ChunkKey, int] = {}
        self._rows: list[np.ndarray] = []
        self._matrix: np.ndarray | None = None  # float64 cache for search

    @property
    def dimension(self) -> int:
        return self._dimension

    def __len__(self) -> int:
        return len(self._keys)

    def keys(self) -> list[ChunkKey]:
        return list(self._keys)

    def vector(self, key: ChunkKey) -> np.ndarray:
        return self._rows[self._positions[key]]

    def add(self, key: ChunkKey, vector: EmbeddingVector | np.ndarray) -> None:
        arr = _as_query_array(vector)
        if arr.shape != (self._dimension,):
            raise DimensionError(
                f"dimension error: expected {self._dimension}, got {arr.shape}"
            )
        if key in self._positions:
            raise DuplicateChunkError(f"duplicate chunk: {key[0]}#{key[1]}")
        self._positions[key] = len(self._keys)
        self._keys.append(key)
        self._rows.append(arr.astype(np.float32, copy=True))
        self._matrix = None

    def _similarity_matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.vstack(self._rows).astype(np.float64)
        return self._matrix

    def search_top_k(self, query: EmbeddingVector | np.ndarray, k: int) -> list[SearchHit]:
        """Return the ``min(k, size)`` most similar entries.

        Exhaustive exact search: similarities for all entries are computed,
        then the top slice is selected with boundary-tie expansion so that
        equal similarities are ordered by ascending chunk key.
        """
        arr = _as_query_array(query)
        if arr.shape != (self._dimension,):
            raise DimensionError(
                f"dimension error: query has shape {arr.shape}, index is {self._dimension}"
            )
        if k < 0:
            raise ValueError(f"k must be >= 0, got {k}")
        if k == 0 or not self._keys:
            return []

        sims = self._similarity_matrix() @ arr.astype(np.float64)
        k_eff = min(k, len(self._keys))

        # Select candidates at or above the k-th largest similarity, then
        # order that (usually tiny) slice with the deterministic tie rule.
        boundary = np.partition(sims, len(sims) - k_eff)[len(sims) - k_eff]
        candidates = np.flatnonzero(sims >= boundary).tolist()
        candidates.sort(key=lambda i: (-sims[i], self._keys[i]))
        return [
            SearchHit(key=self._keys[i], similarity=_clamp(float(sims[i])))
            for i in candidates[:k_eff]
        ]

    # --- persistence --------------------------------------------------------

    def save(self, path: Path | str) -> None:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", FORMAT_VERSION))
            fh.write(struct.pack("<I", self._dimension))
            fh.write(struct.pack("<Q", len(self._keys)))
            for key, row in zip(self._keys, self._rows):
                encoded = f"{key[0]}#{key[1]}".encode("utf-8")
                fh.write(struct.pack("<I", len(encoded)))
                fh.write(encoded)
                fh.write(row.astype("<f4").tobytes())

    @classmethod
    def load(cls, path: Path | str) -> "VectorIndex":
        with open(path, "rb") as fh:
            data = fh.read()
        view = memoryview(data)
        offset = 0

        def take(n: int) -> memoryview:
            nonlocal offset
            if offset + n > len(view):
                raise CorruptIndexError(f"corrupt index: truncated file {path}")
            piece = view[offset : offset + n]
            offset += n
            return piece

        if bytes(take(len(MAGIC))) != MAGIC:
            raise CorruptIndexError(f"corrupt index: bad magic in {path}")
        (version,) = struct.unpack("<I", take(4))
        if version != FORMAT_VERSION:
            raise CorruptIndexError(f"corrupt index: unsupported version {version}")
        (dimension,) = struct.unpack("<I", take(4))
        if dimension == 0:
            raise CorruptIndexError(f"corrupt index: zero dimension in {path}")
        (count,) = struct.unpack("<Q", take(8))

        index = cls(dimension)
        for _ in range(count):
            (key_len,) = struct.unpack("<I", take(4))
            try:
                encoded = bytes(take(key_len)).decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CorruptIndexError(f"corrupt index: bad key bytes in {path}") from exc
            doc_id, _, idx_part = encoded.rpartition("#")
            if not doc_id:
                raise CorruptIndexError(f"corrupt index: malformed key {encoded!r}")
            try:
                chunk_index = int(idx_part)
            except ValueError as exc:
                raise CorruptIndexError(f"corrupt index: malformed key {encoded!r}") from exc
            vec = np.frombuffer(take(dimension * 4), dtype="<f4").copy()
            index.add((doc_id, chunk_index), vec)
        if offset != len(view):
            raise CorruptIndexError(f"corrupt index: {len(view) - offset} trailing bytes")
        return index


def _clamp(similarity: float) -> float:
    # float32 dot products of unit vectors can stray past ±1 by rounding.
    return max(-1.0, min(1.0, similarity))
