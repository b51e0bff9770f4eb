"""Text embeddings: remote provider or local character n-gram feature hashing."""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cache import DiskCache, content_key
from .errors import EmbeddingError, ProviderContractError, ProviderError, SchemaError, ShapeError
from .remote import OpenAIClient

DEFAULT_WIDTH = 1536
HASH_SEED = 0x5EED_CAFE_F00D_D00D  # fixed 64-bit key for n-gram hashing
NGRAM_RANGE = (3, 5)


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray
    source: str = "local_hash"
    text_key: str = ""

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    @property
    def width(self) -> int:
        return int(self.values.shape[0])


@dataclass
class EmbeddingMatrix:
    """Row ``i`` embeds text ``i``; ``provenance`` records provider, model and config."""

    values: np.ndarray
    text_keys: list[str]
    source: str
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    def row(self, i: int) -> EmbeddingVector:
        return EmbeddingVector(self.values[i], self.source, self.text_keys[i])

    @property
    def rows(self) -> list[EmbeddingVector]:
        return [self.row(i) for i in range(len(self))]


_KEY = HASH_SEED.to_bytes(8, "little")


def _ngram_hash(gram: str) -> int:
    return int.from_bytes(hashlib.blake2b(gram.encode("utf-8"), digest_size=8, key=_KEY).digest(), "little")


def local_hash_embed(text: str, width: int = DEFAULT_WIDTH) -> EmbeddingVector:
    """Signed feature hashing of character 3..5-grams, L2-normalized.

    The text is lowercased and padded with one space on each side so word
    boundaries contribute grams. Bucket = hash mod width; sign = top hash bit.
    """
    if not text:
        raise SchemaError("cannot embed empty text")
    if width < 64:
        raise SchemaError(f"width must be >= 64, got {width}")
    s = f" {text.lower()} "
    vec = np.zeros(width, dtype=np.float64)
    lo, hi = NGRAM_RANGE
    counts: dict[str, int] = {}
    for n in range(lo, hi + 1):
        for i in range(len(s) - n + 1):
            g = s[i : i + n]
            counts[g] = counts.get(g, 0) + 1
    for g, c in counts.items():
        h = _ngram_hash(g)
        sign = -1.0 if h >> 63 else 1.0
        vec[h % width] += sign * c
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        # every gram cancelled out; fall back to one bucket so the vector stays unit-norm
        vec[_ngram_hash(s) % width] = 1.0
        norm = 1.0
    return EmbeddingVector(vec / norm, "local_hash", content_key(text))


def cosine_distance(a, b) -> float:
    """``1 - a.b / (|a||b|)``, clipped to [0, 2]."""
    va = a.values if isinstance(a, EmbeddingVector) else np.asarray(a, dtype=np.float64)
    vb = b.values if isinstance(b, EmbeddingVector) else np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise ShapeError(f"width mismatch: {va.shape} vs {vb.shape}")
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise ShapeError("cosine distance undefined for a zero-norm vector")
    d = 1.0 - float(np.dot(va, vb)) / (na * nb)
    return min(max(d, 0.0), 2.0)


def cosine_distance_matrix(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0.0):
        raise ShapeError("cosine distance undefined for a zero-norm row")
    U = X / norms[:, None]
    D = 1.0 - U @ U.T
    D = np.clip((D + D.T) / 2.0, 0.0, 2.0)
    np.fill_diagonal(D, 0.0)
    return D


# --- providers ---------------------------------------------------------------

class LocalHashProvider:
    kind = "local_hash"

    def __init__(self, width: int = DEFAULT_WIDTH):
        self.width = width
        self.model_id = f"local-hash-ngram3to5-w{width}"
        self.calls = 0

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        self.calls += 1
        return [local_hash_embed(t, self.width).values for t in texts]


class RemoteEmbeddingProvider:
    kind = "remote"

    def __init__(self, client: OpenAIClient, model_id: str = "text-embedding-3-small", width: int = DEFAULT_WIDTH):
        self.client = client
        self.model_id = model_id
        self.width = width
        self.calls = 0

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        self.calls += 1
        return [np.asarray(v, dtype=np.float64) for v in self.client.embeddings(self.model_id, texts, self.width)]


def _encode(vec: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(vec, dtype="<f8").tobytes()).decode("ascii")


def _decode(blob: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(blob), dtype="<f8").astype(np.float64)


def embed_texts(texts: list[str], provider, cache: DiskCache | None, batch_size: int = 64) -> EmbeddingMatrix:
    """Embed ``texts`` in order; cache-first per text, batched calls for the misses."""
    if any(not t for t in texts):
        raise SchemaError("texts must be non-empty strings")
    keys = [content_key(provider.kind, provider.model_id, t) for t in texts]
    found: dict[str, np.ndarray] = {}
    if cache is not None:
        for k in dict.fromkeys(keys):
            rec = cache.get(k)
            if rec is not None:
                found[k] = _decode(rec["vector"])

    todo = list(dict.fromkeys(k for k in keys if k not in found))
    text_of = dict(zip(keys, texts))
    for start in range(0, len(todo), batch_size):
        batch = todo[start : start + batch_size]
        try:
            vecs = provider.embed([text_of[k] for k in batch])
        except ProviderError as exc:
            idx = [i for i, k in enumerate(keys) if k in set(batch)]
            raise EmbeddingError(f"embedding batch failed: {exc}", idx) from exc
        if len(vecs) != len(batch):
            raise ProviderContractError(f"provider returned {len(vecs)} vectors for {len(batch)} texts")
        for k, v in zip(batch, vecs):
            v = np.asarray(v, dtype=np.float64)
            found[k] = v
            if cache is not None:
                cache.put(k, {"model": provider.model_id, "provider": provider.kind, "vector": _encode(v)})

    widths = {found[k].shape[0] for k in keys}
    if len(widths) > 1:
        raise ProviderContractError(f"inconsistent embedding widths {sorted(widths)}")
    width = widths.pop() if widths else getattr(provider, "width", DEFAULT_WIDTH)
    values = np.array([found[k] for k in keys], dtype=np.float64).reshape(len(keys), width)
    return EmbeddingMatrix(
        values,
        [content_key(t) for t in texts],
        provider.kind,
        {"provider": provider.kind, "model_id": provider.model_id, "width": width},
    )


# --- persistence -------------------------------------------------------------

_DTYPE_NAMES = {"<f4": "float32-le", "<f8": "float64-le"}


def save_matrix(values: np.ndarray, bin_path: str | Path, manifest: dict, dtype: str = "<f4") -> dict:
    """Row-major little-endian sidecar (float32 unless ``dtype="<f8"``) plus ``<bin>.json`` manifest."""
    bin_path = Path(bin_path)
    arr = np.ascontiguousarray(values, dtype=dtype)
    data = arr.tobytes()
    bin_path.write_bytes(data)
    man = {
        "rows": int(arr.shape[0]),
        "width": int(arr.shape[1]) if arr.ndim == 2 else 0,
        "dtype": _DTYPE_NAMES[dtype],
        "sha256": hashlib.sha256(data).hexdigest(),
        **manifest,
    }
    bin_path.with_suffix(".json").write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")
    return man


def load_matrix(bin_path: str | Path) -> tuple[np.ndarray, dict]:
    bin_path = Path(bin_path)
    man = json.loads(bin_path.with_suffix(".json").read_text())
    dt = {v: k for k, v in _DTYPE_NAMES.items()}[man.get("dtype", "float32-le")]
    arr = np.frombuffer(bin_path.read_bytes(), dtype=dt).astype(np.float64)
    return arr.reshape(man["rows"], man["width"]), man
