"""Deterministic tokenization, n-grams, feature hashing, and sample embeddings.

The tokenizer is a self-contained Unicode segmenter: maximal runs of
letters/digits, with a character fallback for delimiter-free scripts.
Records may carry a precomputed ``tokens`` list that overrides it.

Embeddings come from one of two providers: ``external-file`` loads
precomputed vectors from a line-delimited JSON file (keys ``id`` and
``vector``), ``builtin-hash`` computes deterministic hashed n-gram
vectors so the embedding-based metrics remain usable offline.
"""

from __future__ import annotations

import json
import math
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._hash import bucket_and_sign, hash_term
from .corpus import Dataset, DatasetError, Sample, normalize_text

TokenSequence = tuple[str, ...]

_WORD_RUN = re.compile(r"[^\W_]+", re.UNICODE)

PROVIDERS = ("external-file", "builtin-hash")


@dataclass(frozen=True)
class EmbeddingConfig:
    provider: str = "builtin-hash"
    dim: int = 256
    path: str | Path | None = None

    def __post_init__(self):
        if self.provider not in PROVIDERS:
            raise DatasetError(f"unknown embedding provider {self.provider!r}")
        if self.dim <= 0:
            raise DatasetError("embedding dim must be positive")


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """Per-sample vectors of a fixed dimension, keyed by sample id."""

    dim: int
    vectors: dict[str, np.ndarray]
    provider: str

    def __getitem__(self, sample_id: str) -> np.ndarray:
        return self.vectors[sample_id]


def tokenize(text: str) -> TokenSequence:
    """Split normalized text into tokens.

    Maximal runs of letters/digits become tokens. If the text has no
    whitespace and consists purely of letters (scripts written without
    word delimiters), each character becomes its own token.
    """
    if not text:
        return ()
    if not any(ch.isspace() for ch in text) and all(
        unicodedata.category(ch)[0] == "L" for ch in text
    ):
        return tuple(text)
    return tuple(_WORD_RUN.findall(text))


def bigrams(tokens: TokenSequence) -> list[tuple[str, str]]:
    """All adjacent token pairs, in order."""
    return [(tokens[i], tokens[i + 1]) for i in range(len(tokens) - 1)]


def sample_tokens(sample: Sample) -> TokenSequence:
    """Tokens for a sample: its pre-tokenized list if present, otherwise
    the built-in tokenizer applied to its normalized text."""
    if sample.tokens is not None:
        return sample.tokens
    return tokenize(normalize_text(sample.text))


def hash_features(tokens: TokenSequence, n_buckets: int) -> dict[int, float]:
    """Signed feature hashing of unigrams and bigrams into ``n_buckets``.

    Entry values are occurrence counts with a hash-determined sign. The
    hash is 64-bit FNV-1a over UTF-8 bytes, so identical token sequences
    map to identical vectors on every platform.
    """
    if n_buckets < 2:
        raise ValueError("n_buckets must be >= 2")
    features: dict[int, float] = {}
    for token in tokens:
        bucket, sign = bucket_and_sign(hash_term("u", token), n_buckets)
        features[bucket] = features.get(bucket, 0.0) + sign
    for left, right in bigrams(tokens):
        bucket, sign = bucket_and_sign(hash_term("b", left, right), n_buckets)
        features[bucket] = features.get(bucket, 0.0) + sign
    return features


def load_embedding_file(path: str | Path) -> tuple[int, dict[str, np.ndarray]]:
    """Read an external embedding file; dimension is set by the first record."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"{path}: embedding file not found")
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    problems: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                problems.append(f"{path}:{lineno}: invalid JSON ({exc.msg})")
                continue
            if not isinstance(record, dict) or "id" not in record or "vector" not in record:
                problems.append(f"{path}:{lineno}: record needs 'id' and 'vector'")
                continue
            vec = np.asarray(record["vector"], dtype=np.float64)
            if vec.ndim != 1:
                problems.append(f"{path}:{lineno}: vector must be one-dimensional")
                continue
            if dim is None:
                dim = int(vec.shape[0])
            if vec.shape[0] != dim:
                problems.append(
                    f"{path}:{lineno}: dimension {vec.shape[0]} != expected {dim}"
                )
                continue
            if not np.all(np.isfinite(vec)):
                problems.append(f"{path}:{lineno}: non-finite value in vector")
                continue
            vectors[record["id"]] = vec
    if problems:
        raise DatasetError(problems)
    if dim is None:
        raise DatasetError(f"{path}: embedding file is empty")
    return dim, vectors


def builtin_hash_vector(tokens: TokenSequence, dim: int) -> np.ndarray:
    """Deterministic hashed n-gram embedding: signed unigram+bigram counts
    into ``dim`` buckets, TF-scaled, then L2-normalized.

    Token-free input yields the zero vector (nothing to normalize).
    """
    vec = np.zeros(dim, dtype=np.float64)
    n_terms = len(tokens) + max(0, len(tokens) - 1)
    if n_terms == 0:
        return vec
    for bucket, count in hash_features(tokens, dim).items():
        vec[bucket] = count / n_terms
    norm = math.sqrt(float(np.dot(vec, vec)))
    if norm > 0.0:
        vec /= norm
    return vec


def embed_dataset(dataset: Dataset, config: EmbeddingConfig) -> EmbeddingTable:
    """Build the embedding table for a dataset under the given provider.

    ``external-file`` reads vectors from ``config.path`` (or falls back to
    per-record inline embeddings when no path is configured) and requires
    one vector per sample id. ``builtin-hash`` derives vectors from the
    samples' tokens; identical texts get identical vectors.
    """
    if config.provider == "builtin-hash":
        vectors = {
            s.id: builtin_hash_vector(sample_tokens(s), config.dim)
            for s in dataset.samples
        }
        return EmbeddingTable(dim=config.dim, vectors=vectors, provider=config.provider)

    if config.path is not None:
        dim, loaded = load_embedding_file(config.path)
    else:
        dim, loaded = _inline_vectors(dataset)
    missing = [s.id for s in dataset.samples if s.id not in loaded]
    if missing:
        raise DatasetError(
            [f"missing embedding for sample id {sid!r}" for sid in missing]
        )
    vectors = {s.id: loaded[s.id] for s in dataset.samples}
    return EmbeddingTable(dim=dim, vectors=vectors, provider=config.provider)


def _inline_vectors(dataset: Dataset) -> tuple[int, dict[str, np.ndarray]]:
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    for s in dataset.samples:
        if s.embedding is None:
            continue
        vec = np.asarray(s.embedding, dtype=np.float64)
        if dim is None:
            dim = int(vec.shape[0])
        if vec.shape[0] != dim:
            raise DatasetError(
                f"sample {s.id!r}: inline embedding dimension {vec.shape[0]} != {dim}"
            )
        if not np.all(np.isfinite(vec)):
            raise DatasetError(f"sample {s.id!r}: non-finite inline embedding value")
        vectors[s.id] = vec
    if dim is None:
        raise DatasetError(
            "external-file provider needs an embedding file path or inline embeddings"
        )
    return dim, vectors
