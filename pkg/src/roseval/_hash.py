"""Fixed 64-bit hashing shared by feature hashing and seed derivation.

FNV-1a with the standard 64-bit constants. The choice is pinned so that
hashed features, embeddings, and derived RNG seeds are bit-identical
across platforms and Python versions.
"""

from __future__ import annotations

FNV1A64_OFFSET = 0xCBF29CE484222325
FNV1A64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF
_SEP = b"\x1f"  # unit separator; cannot occur inside a token


def fnv1a64(data: bytes) -> int:
    """FNV-1a hash of a byte string, as an unsigned 64-bit integer."""
    h = FNV1A64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV1A64_PRIME) & _MASK64
    return h


def hash_term(*parts: str) -> int:
    """Hash a feature term given as one or more string parts.

    Parts are joined with a separator byte so that ("ab", "c") and
    ("a", "bc") hash differently.
    """
    return fnv1a64(_SEP.join(p.encode("utf-8") for p in parts))


def bucket_and_sign(h: int, n_buckets: int) -> tuple[int, float]:
    """Split a 64-bit hash into a bucket index and a sign in {-1.0, +1.0}.

    The top bit picks the sign, the remaining 63 bits pick the bucket, so
    sign and bucket are decorrelated.
    """
    sign = 1.0 if (h >> 63) == 0 else -1.0
    return (h & 0x7FFFFFFFFFFFFFFF) % n_buckets, sign


def derive_seed(*parts: object) -> int:
    """Derive a deterministic RNG seed from arbitrary labelled parts.

    Used wherever a run needs its own seed (per candidate, per run index,
    per purpose) so that results do not depend on scheduling order. The
    result is a non-negative 63-bit integer accepted by
    ``numpy.random.default_rng``.
    """
    payload = _SEP.join(str(p).encode("utf-8") for p in parts)
    return fnv1a64(payload) & 0x7FFFFFFFFFFFFFFF
