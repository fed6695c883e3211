"""Deterministic hashing: identifier digests, seed derivation, counter-based draws.

Identifier digests are FNV-1a 64 followed by a murmur-style avalanche
finalizer; plain FNV-1a leaves near-identical short strings clustered, which
matters for ring positions. Randomness that must be statistically clean
(per-packet loss draws) uses blake2b instead.
"""

from __future__ import annotations

import hashlib

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _fmix64(h: int) -> int:
    h ^= h >> 33
    h = (h * 0xFF51AFD7ED558CCD) & _MASK64
    h ^= h >> 33
    h = (h * 0xC4CEB9FE1A85EC53) & _MASK64
    h ^= h >> 33
    return h


def digest64(data: bytes) -> int:
    """64-bit identifier digest of canonical bytes (FNV-1a 64 + fmix64)."""
    return _fmix64(fnv1a64(data))


def derive_seed(*parts: object) -> int:
    """Deterministic 64-bit sub-seed from hashable parts.

    Parts are joined as ``repr``-stable strings with '|' so that
    derive_seed(1, "flow_rate_pps", 6, 0) is reproducible across runs and
    platforms.
    """
    payload = "|".join(_part_str(p) for p in parts).encode("utf-8")
    return digest64(payload)


def _part_str(part: object) -> str:
    if isinstance(part, float):
        return repr(part)
    return str(part)


def unit_draw(*parts: object) -> float:
    """Uniform draw in [0, 1) keyed purely by its arguments.

    Counter-based: the draw for (seed, sender, seq) is the same no matter
    when it is asked for, so raising a loss probability can only turn
    deliveries into losses, never the reverse.
    """
    payload = "|".join(_part_str(p) for p in parts).encode("utf-8")
    raw = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(raw, "big") / (1 << 64)
