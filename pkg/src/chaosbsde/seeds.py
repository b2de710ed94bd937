"""Deterministic seed derivation."""

import hashlib

_MASK64 = (1 << 64) - 1


def derive_seed(base: int, *tags) -> int:
    """Child seed from a base seed and tags, stable across runs and platforms.

    Uses blake2b on the rendered tags (never Python's randomized hash), so
    derived streams are reproducible and distinct from the base stream.
    """
    digest = hashlib.blake2b(
        ("|".join(str(t) for t in tags)).encode(), digest_size=8
    ).digest()
    return (int(base) ^ int.from_bytes(digest, "little")) & _MASK64
