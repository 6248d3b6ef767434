"""Deterministic seed derivation for independent random streams."""

from __future__ import annotations

import hashlib


def derive_seed(*parts: object) -> int:
    """Stable 63-bit seed from a tuple of labels (ints, strings, ...)."""
    digest = hashlib.sha256("/".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little") & (2**63 - 1)
