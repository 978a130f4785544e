"""Deterministic seed derivation.

All randomness in the package flows from one user-supplied base seed; any
sub-stream (mask rows, realization padding, sweep grid points, stability
trials) derives its own seed here.  SHA-256 over the repr of the parts keeps
the mapping stable across processes and Python versions, unlike the salted
builtin hash().
"""

import hashlib


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from a tuple of ints/floats/strings."""
    text = "\x1f".join(repr(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1
