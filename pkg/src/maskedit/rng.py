"""Deterministic, platform-stable random streams.

Every stochastic choice in the engine (initial noise, prompt embeddings,
denoiser weights, benchmark layouts) comes from a counter-based Philox
generator keyed by a domain string plus integer parts. Identical keys give
bit-identical streams across runs, processes, and platforms, which is what
makes session replay byte-exact.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

_MASK64 = (1 << 64) - 1


def philox_key(domain: str, *parts: int) -> np.ndarray:
    """Derive a 128-bit Philox key from a domain tag and integer parts."""
    payload = domain.encode("utf-8") + b"\x00"
    payload += struct.pack(f"<{len(parts)}Q", *(p & _MASK64 for p in parts))
    digest = hashlib.sha256(payload).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()


def stream(domain: str, *parts: int) -> np.random.Generator:
    """A fresh generator for the given key; same key, same stream."""
    return np.random.Generator(np.random.Philox(key=philox_key(domain, *parts)))


def stable_token_id(token: str) -> int:
    """Platform-stable 63-bit id for a text token (unlike builtin hash)."""
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return struct.unpack("<Q", digest[:8])[0] >> 1
