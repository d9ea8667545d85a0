"""Small shared helpers: zeroization, XOR, constant-time compare, RNG plumbing."""

from __future__ import annotations

import hashlib
import hmac
import os

#: Constant-time equality for tags and key-confirmation values.  All byte
#: positions are examined regardless of the first mismatch.
ct_equal = hmac.compare_digest

ENV_SEED = "DIAMOND_SEED"


def zeroize(buf: bytearray | None) -> None:
    """Overwrite a secret buffer with zeros in place."""
    if buf is not None:
        buf[:] = bytes(len(buf))


def xor_bytes(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise ValueError(f"xor length mismatch: {len(a)} != {len(b)}")
    n = len(a)
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(n, "big")


class SystemRng:
    """OS randomness source."""

    def randbytes(self, n: int) -> bytes:
        return os.urandom(n)


class DeterministicRng:
    """SHA-256 counter-mode byte stream for reproducible key generation.

    Not a general-purpose CSPRNG; used when DIAMOND_SEED pins test runs.
    """

    def __init__(self, seed: bytes | str):
        if isinstance(seed, str):
            seed = seed.encode()
        self._seed = hashlib.sha256(seed).digest()
        self._counter = 0

    def randbytes(self, n: int) -> bytes:
        out = bytearray()
        while len(out) < n:
            out += hashlib.sha256(
                self._seed + self._counter.to_bytes(8, "big")
            ).digest()
            self._counter += 1
        return bytes(out[:n])


def make_rng(seed: bytes | str | None = None):
    """Return the RNG for key generation.

    Explicit seed wins; otherwise the DIAMOND_SEED environment variable, if
    set, fixes the stream for reproducible runs; otherwise OS randomness.
    """
    if seed is None:
        seed = os.environ.get(ENV_SEED)
    if seed is None:
        return SystemRng()
    return DeterministicRng(seed)
