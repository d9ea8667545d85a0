"""ChaCha20 block-function access (RFC 8439 semantics).

The stream-cipher lane treats ChaCha20 as a PRF over a flat 128-bit
counter: the high 96 bits select the RFC nonce and the low 32 bits the
block counter.  The cipher itself comes from the `cryptography` package;
this module only performs the counter mapping and batches contiguous
runs into a single call.
"""

from __future__ import annotations

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms

_MASK128 = (1 << 128) - 1
_MASK32 = (1 << 32) - 1


def _raw_blocks(key: bytes, nonce12: bytes, counter32: int, nblocks: int) -> bytes:
    # The library nonce layout is 4-byte little-endian initial counter
    # followed by the 12-byte RFC nonce.
    full_nonce = counter32.to_bytes(4, "little") + nonce12
    enc = Cipher(algorithms.ChaCha20(key, full_nonce), mode=None).encryptor()
    return enc.update(bytes(64 * nblocks))


def block_at(key: bytes, counter_value: int) -> bytes:
    """One 64-byte keystream block for a flat 128-bit counter value."""
    counter_value &= _MASK128
    be = counter_value.to_bytes(16, "big")
    return _raw_blocks(key, be[:12], int.from_bytes(be[12:], "big"), 1)


def keystream(key: bytes, ctr: int, nblocks: int) -> bytes:
    """Keystream blocks for counter values ctr+1 .. ctr+nblocks (mod 2^128).

    A contiguous run inside one 32-bit counter window goes out as a single
    cipher call; a wrap into the next nonce falls back to per-block calls.
    """
    first = (ctr + 1) & _MASK128
    last = (ctr + nblocks) & _MASK128
    if nblocks > 0 and (first >> 32) == (last >> 32) and first <= last:
        be = first.to_bytes(16, "big")
        return _raw_blocks(key, be[:12], int.from_bytes(be[12:], "big"), nblocks)
    return b"".join(block_at(key, (ctr + j) & _MASK128) for j in range(1, nblocks + 1))
