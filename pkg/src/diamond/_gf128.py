"""GF(2^128) polynomial hashing for the binary-field universal hash.

Field elements follow the GCM convention (NIST SP 800-38D): the first
bit of the 16-byte string is the coefficient of x^0, and multiplication
is reduced by x^128 + x^7 + x^2 + x + 1.

Internally elements are converted to "polynomial integers" where bit i
is the coefficient of x^i (a per-byte bit reversal, done with a 256-byte
translation table).  In that form a carry-less multiply is an ordinary
shift-and-xor, which we run with a 4-bit window per hash key:

    digest = (((B1 * K) ^ B2) * K ^ ... ^ Bq) * K

The window table costs 15 xors/shifts and is rebuilt per key, which wins
over a plain 128-iteration schoolbook multiply from the very first
block.  The test suite checks every product against an independent
bitwise schoolbook oracle.
"""

from __future__ import annotations

_REV = bytes(int(f"{i:08b}"[::-1], 2) for i in range(256))
_MASK128 = (1 << 128) - 1


def to_poly(block: bytes) -> int:
    """16-byte GCM field element to polynomial integer."""
    return int.from_bytes(block.translate(_REV), "little")


def from_poly(p: int) -> bytes:
    """Polynomial integer back to the 16-byte GCM representation."""
    return p.to_bytes(16, "little").translate(_REV)


def make_window(h_poly: int) -> list[int]:
    """4-bit multiplication window for a fixed hash key."""
    w = [0] * 16
    w[1] = h_poly
    w[2] = h_poly << 1
    w[4] = h_poly << 2
    w[8] = h_poly << 3
    w[3] = w[2] ^ w[1]
    w[5] = w[4] ^ w[1]
    w[6] = w[4] ^ w[2]
    w[7] = w[6] ^ w[1]
    w[9] = w[8] ^ w[1]
    w[10] = w[8] ^ w[2]
    w[11] = w[10] ^ w[1]
    w[12] = w[8] ^ w[4]
    w[13] = w[12] ^ w[1]
    w[14] = w[12] ^ w[2]
    w[15] = w[14] ^ w[1]
    return w


def mul_windowed(window: list[int], x_poly: int) -> int:
    """Multiply x by the windowed key, reduced mod x^128 + x^7 + x^2 + x + 1."""
    r = 0
    for shift in range(124, -4, -4):
        r = (r << 4) ^ window[(x_poly >> shift) & 0xF]
    hi = r >> 128
    r = (r & _MASK128) ^ hi ^ (hi << 1) ^ (hi << 2) ^ (hi << 7)
    hi = r >> 128
    return (r & _MASK128) ^ hi ^ (hi << 1) ^ (hi << 2) ^ (hi << 7)


def ghash(key: bytes, message: bytes) -> bytes:
    """Polynomial hash of ``message`` under subkey ``key``.

    The message is cut into 16-byte blocks; a final partial block is
    zero-padded on the right.  No length block is appended here; callers
    that need GCM framing build it into the message.
    """
    window = make_window(to_poly(key))
    y = 0
    n = len(message)
    for off in range(0, n, 16):
        chunk = message[off:off + 16]
        if len(chunk) < 16:
            chunk = chunk + bytes(16 - len(chunk))
        y = mul_windowed(window, y ^ to_poly(chunk))
    return from_poly(y)
