"""AES-128-GCM assembled from the package primitives (NIST SP 800-38D).

Used by the integrated baseline scheme.  Standard framing throughout:
96-bit nonces, J0 = nonce || 0^31 || 1, CTR keystream from inc32(J0),
and the tag

    T = E(K, J0) XOR GHASH(H, pad(A) || pad(C) || len64(A) || len64(C))

with H = E(K, 0^128).  The hash subkey, tag mask, and keystream are all
message-independent, so they precompute cleanly; the online phase is an
XOR plus one GHASH pass over the ciphertext.  Because the tag depends
only on the ciphertext, a verifier can recompute it without decrypting.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import primitives
from .errors import ReuseError
from .primitives import PRF_AES128, UH_GHASH, prf_eval_blocks, uh_eval
from .util import xor_bytes, zeroize

_MASK32 = (1 << 32) - 1


def _inc32(block16: bytes, step: int) -> bytes:
    ctr = (int.from_bytes(block16[12:], "big") + step) & _MASK32
    return block16[:12] + ctr.to_bytes(4, "big")


def _pad16(data: bytes) -> bytes:
    rem = len(data) % 16
    return data if rem == 0 else data + bytes(16 - rem)


def _ghash_frame(aad: bytes, ciphertext: bytes) -> bytes:
    return (_pad16(aad) + _pad16(ciphertext)
            + (8 * len(aad)).to_bytes(8, "big")
            + (8 * len(ciphertext)).to_bytes(8, "big"))


@dataclass
class GcmPrecompute:
    """Message-independent material for one (key, nonce) pair."""

    period: int
    hash_subkey: bytearray
    tag_mask: bytearray
    keystream: bytearray
    msg_len: int
    consumed: bool = False


def _counter_blocks(nonce12: bytes, msg_len: int) -> list[bytes]:
    j0 = nonce12 + b"\x00\x00\x00\x01"
    nblocks = (msg_len + 15) // 16
    return [bytes(16), j0] + [_inc32(j0, 1 + i) for i in range(nblocks)]


def _record(period: int, msg_len: int, out: bytes) -> GcmPrecompute:
    return GcmPrecompute(
        period=period,
        hash_subkey=bytearray(out[:16]),
        tag_mask=bytearray(out[16:32]),
        keystream=bytearray(out[32:]),
        msg_len=msg_len,
    )


def offline(key: bytes, nonce12: bytes, msg_len: int, period: int = 0) -> GcmPrecompute:
    """Derive H, the J0 tag mask, and the CTR keystream in one pass."""
    out = prf_eval_blocks(PRF_AES128, key, _counter_blocks(nonce12, msg_len))
    return _record(period, msg_len, out)


def offline_batch(keys: list[bytes], nonces: list[bytes], msg_len: int,
                  start_period: int) -> list[GcmPrecompute]:
    """Precompute records for a run of periods, one key schedule each."""
    blocks = [b"".join(_counter_blocks(nonce, msg_len)) for nonce in nonces]
    outs = primitives.prf_eval_each_multi(PRF_AES128, keys, blocks)
    return [_record(start_period + i, msg_len, out) for i, out in enumerate(outs)]


def tag_for_ciphertext(pre: GcmPrecompute, ciphertext: bytes, aad: bytes = b"") -> bytes:
    """Authentication tag over a ciphertext; no keystream is consumed."""
    digest = uh_eval(UH_GHASH, bytes(pre.hash_subkey), _ghash_frame(aad, ciphertext))
    return xor_bytes(digest, bytes(pre.tag_mask))


def online_encrypt(pre: GcmPrecompute, message: bytes) -> tuple[bytes, bytes]:
    """XOR the message into ciphertext and tag it; consumes the record."""
    ciphertext = _consume_keystream(pre, message)
    digest = uh_eval(UH_GHASH, bytes(pre.hash_subkey), _ghash_frame(b"", ciphertext))
    tag = xor_bytes(digest, bytes(pre.tag_mask))
    _wipe(pre)
    return ciphertext, tag


def online_decrypt(pre: GcmPrecompute, ciphertext: bytes) -> bytes:
    """XOR-only decryption; the caller must have verified the tag."""
    message = _consume_keystream(pre, ciphertext)
    _wipe(pre)
    return message


def discard(pre: GcmPrecompute) -> None:
    """Destroy a precompute record without using it (rejected batch)."""
    pre.consumed = True
    _wipe(pre)


def _consume_keystream(pre: GcmPrecompute, data: bytes) -> bytes:
    if pre.consumed:
        raise ReuseError(f"keystream for period {pre.period} already consumed")
    if len(data) != pre.msg_len:
        raise ValueError(f"expected {pre.msg_len} bytes, got {len(data)}")
    out = xor_bytes(data, bytes(pre.keystream[:len(data)]))
    pre.consumed = True
    return out


def _wipe(pre: GcmPrecompute) -> None:
    zeroize(pre.keystream)
    zeroize(pre.tag_mask)
    zeroize(pre.hash_subkey)


def encrypt(key: bytes, nonce12: bytes, message: bytes) -> bytes:
    """One-shot encryption returning ciphertext || tag (library-compatible)."""
    pre = offline(key, nonce12, len(message))
    ciphertext, tag = online_encrypt(pre, message)
    return ciphertext + tag


def gmac(key: bytes, nonce12: bytes, data: bytes) -> bytes:
    """Authentication-only mode: tag over ``data`` as associated data."""
    pre = offline(key, nonce12, 0)
    digest = uh_eval(UH_GHASH, bytes(pre.hash_subkey), _ghash_frame(data, b""))
    tag = xor_bytes(digest, bytes(pre.tag_mask))
    discard(pre)
    return tag
