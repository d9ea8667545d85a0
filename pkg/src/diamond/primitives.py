"""Cryptographic building blocks: PRFs, universal hashes, hashing, key-chain generator.

Two PRF shapes are used throughout the package:

* a block PRF producing keystream blocks from 128-bit counter inputs
  (AES-128 with 16-byte blocks, or the ChaCha20 block function with
  64-byte blocks and the counter split into nonce and block index), and
* a fixed 128-bit PRF (AES-128) that drives key evolution and the
  per-period tag masks.

The forward-secure generator advances a seed one way per period:

    next_seed = PRF2(seed, 0)        period_key = PRF2(seed, 1)

with both inputs encoded as 16-byte big-endian integers.  Superseded
seeds and keys are overwritten with zeros.

A module-level call counter tracks PRF, universal-hash, and hash
invocations so tests can assert the offline/online cost split.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from . import _aes, _chacha, _gf128
from .errors import ExhaustedKeyMaterialError


class CallCounters:
    """Invocation counts for cost-contract assertions."""

    __slots__ = ("prf_calls", "uh_calls", "hash_calls")

    def __init__(self):
        self.reset()

    def reset(self) -> None:
        self.prf_calls = 0
        self.uh_calls = 0
        self.hash_calls = 0

    def snapshot(self) -> tuple[int, int, int]:
        return (self.prf_calls, self.uh_calls, self.hash_calls)


counters = CallCounters()


def encode_u128(value: int) -> bytes:
    """Canonical 16-byte big-endian encoding of PRF inputs and counters."""
    return (value & ((1 << 128) - 1)).to_bytes(16, "big")


# ---------------------------------------------------------------------------
# Block PRFs
# ---------------------------------------------------------------------------

class PrfAlgorithm(Enum):
    AES128 = "aes128"
    CHACHA20BLOCK = "chacha20block"


@dataclass(frozen=True)
class PrfSpec:
    """Shape of a block PRF: key size, output block size, algorithm.

    Counter inputs are always presented as 16-byte strings; for the
    ChaCha20 block function the high 96 bits select the nonce and the
    low 32 bits the block counter.
    """

    algorithm_id: PrfAlgorithm
    key_bits: int
    block_bits: int

    def __post_init__(self):
        if self.algorithm_id is PrfAlgorithm.AES128:
            if self.key_bits != 128 or self.block_bits != 128:
                raise ValueError("AES128 uses 128-bit keys and blocks")
        elif self.block_bits != 512 or self.key_bits != 256:
            raise ValueError("CHACHA20BLOCK uses 256-bit keys and 512-bit blocks")

    @property
    def key_bytes(self) -> int:
        return self.key_bits // 8

    @property
    def block_bytes(self) -> int:
        return self.block_bits // 8


PRF_AES128 = PrfSpec(PrfAlgorithm.AES128, 128, 128)
PRF_CHACHA20 = PrfSpec(PrfAlgorithm.CHACHA20BLOCK, 256, 512)

#: PRF used for key evolution and tag masks.
PRF2_SPEC = PRF_AES128

COUNTER_INPUT_BYTES = 16


def _check_prf_args(spec: PrfSpec, key: bytes, block: bytes) -> None:
    if len(key) != spec.key_bytes:
        raise ValueError(f"key must be {spec.key_bytes} bytes, got {len(key)}")
    if len(block) != COUNTER_INPUT_BYTES:
        raise ValueError(f"input block must be {COUNTER_INPUT_BYTES} bytes, got {len(block)}")


def prf_eval(spec: PrfSpec, key: bytes, block: bytes) -> bytes:
    """Evaluate the block PRF on one 16-byte input; output is one PRF block."""
    _check_prf_args(spec, key, block)
    counters.prf_calls += 1
    if spec.algorithm_id is PrfAlgorithm.AES128:
        return _aes.encrypt_blocks(bytes(key), bytes(block))
    return _chacha.block_at(bytes(key), int.from_bytes(block, "big"))


def prf_eval_blocks(spec: PrfSpec, key: bytes, blocks: Sequence[bytes]) -> bytes:
    """Evaluate the PRF on several inputs under one key (single kernel call)."""
    if spec.algorithm_id is not PrfAlgorithm.AES128:
        raise ValueError("multi-block evaluation is AES-only")
    for b in blocks:
        _check_prf_args(spec, key, b)
    counters.prf_calls += len(blocks)
    return _aes.encrypt_blocks(bytes(key), b"".join(blocks))


def prf_keystream(spec: PrfSpec, key: bytes, ctr: int, nblocks: int) -> bytes:
    """Keystream blocks for counter values ctr+1 .. ctr+nblocks (mod 2^128)."""
    if len(key) != spec.key_bytes:
        raise ValueError(f"key must be {spec.key_bytes} bytes, got {len(key)}")
    counters.prf_calls += nblocks
    if spec.algorithm_id is PrfAlgorithm.AES128:
        return _aes.ctr_keystream([bytes(key)], ctr, nblocks)
    return _chacha.keystream(bytes(key), ctr, nblocks)


def prf_keystream_batch(spec: PrfSpec, keys: Sequence[bytes], ctr: int,
                        blocks_per_key: int) -> list[bytes]:
    """Per-period keystreams for a run of keys over one advancing counter.

    Key i covers counter values ctr + i*blocks_per_key + 1 onward, which
    is exactly the counter schedule of sequential period updates.
    """
    counters.prf_calls += len(keys) * blocks_per_key
    if spec.algorithm_id is PrfAlgorithm.AES128:
        flat = _aes.ctr_keystream([bytes(k) for k in keys], ctr, blocks_per_key)
        width = blocks_per_key * 16
        return [flat[i * width:(i + 1) * width] for i in range(len(keys))]
    out = []
    for i, k in enumerate(keys):
        base = (ctr + i * blocks_per_key) & ((1 << 128) - 1)
        out.append(_chacha.keystream(bytes(k), base, blocks_per_key))
    return out


def prf_eval_each(spec: PrfSpec, keys: Sequence[bytes], blocks: Sequence[bytes]) -> list[bytes]:
    """Evaluate blocks[i] under keys[i]; one key schedule per entry."""
    if spec.algorithm_id is not PrfAlgorithm.AES128:
        raise ValueError("per-key batch evaluation is AES-only")
    counters.prf_calls += len(keys)
    return _aes.encrypt_each_key(list(keys), list(blocks))


def prf_eval_each_multi(spec: PrfSpec, keys: Sequence[bytes],
                        block_runs: Sequence[bytes]) -> list[bytes]:
    """Evaluate a fixed-width run of blocks (k*16 bytes) under each key."""
    if spec.algorithm_id is not PrfAlgorithm.AES128:
        raise ValueError("per-key batch evaluation is AES-only")
    if keys:
        counters.prf_calls += len(keys) * (len(block_runs[0]) // 16)
    return _aes.encrypt_each_key(list(keys), list(block_runs))


# ---------------------------------------------------------------------------
# Universal hashes
# ---------------------------------------------------------------------------

class UhAlgorithm(Enum):
    GHASH = "ghash"
    POLY1305 = "poly1305"


@dataclass(frozen=True)
class UhSpec:
    """An epsilon-almost-universal hash family with 16-byte outputs."""

    algorithm_id: UhAlgorithm
    universality_eps: float
    tag_bits: int
    modulus_descr: str

    def __post_init__(self):
        if self.tag_bits != 128:
            raise ValueError("tag size is fixed at 128 bits")


UH_GHASH = UhSpec(UhAlgorithm.GHASH, 2.0 ** -128, 128,
                  "GF(2^128), x^128 + x^7 + x^2 + x + 1")
UH_POLY1305 = UhSpec(UhAlgorithm.POLY1305, 2.0 ** -103, 128,
                     "integers mod 2^130 - 5")

_P1305 = (1 << 130) - 5
_MASK128 = (1 << 128) - 1
_CLAMP = 0x0FFFFFFC0FFFFFFC0FFFFFFC0FFFFFFF


def poly1305_clamp(key: bytes | bytearray) -> bytearray:
    """Standard r-clamping, applied as a key-derivation step."""
    r = int.from_bytes(key, "little") & _CLAMP
    return bytearray(r.to_bytes(16, "little"))


def _poly1305_eval(key: bytes, message: bytes) -> bytes:
    # Horner evaluation with the 0x01 high byte appended to every block
    # (including a short final block); the accumulator is reduced mod
    # 2^130-5 and the result truncated mod 2^128, little-endian.
    r = int.from_bytes(key, "little")
    acc = 0
    for off in range(0, len(message), 16):
        n = int.from_bytes(message[off:off + 16] + b"\x01", "little")
        acc = ((acc + n) * r) % _P1305
    return (acc & _MASK128).to_bytes(16, "little")


def uh_eval(spec: UhSpec, key: bytes, message: bytes) -> bytes:
    """Universal-hash ``message`` under a 16-byte key; 16-byte output.

    GHASH zero-pads the final partial block; Poly1305 uses the standard
    block rule and expects the key to be clamped already.
    """
    if len(key) != 16:
        raise ValueError(f"universal hash key must be 16 bytes, got {len(key)}")
    counters.uh_calls += 1
    if spec.algorithm_id is UhAlgorithm.GHASH:
        return _gf128.ghash(bytes(key), bytes(message))
    return _poly1305_eval(bytes(key), bytes(message))


def hash_eval(message: bytes) -> bytes:
    """SHA-256 digest (hash-mode aggregation and hash-based key update)."""
    counters.hash_calls += 1
    return hashlib.sha256(bytes(message)).digest()


# ---------------------------------------------------------------------------
# Forward-secure generator
# ---------------------------------------------------------------------------

@dataclass
class FprgState:
    """Seed chain state.  Single-owner; advancing destroys the old seed.

    ``period`` indexes the next key to be emitted, starting at 1.
    """

    seed: bytearray
    max_periods: int
    period: int = 1

    def __post_init__(self):
        if len(self.seed) != 16:
            raise ValueError("seed must be 16 bytes")
        if not isinstance(self.seed, bytearray):
            self.seed = bytearray(self.seed)


def fprg_update(state: FprgState) -> tuple[FprgState, bytearray]:
    """Emit the key for the current period and advance the seed in place.

    Raises ExhaustedKeyMaterialError once all max_periods keys are out.
    """
    if state.period > state.max_periods:
        raise ExhaustedKeyMaterialError(
            f"chain exhausted at period {state.period} (max {state.max_periods})")
    counters.prf_calls += 2
    keys = _aes.fprg_advance_into(state.seed, 1)
    state.period += 1
    return state, bytearray(keys[0].tobytes())


def fprg_take_batch(state: FprgState, count: int) -> list[bytearray]:
    """Emit ``count`` consecutive keys in one compiled chain walk."""
    if count < 0 or state.period + count - 1 > state.max_periods:
        raise ExhaustedKeyMaterialError(
            f"cannot emit {count} keys from period {state.period} "
            f"(max {state.max_periods})")
    counters.prf_calls += 2 * count
    keys = _aes.fprg_advance_into(state.seed, count)
    state.period += count
    return [bytearray(keys[i].tobytes()) for i in range(count)]


__all__ = [
    "CallCounters", "counters", "encode_u128",
    "PrfAlgorithm", "PrfSpec", "PRF_AES128", "PRF_CHACHA20", "PRF2_SPEC",
    "prf_eval", "prf_eval_blocks", "prf_keystream", "prf_keystream_batch",
    "prf_eval_each",
    "UhAlgorithm", "UhSpec", "UH_GHASH", "UH_POLY1305",
    "poly1305_clamp", "uh_eval", "hash_eval",
    "FprgState", "fprg_update", "fprg_take_batch",
]
