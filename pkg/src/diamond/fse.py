"""Counter-mode forward-secure encryption with an offline/online split.

Each period i owns a fresh key K_i from the evolving chain and a window
of the shared 128-bit counter.  The offline phase generates the period's
keystream

    C~_j = PRF1(K_i, ctr + j)        j = 1 .. ceil(m / block)

and evolves the key; the online phase is a plain XOR of the message with
the stored keystream.  Decryption mirrors encryption with the roles of
message and ciphertext swapped.

Messages have a fixed length m per key state, so the counter advances by
exactly ceil(m / block) every period and, given the capacity check at
key generation, no (key, counter) pair ever repeats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import primitives
from .errors import ConfigurationError, ExhaustedKeyMaterialError, ReuseError
from .keychain import LABEL_FSE, KeyChain, build_chain
from .primitives import PrfAlgorithm, PrfSpec, encode_u128
from .util import xor_bytes, zeroize

_MASK128 = (1 << 128) - 1

#: PRF inputs reserved for deriving the 256-bit stream-cipher key from a
#: 128-bit chain key (chain-generator inputs are 0 and 1).
_EXPAND_INPUTS = (encode_u128(2), encode_u128(3))


@dataclass
class PreBlock:
    """Precomputed keystream for one period; consumable exactly once."""

    period: int
    keystream: bytearray
    msg_len: int
    consumed: bool = False


class FseKeyState:
    """Single-owner encryption state: key chain, counter, message geometry."""

    def __init__(self, chain: KeyChain, ctr: int, msg_len: int, prf1: PrfSpec, n: int):
        self.chain = chain
        self.ctr = ctr & _MASK128
        self.msg_len = msg_len
        self.prf1 = prf1
        self.n = n
        self.blocks_per_msg = math.ceil(msg_len / prf1.block_bytes)

    @property
    def period(self) -> int:
        return self.chain.period

    @property
    def exhausted(self) -> bool:
        return self.chain.exhausted

    @property
    def current_key(self) -> bytearray | None:
        return self.chain.current_key


def _validate_config(config) -> None:
    if config.n < 1:
        raise ConfigurationError(f"need at least one period, got n={config.n}")
    if config.msg_len < 1:
        raise ConfigurationError(f"message length must be positive, got {config.msg_len}")
    bpm = math.ceil(config.msg_len / config.prf1_spec.block_bytes)
    if config.n * bpm >= (1 << 128):
        raise ConfigurationError(
            "counter capacity exceeded: n * blocks_per_message must stay below 2^128")


def from_secret(config, seed: bytes, ctr: int) -> FseKeyState:
    """State rebuilt from a pre-shared 16-byte seed and a known counter."""
    _validate_config(config)
    buf = bytearray(seed)
    chain = build_chain(config.update_mechanism, buf, config.n, LABEL_FSE)
    zeroize(buf)  # the chain owns its own copy
    return FseKeyState(chain, ctr, config.msg_len, config.prf1_spec, config.n)


def keygen(config, rng) -> FseKeyState:
    """Fresh state: random seed (one chain step applied, so K_1 is live)
    and a uniformly random 128-bit counter."""
    seed = rng.randbytes(16)
    ctr = int.from_bytes(rng.randbytes(16), "big")
    return from_secret(config, seed, ctr)


def update(state: FseKeyState) -> FseKeyState:
    """Evolve to the next period without encrypting: new key, counter
    advanced by the per-message block count, old key destroyed."""
    if state.period >= state.n:
        raise ExhaustedKeyMaterialError(f"cannot update past period {state.n}")
    state.chain.advance()
    state.ctr = (state.ctr + state.blocks_per_msg) & _MASK128
    return state


def _stream_keys(state: FseKeyState, chain_keys: list[bytearray]) -> list[bytes]:
    """Map 128-bit chain keys to the PRF1 key domain.

    AES uses the chain key directly.  The 256-bit stream-cipher key is
    derived by two reserved-input PRF calls so the chain key itself never
    enters the cipher.
    """
    if state.prf1.algorithm_id is PrfAlgorithm.AES128:
        return [bytes(k) for k in chain_keys]
    b2, b3 = _EXPAND_INPUTS
    halves_lo = primitives.prf_eval_each(primitives.PRF2_SPEC, chain_keys, [b2] * len(chain_keys))
    halves_hi = primitives.prf_eval_each(primitives.PRF2_SPEC, chain_keys, [b3] * len(chain_keys))
    return [lo + hi for lo, hi in zip(halves_lo, halves_hi)]


def _offline_batch(state: FseKeyState, count: int) -> list[PreBlock]:
    if state.exhausted:
        raise ExhaustedKeyMaterialError("no key material left for precomputation")
    start = state.period
    ctr0 = state.ctr
    chain_keys = state.chain.take_keys(count)
    stream_keys = _stream_keys(state, chain_keys)
    streams = primitives.prf_keystream_batch(state.prf1, stream_keys, ctr0,
                                             state.blocks_per_msg)
    for k in chain_keys:
        zeroize(k)
    state.ctr = (ctr0 + count * state.blocks_per_msg) & _MASK128
    return [PreBlock(start + i, bytearray(streams[i]), state.msg_len)
            for i in range(count)]


def enc_offline(state: FseKeyState) -> tuple[PreBlock, FseKeyState]:
    """Keystream precomputation for the current period; the key evolves
    here, before any message is seen."""
    pre = _offline_batch(state, 1)[0]
    return pre, state


def enc_offline_batch(state: FseKeyState, count: int) -> list[PreBlock]:
    """Precompute ``count`` consecutive periods in one chain walk."""
    return _offline_batch(state, count)


def _finalize(pre: PreBlock, data: bytes) -> bytes:
    if pre.consumed:
        raise ReuseError(f"keystream for period {pre.period} already consumed")
    if len(data) != pre.msg_len:
        raise ValueError(f"expected {pre.msg_len} bytes, got {len(data)}")
    out = xor_bytes(data, bytes(pre.keystream[:len(data)]))
    pre.consumed = True
    zeroize(pre.keystream)
    return out


def enc_online(pre: PreBlock, message: bytes) -> bytes:
    """XOR-only finalization; consumes the keystream."""
    return _finalize(pre, message)


def dec_offline(state: FseKeyState) -> tuple[PreBlock, FseKeyState]:
    """Decryption-side precomputation; identical keystream schedule."""
    return enc_offline(state)


def dec_offline_batch(state: FseKeyState, count: int) -> list[PreBlock]:
    return enc_offline_batch(state, count)


def dec_online(pre: PreBlock, ciphertext: bytes) -> bytes:
    """XOR-only decryption; consumes the keystream."""
    return _finalize(pre, ciphertext)
