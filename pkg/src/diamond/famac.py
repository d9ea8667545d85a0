"""Forward-secure sequential-aggregate MAC (Carter-Wegman with evolving keys).

Per message i the tag is

    sigma_i = combine( PRF2(K_i^prf, i),  UH(K_i^uh, M_i) )

where combine is the group operation native to the universal hash: XOR
for the binary-field hash, addition mod 2^128 for the prime-field hash.
Tags of one epoch (a run of b messages starting at a period congruent to
1 mod b) compress into a constant-size aggregate by one of three
operators: a SHA-256 fold (order-sensitive), XOR, or addition mod 2^128.

Offline/online split: the mask PRF2(K_i^prf, i) is message-independent
and precomputed; so is the per-period universal-hash key, which the
offline phase extracts from its chain into a pending queue.  The online
phase therefore performs exactly one universal-hash evaluation and no
PRF work per message.

Aggregate verification recomputes the mask aggregate offline and the
hash aggregate online, combining the two at the end, whenever the
aggregation operator coincides with the combine group (XOR aggregation
with the binary-field hash, modular addition with the prime-field hash).
In every other pairing that split does not commute with the sign-side
fold, so the verifier reconstructs each full per-message tag and folds
those; both paths are bit-compatible with the sender.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum, IntEnum

from .errors import (ConfigurationError, DesyncError, ExhaustedKeyMaterialError,
                     ReuseError, StructuralError)
from .keychain import LABEL_PRF, LABEL_UH, KeyChain, build_chain
from .primitives import (PRF2_SPEC, UhAlgorithm, UhSpec, encode_u128, hash_eval,
                         poly1305_clamp, prf_eval_each, uh_eval)
from .util import ct_equal, xor_bytes, zeroize

_MASK128 = (1 << 128) - 1


class AggMode(IntEnum):
    """Aggregation operator; values double as wire codes."""

    HASH = 0x01
    XOR = 0x02
    ADD_Q = 0x03


class ChainSelect(Enum):
    PRF_ONLY = "prf"
    UH_ONLY = "uh"
    BOTH = "both"


@dataclass
class PreTag:
    """Precomputed tag mask for one period; consumable exactly once."""

    period: int
    mask: bytearray
    consumed: bool = False


@dataclass(frozen=True)
class AggregateTag:
    """Constant-size epoch authenticator covering periods start..end."""

    start: int
    end: int
    mode: AggMode
    value: bytes


def _add128(a: bytes, b: bytes) -> bytes:
    # Little-endian addition mod 2^128 (the prime-field hash's byte order).
    s = (int.from_bytes(a, "little") + int.from_bytes(b, "little")) & _MASK128
    return s.to_bytes(16, "little")


def combine_for(uh: UhSpec):
    """The '+' that joins mask and hash value, per instantiation."""
    return xor_bytes if uh.algorithm_id is UhAlgorithm.GHASH else _add128


def _group_op(mode: AggMode):
    return xor_bytes if mode is AggMode.XOR else _add128


def split_verification_supported(mode: AggMode, uh: UhSpec) -> bool:
    """True when mask/hash aggregates may be folded separately."""
    return ((mode is AggMode.XOR and uh.algorithm_id is UhAlgorithm.GHASH)
            or (mode is AggMode.ADD_Q and uh.algorithm_id is UhAlgorithm.POLY1305))


class FamacKeyState:
    """Two evolving sub-chains (mask PRF and universal hash) plus the
    queue of hash keys extracted offline and awaiting online use."""

    def __init__(self, prf_chain: KeyChain, uh_chain: KeyChain, epoch_size: int,
                 agg_mode: AggMode, uh: UhSpec, n: int):
        self.prf_chain = prf_chain
        self.uh_chain = uh_chain
        self.epoch_size = epoch_size
        self.agg_mode = agg_mode
        self.uh = uh
        self.n = n
        self.pending_uh: deque[tuple[int, bytearray]] = deque()

    @property
    def period(self) -> int:
        return self.prf_chain.period

    @property
    def uh_online_period(self) -> int:
        """Next period whose hash key will be consumed online."""
        if self.pending_uh:
            return self.pending_uh[0][0]
        return self.uh_chain.period

    @property
    def exhausted(self) -> bool:
        return self.prf_chain.exhausted


def from_secrets(config, prf_seed: bytes, uh_seed: bytes) -> FamacKeyState:
    """State rebuilt from the two pre-shared 16-byte chain seeds."""
    if config.b < 1:
        raise ConfigurationError(f"epoch size must be at least 1, got {config.b}")
    if config.b > config.n:
        raise ConfigurationError(f"epoch size {config.b} exceeds lifetime n={config.n}")
    pbuf, ubuf = bytearray(prf_seed), bytearray(uh_seed)
    prf_chain = build_chain(config.update_mechanism, pbuf, config.n, LABEL_PRF)
    uh_chain = build_chain(config.update_mechanism, ubuf, config.n, LABEL_UH)
    zeroize(pbuf)
    zeroize(ubuf)
    return FamacKeyState(prf_chain, uh_chain, config.b, config.agg_mode,
                         config.uh_spec, config.n)


def keygen(config, rng) -> FamacKeyState:
    """Two independently seeded sub-chains at period 1."""
    prf_seed = rng.randbytes(16)
    uh_seed = rng.randbytes(16)
    return from_secrets(config, prf_seed, uh_seed)


def update(state: FamacKeyState, which: ChainSelect = ChainSelect.BOTH) -> FamacKeyState:
    """Advance the selected sub-chain(s) one period without signing."""
    if state.pending_uh:
        raise StructuralError("cannot update with precomputed hash keys in flight")
    if which in (ChainSelect.PRF_ONLY, ChainSelect.BOTH):
        state.prf_chain.advance()
    if which in (ChainSelect.UH_ONLY, ChainSelect.BOTH):
        state.uh_chain.advance()
    return state


def _clamped(state: FamacKeyState, key: bytearray) -> bytearray:
    if state.uh.algorithm_id is UhAlgorithm.POLY1305:
        out = poly1305_clamp(key)
        zeroize(key)
        return out
    return key


def sign_offline(state: FamacKeyState) -> tuple[PreTag, FamacKeyState]:
    """Mask for the current period; both sub-chains do their PRF work here."""
    pre = sign_offline_batch(state, 1)[0]
    return pre, state


def sign_offline_batch(state: FamacKeyState, count: int) -> list[PreTag]:
    if state.exhausted:
        raise ExhaustedKeyMaterialError("mask chain exhausted")
    start = state.prf_chain.period
    prf_keys = state.prf_chain.take_keys(count)
    masks = prf_eval_each(PRF2_SPEC, prf_keys,
                          [encode_u128(start + i) for i in range(count)])
    for k in prf_keys:
        zeroize(k)
    for i, uk in enumerate(state.uh_chain.take_keys(count)):
        state.pending_uh.append((start + i, _clamped(state, uk)))
    return [PreTag(start + i, bytearray(masks[i])) for i in range(count)]


def sign_online(state: FamacKeyState, message: bytes, pre: PreTag) -> tuple[bytes, FamacKeyState]:
    """One universal-hash evaluation combined with the stored mask."""
    if pre.consumed:
        raise ReuseError(f"tag mask for period {pre.period} already consumed")
    if not state.pending_uh or state.pending_uh[0][0] != pre.period:
        raise DesyncError(
            f"online period {state.uh_online_period} does not match mask period {pre.period}")
    _, uh_key = state.pending_uh.popleft()
    digest = uh_eval(state.uh, bytes(uh_key), message)
    tag = combine_for(state.uh)(bytes(pre.mask), digest)
    zeroize(uh_key)
    zeroize(pre.mask)
    pre.consumed = True
    return tag, state


def aggregate(acc: AggregateTag | None, tag: bytes, mode: AggMode, *,
              period: int | None = None, epoch_size: int) -> AggregateTag:
    """Fold one more 16-byte tag into the epoch accumulator.

    An empty accumulator is identity-seeded with the tag itself and must
    start on an epoch boundary (period congruent to 1 mod epoch size).
    """
    if acc is None:
        if period is None:
            raise ValueError("seeding an accumulator requires the tag's period")
        if (period - 1) % epoch_size != 0:
            raise StructuralError(
                f"epoch must start at a period congruent to 1 mod {epoch_size}, got {period}")
        return AggregateTag(period, period, mode, bytes(tag))
    if acc.mode is not mode:
        raise StructuralError(f"accumulator mode {acc.mode} does not accept {mode}")
    end = acc.end + 1
    if period is not None and period != end:
        raise DesyncError(f"expected tag for period {end}, got {period}")
    if end - acc.start >= epoch_size:
        raise StructuralError(f"epoch overflow: period {end} exceeds epoch of size {epoch_size}")
    if mode is AggMode.HASH:
        value = hash_eval(acc.value + bytes(tag))
    else:
        value = _group_op(mode)(acc.value, bytes(tag))
    return AggregateTag(acc.start, end, mode, value)


@dataclass
class VerifierPrecompute:
    """Mask-side work done before the messages arrive."""

    start: int
    count: int
    mask_aggregate: bytes | None          # folded masks (split-capable pairings)
    masks: list[bytearray] | None         # per-period masks (full-tag path)


def averify_offline(state: FamacKeyState, count: int) -> VerifierPrecompute:
    """Recompute and fold the period masks; extract the hash keys."""
    if count < 1 or count > state.epoch_size:
        raise StructuralError(f"batch of {count} does not fit an epoch of {state.epoch_size}")
    start = state.prf_chain.period
    if (start - 1) % state.epoch_size != 0:
        raise StructuralError(f"verifier period {start} is not epoch-aligned")
    pre_tags = sign_offline_batch(state, count)
    if split_verification_supported(state.agg_mode, state.uh):
        op = _group_op(state.agg_mode)
        agg = bytes(pre_tags[0].mask)
        for pt in pre_tags[1:]:
            agg = op(agg, bytes(pt.mask))
        for pt in pre_tags:
            zeroize(pt.mask)
        return VerifierPrecompute(start, count, agg, None)
    return VerifierPrecompute(start, count, None, [pt.mask for pt in pre_tags])


def averify_online(state: FamacKeyState, messages: list[bytes], agg_tag: AggregateTag,
                   pre: VerifierPrecompute) -> bool:
    """Hash the messages, reassemble the expected aggregate, compare in
    constant time.  The key state has already advanced; the outcome does
    not roll anything back."""
    if agg_tag.mode is not state.agg_mode:
        raise StructuralError(f"aggregate mode {agg_tag.mode} does not match {state.agg_mode}")
    if agg_tag.start != pre.start:
        raise DesyncError(f"expected epoch start {pre.start}, got {agg_tag.start}")
    if len(messages) != pre.count or agg_tag.end - agg_tag.start + 1 != pre.count:
        raise StructuralError(
            f"batch shape mismatch: {len(messages)} messages for periods "
            f"{agg_tag.start}..{agg_tag.end}")
    combine = combine_for(state.uh)
    expected: bytes | None = None
    hash_agg: bytes | None = None
    for j, message in enumerate(messages):
        if not state.pending_uh or state.pending_uh[0][0] != pre.start + j:
            raise DesyncError("hash-key queue out of step with the batch")
        _, uh_key = state.pending_uh.popleft()
        digest = uh_eval(state.uh, bytes(uh_key), message)
        zeroize(uh_key)
        if pre.mask_aggregate is not None:
            hash_agg = digest if hash_agg is None else _group_op(state.agg_mode)(hash_agg, digest)
        else:
            full_tag = combine(bytes(pre.masks[j]), digest)
            zeroize(pre.masks[j])
            if expected is None:
                expected = full_tag
            elif state.agg_mode is AggMode.HASH:
                expected = hash_eval(expected + full_tag)
            else:
                expected = _group_op(state.agg_mode)(expected, full_tag)
    if pre.mask_aggregate is not None:
        expected = _group_op(state.agg_mode)(pre.mask_aggregate, hash_agg)
    return ct_equal(expected, agg_tag.value)


def averify(state: FamacKeyState, messages: list[bytes],
            agg_tag: AggregateTag) -> tuple[bool, FamacKeyState]:
    """Batch verification; both sub-chains advance by the batch size
    whether or not the tag verifies."""
    pre = averify_offline(state, len(messages))
    return averify_online(state, messages, agg_tag, pre), state
