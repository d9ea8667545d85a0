"""Encrypt-then-MAC composition with evolving keys and epoch aggregation.

A scheme is five algorithms: key generation, key update, authenticated
encryption (split into offline precomputation and online finalization),
tag aggregation, and batched verify-then-decrypt.  The tag always
authenticates the ciphertext; plaintext is released only after the
epoch's aggregate tag verifies, and the key state advances by the batch
size whether or not it does.

The registry wires the concrete instantiations:

    scheme      stream PRF   univ. hash   key update      aggregation
    diamond1    AES-128      GHASH        AES chain       XOR
    diamond2    ChaCha20     Poly1305     AES chain       XOR
    graphene1   AES-128      GHASH        SHA-256 chain   XOR
    graphene2   ChaCha20     Poly1305     SHA-256 chain   XOR
    faae1       AES-128-GCM (integrated)  SHA-256 chain   XOR

faae1 is the deployed-standard baseline: real GCM framing under a single
evolving key, one nonce per period (the big-endian period index).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import IntEnum

from . import famac, fse, gcm
from .errors import AuthenticationError, ConfigurationError, StructuralError
from .famac import AggMode, AggregateTag, FamacKeyState, PreTag
from .fse import FseKeyState, PreBlock
from .keychain import LABEL_AEAD, HashChain, UpdateMechanism
from .primitives import (PRF_AES128, PRF_CHACHA20, UH_GHASH, UH_POLY1305,
                         PrfSpec, UhSpec)
from .util import ct_equal, zeroize

#: Update-policy selector (AES-based chain for the native schemes,
#: hash-based chain for the baseline family).
KeyUpdatePolicy = UpdateMechanism

KAPPA_BITS = 128


class SchemeId(IntEnum):
    """Stable one-byte wire codes."""

    DIAMOND1 = 0x01
    DIAMOND2 = 0x02
    GRAPHENE1 = 0x11
    GRAPHENE2 = 0x12
    FAAE1 = 0x21

    @property
    def wire_name(self) -> str:
        return self.name.lower()

    @classmethod
    def from_name(cls, name: str) -> "SchemeId":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ConfigurationError(f"unknown scheme {name!r}") from None


@dataclass(frozen=True)
class SchemeProfile:
    """One registry row: component choices for a scheme."""

    prf1: PrfSpec
    uh: UhSpec
    key_update: UpdateMechanism
    default_agg: AggMode
    integrated: bool


_REGISTRY: dict[SchemeId, SchemeProfile] = {
    SchemeId.DIAMOND1: SchemeProfile(PRF_AES128, UH_GHASH,
                                     UpdateMechanism.FPRG_AES, AggMode.XOR, False),
    SchemeId.DIAMOND2: SchemeProfile(PRF_CHACHA20, UH_POLY1305,
                                     UpdateMechanism.FPRG_AES, AggMode.XOR, False),
    SchemeId.GRAPHENE1: SchemeProfile(PRF_AES128, UH_GHASH,
                                      UpdateMechanism.HASH_SHA256, AggMode.XOR, False),
    SchemeId.GRAPHENE2: SchemeProfile(PRF_CHACHA20, UH_POLY1305,
                                      UpdateMechanism.HASH_SHA256, AggMode.XOR, False),
    SchemeId.FAAE1: SchemeProfile(PRF_AES128, UH_GHASH,
                                  UpdateMechanism.HASH_SHA256, AggMode.XOR, True),
}


def scheme_registry_lookup(scheme_id: SchemeId | int) -> SchemeProfile:
    try:
        return _REGISTRY[SchemeId(scheme_id)]
    except (KeyError, ValueError):
        raise ConfigurationError(f"unknown scheme id {scheme_id!r}") from None


@dataclass(frozen=True)
class SchemeConfig:
    """Session parameters: scheme, lifetime n, epoch size b, message length."""

    scheme_id: SchemeId
    n: int
    b: int
    msg_len: int
    agg_mode: AggMode
    kappa: int = KAPPA_BITS

    def __post_init__(self):
        scheme_registry_lookup(self.scheme_id)
        if self.n < 1:
            raise ConfigurationError(f"lifetime must be positive, got n={self.n}")
        if not 1 <= self.b <= self.n:
            raise ConfigurationError(f"epoch size b={self.b} must satisfy 1 <= b <= n={self.n}")
        if self.msg_len < 1:
            raise ConfigurationError(f"message length must be positive, got {self.msg_len}")
        if self.kappa != KAPPA_BITS:
            raise ConfigurationError("only the 128-bit security level is wired")

    @property
    def profile(self) -> SchemeProfile:
        return scheme_registry_lookup(self.scheme_id)

    @property
    def prf1_spec(self) -> PrfSpec:
        return self.profile.prf1

    @property
    def uh_spec(self) -> UhSpec:
        return self.profile.uh

    @property
    def update_mechanism(self) -> UpdateMechanism:
        return self.profile.key_update

    @property
    def integrated(self) -> bool:
        return self.profile.integrated

    @property
    def blocks_per_msg(self) -> int:
        block = 16 if self.integrated else self.prf1_spec.block_bytes
        return math.ceil(self.msg_len / block)

    def tag_len(self, count: int) -> int:
        """Aggregate tag size on the wire for a ``count``-message epoch.

        The hash fold widens to a 32-byte digest after the first fold;
        a single-message epoch is identity-seeded and stays 16 bytes.
        """
        return 32 if self.agg_mode is AggMode.HASH and count > 1 else 16

    def epochs(self) -> int:
        return math.ceil(self.n / self.b)


def make_config(scheme_id: SchemeId | str, n: int, b: int, msg_len: int,
                agg_mode: AggMode | None = None) -> SchemeConfig:
    """Config with registry defaults filled in (aggregation defaults to XOR)."""
    sid = SchemeId.from_name(scheme_id) if isinstance(scheme_id, str) else SchemeId(scheme_id)
    profile = scheme_registry_lookup(sid)
    return SchemeConfig(sid, n, b, msg_len, agg_mode or profile.default_agg)


# ---------------------------------------------------------------------------
# Pre-shared secret material
# ---------------------------------------------------------------------------

@dataclass
class SecretMaterial:
    """The pre-shared root secrets both endpoints derive their chains from."""

    fse_seed: bytearray | None = None
    prf_seed: bytearray | None = None
    uh_seed: bytearray | None = None
    aead_key: bytearray | None = None

    @classmethod
    def generate(cls, config: SchemeConfig, rng) -> "SecretMaterial":
        if config.integrated:
            return cls(aead_key=bytearray(rng.randbytes(16)))
        return cls(fse_seed=bytearray(rng.randbytes(16)),
                   prf_seed=bytearray(rng.randbytes(16)),
                   uh_seed=bytearray(rng.randbytes(16)))

    def to_bytes(self, config: SchemeConfig) -> bytes:
        if config.integrated:
            return bytes(self.aead_key)
        return bytes(self.fse_seed) + bytes(self.prf_seed) + bytes(self.uh_seed)

    @classmethod
    def from_bytes(cls, config: SchemeConfig, raw: bytes) -> "SecretMaterial":
        if config.integrated:
            if len(raw) != 16:
                raise ConfigurationError("integrated scheme expects a 16-byte secret")
            return cls(aead_key=bytearray(raw))
        if len(raw) != 48:
            raise ConfigurationError("generic scheme expects 48 bytes of seed material")
        return cls(fse_seed=bytearray(raw[:16]),
                   prf_seed=bytearray(raw[16:32]),
                   uh_seed=bytearray(raw[32:48]))

    def wipe(self) -> None:
        for buf in (self.fse_seed, self.prf_seed, self.uh_seed, self.aead_key):
            zeroize(buf)


# ---------------------------------------------------------------------------
# Key states
# ---------------------------------------------------------------------------

@dataclass
class OfflinePacket:
    """Per-period precomputation consumed by one online call."""

    period: int
    pre_block: PreBlock | None = None
    pre_tag: PreTag | None = None
    gcm_rec: gcm.GcmPrecompute | None = None

    def footprint(self) -> int:
        if self.gcm_rec is not None:
            rec = self.gcm_rec
            return len(rec.keystream) + len(rec.tag_mask) + len(rec.hash_subkey)
        return len(self.pre_block.keystream) + len(self.pre_tag.mask)


@dataclass
class VerifierPrecompute:
    start: int
    count: int
    pre_blocks: list[PreBlock] | None = None
    mac_pre: famac.VerifierPrecompute | None = None
    gcm_recs: list[gcm.GcmPrecompute] | None = None


def _nonce12(period: int) -> bytes:
    return period.to_bytes(12, "big")


class _GenericState:
    """Composed state: one encryption chain plus the two MAC sub-chains,
    advancing in lockstep."""

    integrated = False

    def __init__(self, config: SchemeConfig, fse_state: FseKeyState,
                 famac_state: FamacKeyState):
        self.config = config
        self.fse = fse_state
        self.famac = famac_state
        self.queue: deque[OfflinePacket] = deque()

    @property
    def period(self) -> int:
        assert self.fse.period == self.famac.period, "sub-states out of lockstep"
        return self.fse.period

    @property
    def ctr(self) -> int:
        return self.fse.ctr

    @property
    def exhausted(self) -> bool:
        return self.fse.exhausted

    def update(self) -> None:
        if self.queue:
            raise StructuralError("cannot update with precomputed packets in flight")
        fse.update(self.fse)
        famac.update(self.famac, famac.ChainSelect.BOTH)

    def authenc_offline(self) -> OfflinePacket:
        return self.precompute(1)[0]

    def precompute(self, count: int) -> list[OfflinePacket]:
        start = self.period
        pre_blocks = fse.enc_offline_batch(self.fse, count)
        pre_tags = famac.sign_offline_batch(self.famac, count)
        packets = [OfflinePacket(start + i, pre_blocks[i], pre_tags[i])
                   for i in range(count)]
        self.queue.extend(packets)
        return packets

    def authenc_online(self, message: bytes, packet: OfflinePacket | None = None
                       ) -> tuple[bytes, bytes]:
        packet = packet or (self.queue.popleft() if self.queue else None)
        if packet is None:
            packet = self.authenc_offline()
            self.queue.clear()
        elif self.queue and self.queue[0] is packet:
            self.queue.popleft()
        ciphertext = fse.enc_online(packet.pre_block, message)
        tag, _ = famac.sign_online(self.famac, ciphertext, packet.pre_tag)
        return ciphertext, tag

    def averdec_offline(self, count: int) -> VerifierPrecompute:
        start = self.period
        mac_pre = famac.averify_offline(self.famac, count)
        pre_blocks = fse.dec_offline_batch(self.fse, count)
        return VerifierPrecompute(start, count, pre_blocks=pre_blocks, mac_pre=mac_pre)

    def averdec_online(self, ciphertexts: list[bytes], agg_tag: AggregateTag,
                       pre: VerifierPrecompute) -> list[bytes]:
        ok = famac.averify_online(self.famac, ciphertexts, agg_tag, pre.mac_pre)
        if not ok:
            for pb in pre.pre_blocks:
                pb.consumed = True
                zeroize(pb.keystream)
            raise AuthenticationError(
                f"aggregate tag rejected for periods {agg_tag.start}..{agg_tag.end}")
        return [fse.dec_online(pb, ct) for pb, ct in zip(pre.pre_blocks, ciphertexts)]

    def offline_footprint_bytes(self) -> int:
        return (sum(p.footprint() for p in self.queue)
                + 16 * len(self.famac.pending_uh))


class _IntegratedState:
    """Single evolving key driving a standard AEAD, one nonce per period."""

    integrated = True

    def __init__(self, config: SchemeConfig, chain: HashChain):
        self.config = config
        self.chain = chain
        self.queue: deque[OfflinePacket] = deque()

    @property
    def period(self) -> int:
        return self.chain.period

    @property
    def ctr(self) -> int:
        return 0

    @property
    def exhausted(self) -> bool:
        return self.chain.exhausted

    def update(self) -> None:
        if self.queue:
            raise StructuralError("cannot update with precomputed packets in flight")
        self.chain.advance()

    def authenc_offline(self) -> OfflinePacket:
        return self.precompute(1)[0]

    def _offline_records(self, count: int) -> list[gcm.GcmPrecompute]:
        start = self.chain.period
        keys = self.chain.take_keys(count)
        recs = gcm.offline_batch([bytes(k) for k in keys],
                                 [_nonce12(start + i) for i in range(count)],
                                 self.config.msg_len, start)
        for k in keys:
            zeroize(k)
        return recs

    def precompute(self, count: int) -> list[OfflinePacket]:
        packets = [OfflinePacket(rec.period, gcm_rec=rec)
                   for rec in self._offline_records(count)]
        self.queue.extend(packets)
        return packets

    def authenc_online(self, message: bytes, packet: OfflinePacket | None = None
                       ) -> tuple[bytes, bytes]:
        packet = packet or (self.queue.popleft() if self.queue else None)
        if packet is None:
            packet = self.authenc_offline()
            self.queue.clear()
        elif self.queue and self.queue[0] is packet:
            self.queue.popleft()
        return gcm.online_encrypt(packet.gcm_rec, message)

    def averdec_offline(self, count: int) -> VerifierPrecompute:
        start = self.chain.period
        if (start - 1) % self.config.b != 0:
            raise StructuralError(f"verifier period {start} is not epoch-aligned")
        return VerifierPrecompute(start, count, gcm_recs=self._offline_records(count))

    def averdec_online(self, ciphertexts: list[bytes], agg_tag: AggregateTag,
                       pre: VerifierPrecompute) -> list[bytes]:
        if agg_tag.start != pre.start or agg_tag.end - agg_tag.start + 1 != pre.count:
            raise StructuralError("batch shape does not match the aggregate tag")
        acc = None
        for i, ct in enumerate(ciphertexts):
            tag = gcm.tag_for_ciphertext(pre.gcm_recs[i], ct)
            acc = famac.aggregate(acc, tag, agg_tag.mode, period=pre.start + i,
                                  epoch_size=self.config.b)
        if not ct_equal(acc.value, agg_tag.value):
            for rec in pre.gcm_recs:
                gcm.discard(rec)
            raise AuthenticationError(
                f"aggregate tag rejected for periods {agg_tag.start}..{agg_tag.end}")
        return [gcm.online_decrypt(rec, ct)
                for rec, ct in zip(pre.gcm_recs, ciphertexts)]

    def offline_footprint_bytes(self) -> int:
        return sum(p.footprint() for p in self.queue)


DiamondKeyState = _GenericState | _IntegratedState


# ---------------------------------------------------------------------------
# Module-level operations
# ---------------------------------------------------------------------------

def keygen_from_material(config: SchemeConfig, material: SecretMaterial,
                         ctr: int) -> DiamondKeyState:
    """Build a key state from pre-shared secrets; the material buffers are
    copied, so the same material can seed both endpoints."""
    if config.integrated:
        chain = HashChain(bytearray(material.aead_key), config.n, LABEL_AEAD)
        return _IntegratedState(config, chain)
    fse_state = fse.from_secret(config, bytes(material.fse_seed), ctr)
    famac_state = famac.from_secrets(config, bytes(material.prf_seed),
                                     bytes(material.uh_seed))
    return _GenericState(config, fse_state, famac_state)


def keygen(config: SchemeConfig, rng) -> DiamondKeyState:
    """Fresh state with random secrets and a random initial counter."""
    material = SecretMaterial.generate(config, rng)
    ctr = int.from_bytes(rng.randbytes(16), "big")
    state = keygen_from_material(config, material, ctr)
    material.wipe()
    return state


def update(state: DiamondKeyState) -> DiamondKeyState:
    """Advance every sub-chain one period; superseded material is destroyed."""
    state.update()
    return state


def authenc_offline(state: DiamondKeyState) -> OfflinePacket:
    """All PRF work for the current period: keystream, tag mask, key evolution."""
    return state.authenc_offline()


def precompute(state: DiamondKeyState, count: int) -> list[OfflinePacket]:
    """Run the offline phase ``count`` periods ahead (bounded pipeline)."""
    return state.precompute(count)


def authenc_online(state: DiamondKeyState, message: bytes,
                   packet: OfflinePacket | None = None) -> tuple[bytes, bytes]:
    """Finalize one message: XOR into ciphertext, tag the ciphertext."""
    return state.authenc_online(message, packet)


def authenc(state: DiamondKeyState, message: bytes) -> tuple[bytes, bytes]:
    """Offline and online phases back to back."""
    return state.authenc_online(message, state.authenc_offline())


def agg(acc: AggregateTag | None, tag: bytes, mode: AggMode, *,
        period: int | None = None, epoch_size: int) -> AggregateTag:
    """Epoch aggregation (delegates to the MAC layer)."""
    return famac.aggregate(acc, tag, mode, period=period, epoch_size=epoch_size)


def averdec_offline(state: DiamondKeyState, count: int) -> VerifierPrecompute:
    """Verifier-side precomputation for a ``count``-message batch."""
    return state.averdec_offline(count)


def averdec_online(state: DiamondKeyState, ciphertexts: list[bytes],
                   agg_tag: AggregateTag, pre: VerifierPrecompute) -> list[bytes]:
    """Verify-then-decrypt.  Raises AuthenticationError on reject; in both
    outcomes the key state has advanced past the batch."""
    if len(ciphertexts) != pre.count:
        raise StructuralError(
            f"expected {pre.count} ciphertexts, got {len(ciphertexts)}")
    for i, ct in enumerate(ciphertexts):
        if len(ct) != state.config.msg_len:
            raise ValueError(f"ciphertext {i} has length {len(ct)}, "
                             f"expected {state.config.msg_len}")
    expected_len = state.config.tag_len(pre.count)
    if len(agg_tag.value) != expected_len:
        raise StructuralError(
            f"aggregate value must be {expected_len} bytes, got {len(agg_tag.value)}")
    return state.averdec_online(ciphertexts, agg_tag, pre)


def averdec(state: DiamondKeyState, ciphertexts: list[bytes],
            agg_tag: AggregateTag) -> list[bytes]:
    """Offline and online verification phases back to back."""
    pre = averdec_offline(state, len(ciphertexts))
    return averdec_online(state, ciphertexts, agg_tag, pre)


def offline_storage_bytes(config: SchemeConfig, batch: int | None = None) -> int:
    """Closed-form offline footprint for one epoch of precomputation.

    Per period the offline phase stores the keystream (full PRF blocks),
    the 16-byte tag mask, and the 16-byte universal-hash key (hash subkey
    for the integrated scheme):

        batch * (ceil(m / block) * block + 32)
    """
    b = config.b if batch is None else batch
    block = 16 if config.integrated else config.prf1_spec.block_bytes
    return b * (math.ceil(config.msg_len / block) * block + 32)
