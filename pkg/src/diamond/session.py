"""Sender/receiver state machines and the wire format.

One session moves at most n messages from a device to a verifier in
epoch-sized batches.  The device emits a single handshake frame carrying
the public session parameters and the initial counter, authenticated by
a key-confirmation tag under the first period key; every subsequent
frame is a batch envelope:

    offset  size  field
    0       4     magic "DFA1" (the trailing byte is the format version)
    4       1     scheme id
    5       1     aggregation mode
    6       8     epoch start period, unsigned big-endian
    14      2     message count, unsigned big-endian
    16      4     message length m, unsigned big-endian
    20      c*m   ciphertexts
    ...     16/32 aggregate tag (32 bytes only for a hash fold of >= 2)

All integers are big-endian.  Frames are self-delimiting, so a byte
stream (file or TCP) is just their concatenation.  Delivery is assumed
reliable and in order; a replayed or out-of-order epoch surfaces as a
desync error, and an authentication failure still advances the receiver
past the rejected epoch.

Variable-length records ride inside the fixed m-byte plaintext as a
4-byte big-endian length prefix plus zero padding ("framed" mode);
"raw" mode carries exact m-byte messages.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass

from . import faae, famac, gcm, primitives
from .errors import (AuthenticationError, ConfigurationError, DesyncError,
                     MalformedFrameError, StructuralError)
from .famac import AggMode, AggregateTag
from .faae import SchemeConfig, SchemeId, SecretMaterial
from .keychain import UpdateMechanism
from .primitives import encode_u128
from .util import ct_equal, zeroize

ENVELOPE_MAGIC = b"DFA1"
HELLO_MAGIC = b"DFH1"
KEYFILE_MAGIC = b"DFK1"

_ENV_HEADER = struct.Struct(">4sBBQHI")     # magic, scheme, agg, epoch_start, count, msg_len
_HELLO_FMT = struct.Struct(">4sBBQII")      # magic, scheme, agg, n, b, msg_len
HELLO_LEN = _HELLO_FMT.size + 16 + 16       # + ctr + confirmation tag


@dataclass(frozen=True)
class BatchEnvelope:
    """One epoch on the wire: ciphertext run plus its aggregate tag."""

    scheme_id: int
    agg_mode: int
    epoch_start: int
    msg_len: int
    ciphertexts: tuple[bytes, ...]
    tag_value: bytes

    @property
    def count(self) -> int:
        return len(self.ciphertexts)

    def aggregate_tag(self) -> AggregateTag:
        return AggregateTag(self.epoch_start, self.epoch_start + self.count - 1,
                            AggMode(self.agg_mode), self.tag_value)


def encode_envelope(env: BatchEnvelope) -> bytes:
    header = _ENV_HEADER.pack(ENVELOPE_MAGIC, env.scheme_id, env.agg_mode,
                              env.epoch_start, env.count, env.msg_len)
    return header + b"".join(env.ciphertexts) + env.tag_value


def envelope_length(header: bytes) -> int:
    """Total frame length implied by a 20-byte header."""
    magic, scheme, agg_mode, epoch_start, count, msg_len = _parse_header(header)
    tag_len = 32 if AggMode(agg_mode) is AggMode.HASH and count > 1 else 16
    return _ENV_HEADER.size + count * msg_len + tag_len


def _parse_header(header: bytes):
    if len(header) < _ENV_HEADER.size:
        raise MalformedFrameError("truncated envelope header", offset=len(header))
    magic, scheme, agg_mode, epoch_start, count, msg_len = _ENV_HEADER.unpack(
        header[:_ENV_HEADER.size])
    if magic != ENVELOPE_MAGIC:
        raise MalformedFrameError(f"bad envelope magic {magic!r}", offset=0)
    try:
        SchemeId(scheme)
    except ValueError:
        raise MalformedFrameError(f"unknown scheme id {scheme:#x}", offset=4) from None
    try:
        AggMode(agg_mode)
    except ValueError:
        raise MalformedFrameError(f"unknown aggregation mode {agg_mode:#x}", offset=5) from None
    if count < 1:
        raise MalformedFrameError("empty envelope", offset=14)
    if msg_len < 1:
        raise MalformedFrameError("zero message length", offset=16)
    return magic, scheme, agg_mode, epoch_start, count, msg_len


def decode_envelope(data: bytes) -> BatchEnvelope:
    """Parse exactly one envelope; the byte string must match its declared
    length arithmetic bit for bit."""
    _, scheme, agg_mode, epoch_start, count, msg_len = _parse_header(data)
    total = envelope_length(data[:_ENV_HEADER.size])
    if len(data) != total:
        raise MalformedFrameError(
            f"frame length {len(data)} does not match declared {total}",
            offset=min(len(data), total))
    body = data[_ENV_HEADER.size:]
    cts = tuple(bytes(body[i * msg_len:(i + 1) * msg_len]) for i in range(count))
    tag_value = bytes(body[count * msg_len:])
    return BatchEnvelope(scheme, agg_mode, epoch_start, msg_len, cts, tag_value)


@dataclass(frozen=True)
class SessionHello:
    """Handshake frame: session parameters, initial counter, confirmation tag."""

    scheme_id: int
    agg_mode: int
    n: int
    b: int
    msg_len: int
    ctr: int
    tag: bytes

    def body(self) -> bytes:
        return _HELLO_FMT.pack(HELLO_MAGIC, self.scheme_id, self.agg_mode,
                               self.n, self.b, self.msg_len) + encode_u128(self.ctr)


def encode_hello(hello: SessionHello) -> bytes:
    return hello.body() + hello.tag


def decode_hello(data: bytes) -> SessionHello:
    if len(data) != HELLO_LEN:
        raise MalformedFrameError(f"hello must be {HELLO_LEN} bytes, got {len(data)}",
                                  offset=min(len(data), HELLO_LEN))
    magic, scheme, agg_mode, n, b, msg_len = _HELLO_FMT.unpack(data[:_HELLO_FMT.size])
    if magic != HELLO_MAGIC:
        raise MalformedFrameError(f"bad hello magic {magic!r}", offset=0)
    ctr = int.from_bytes(data[_HELLO_FMT.size:_HELLO_FMT.size + 16], "big")
    tag = bytes(data[_HELLO_FMT.size + 16:])
    return SessionHello(scheme, agg_mode, n, b, msg_len, ctr, tag)


def _initial_keys(config: SchemeConfig, material: SecretMaterial) -> tuple[bytearray, bytearray]:
    """First-period MAC keys derived from material copies (nothing consumed)."""
    if config.update_mechanism is UpdateMechanism.FPRG_AES:
        _, k_prf = primitives.fprg_update(
            primitives.FprgState(bytearray(material.prf_seed), max_periods=1))
        _, k_uh = primitives.fprg_update(
            primitives.FprgState(bytearray(material.uh_seed), max_periods=1))
    else:
        k_prf = bytearray(material.prf_seed)
        k_uh = bytearray(material.uh_seed)
    if config.uh_spec.algorithm_id is primitives.UhAlgorithm.POLY1305:
        clamped = primitives.poly1305_clamp(k_uh)
        zeroize(k_uh)
        k_uh = clamped
    return k_prf, k_uh


def confirmation_tag(config: SchemeConfig, material: SecretMaterial, body: bytes) -> bytes:
    """Key-confirmation tag binding the hello body to the shared secret.

    Nothing the live chains will use is consumed: the mask input 0 is
    reserved (message masks use indices >= 1) and the baseline scheme
    authenticates under the reserved all-zero nonce.
    """
    if config.integrated:
        return gcm.gmac(bytes(material.aead_key), bytes(12), body)
    k_prf, k_uh = _initial_keys(config, material)
    mask = primitives.prf_eval(primitives.PRF2_SPEC, bytes(k_prf), encode_u128(0))
    digest = primitives.uh_eval(config.uh_spec, bytes(k_uh), body)
    zeroize(k_prf)
    zeroize(k_uh)
    return famac.combine_for(config.uh_spec)(mask, digest)


# ---------------------------------------------------------------------------
# Record framing inside the fixed-size plaintext
# ---------------------------------------------------------------------------

_LEN_PREFIX = 4


def frame_record(record: bytes, msg_len: int) -> bytes:
    if msg_len < _LEN_PREFIX + 1:
        raise ConfigurationError(
            f"framed mode needs msg_len > {_LEN_PREFIX}, got {msg_len}")
    if len(record) > msg_len - _LEN_PREFIX:
        raise ValueError(f"record of {len(record)} bytes exceeds capacity "
                         f"{msg_len - _LEN_PREFIX}")
    body = struct.pack(">I", len(record)) + record
    return body + bytes(msg_len - len(body))


def unframe_record(plaintext: bytes) -> bytes:
    (length,) = struct.unpack(">I", plaintext[:_LEN_PREFIX])
    if length > len(plaintext) - _LEN_PREFIX:
        raise MalformedFrameError(f"record length {length} exceeds payload", offset=0)
    return plaintext[_LEN_PREFIX:_LEN_PREFIX + length]


# ---------------------------------------------------------------------------
# State machines
# ---------------------------------------------------------------------------

class Sender:
    """Device side: authenticated encryption, epoch folding, envelopes.

    ``precompute_depth`` > 0 lets the offline phase run that many periods
    ahead of the online path (bounded by the epoch boundary at n).
    """

    def __init__(self, config: SchemeConfig, material: SecretMaterial, rng, *,
                 framed: bool = True, precompute_depth: int = 0):
        self.config = config
        ctr = 0 if config.integrated else int.from_bytes(rng.randbytes(16), "big")
        self.state = faae.keygen_from_material(config, material, ctr)
        self._material = material
        self.framed = framed
        self.depth = precompute_depth
        self.closed = False
        self._hello_sent = False
        self._ctr = ctr
        self._acc: AggregateTag | None = None
        self._epoch_cts: list[bytes] = []

    def hello(self) -> bytes:
        if self._hello_sent:
            raise StructuralError("hello already emitted")
        self._hello_sent = True
        h = SessionHello(int(self.config.scheme_id), int(self.config.agg_mode),
                         self.config.n, self.config.b, self.config.msg_len,
                         self._ctr, b"")
        body = h.body()
        return body + confirmation_tag(self.config, self._material, body)

    def step(self, message: bytes) -> BatchEnvelope | None:
        """Process one message; an envelope comes back exactly when the
        epoch fills or the lifetime ends."""
        if self.closed:
            raise StructuralError("sender already flushed or exhausted")
        plaintext = frame_record(message, self.config.msg_len) if self.framed else message
        if not self.framed and len(plaintext) != self.config.msg_len:
            raise ValueError(f"raw mode needs exactly {self.config.msg_len}-byte messages")
        if self.depth > 0 and not self.state.queue:
            remaining = self.config.n - self.state.period + 1
            if remaining > 0:
                faae.precompute(self.state, min(self.depth, remaining))
        period = (self.state.queue[0].period if self.state.queue else self.state.period)
        ciphertext, tag = faae.authenc_online(self.state, plaintext)
        self._epoch_cts.append(ciphertext)
        self._acc = famac.aggregate(self._acc, tag, self.config.agg_mode,
                                    period=period, epoch_size=self.config.b)
        at_epoch_end = len(self._epoch_cts) == self.config.b
        at_lifetime_end = period == self.config.n
        if at_epoch_end or at_lifetime_end:
            env = self._emit()
            if at_lifetime_end:
                self.closed = True
            return env
        return None

    def flush(self) -> BatchEnvelope | None:
        """Emit a partial epoch and close the session."""
        self.closed = True
        return self._emit() if self._epoch_cts else None

    def _emit(self) -> BatchEnvelope:
        env = BatchEnvelope(int(self.config.scheme_id), int(self.config.agg_mode),
                            self._acc.start, self.config.msg_len,
                            tuple(self._epoch_cts), self._acc.value)
        self._acc = None
        self._epoch_cts = []
        return env


class Receiver:
    """Verifier side: handshake, in-order epochs, verify-then-decrypt."""

    def __init__(self, config: SchemeConfig, material: SecretMaterial, *,
                 framed: bool = True):
        self.config = config
        self._material = material
        self.framed = framed
        self.state = None
        self.expected_start = 1
        self.finished = False

    @property
    def handshaken(self) -> bool:
        return self.state is not None

    def on_hello(self, frame: bytes) -> None:
        if self.handshaken:
            raise StructuralError("hello already processed")
        hello = decode_hello(frame)
        if (hello.scheme_id != int(self.config.scheme_id)
                or hello.agg_mode != int(self.config.agg_mode)
                or hello.n != self.config.n
                or hello.b != self.config.b
                or hello.msg_len != self.config.msg_len):
            raise StructuralError("hello parameters do not match the shared configuration")
        expected = confirmation_tag(self.config, self._material, hello.body())
        if not ct_equal(expected, hello.tag):
            raise AuthenticationError("hello key-confirmation tag rejected")
        self.state = faae.keygen_from_material(self.config, self._material, hello.ctr)

    def step(self, envelope: BatchEnvelope) -> list[bytes]:
        """Verify one epoch and release its plaintexts, or raise.

        Structural and ordering checks run before any cryptography.  On an
        authentication failure the state has already advanced past the
        epoch and the error propagates with nothing released.
        """
        if not self.handshaken:
            raise StructuralError("envelope before hello")
        if self.finished:
            raise DesyncError("session already closed by a partial epoch")
        if envelope.scheme_id != int(self.config.scheme_id):
            raise StructuralError(f"envelope scheme {envelope.scheme_id:#x} does not "
                                  f"match session {int(self.config.scheme_id):#x}")
        if envelope.agg_mode != int(self.config.agg_mode):
            raise StructuralError("envelope aggregation mode does not match session")
        if envelope.msg_len != self.config.msg_len:
            raise StructuralError("envelope message length does not match session")
        if envelope.epoch_start != self.expected_start:
            raise DesyncError(f"expected epoch start {self.expected_start}, "
                              f"got {envelope.epoch_start}")
        count = envelope.count
        if count > self.config.b:
            raise StructuralError(f"count {count} exceeds epoch size {self.config.b}")
        end = envelope.epoch_start + count - 1
        if end > self.config.n:
            raise StructuralError(f"epoch runs past lifetime n={self.config.n}")
        if count < self.config.b and end != self.config.n:
            self.finished = True  # early partial epoch closes the session
        pre = faae.averdec_offline(self.state, count)
        self.expected_start += count
        plaintexts = faae.averdec_online(self.state, list(envelope.ciphertexts),
                                         envelope.aggregate_tag(), pre)
        if self.framed:
            return [unframe_record(p) for p in plaintexts]
        return plaintexts


# ---------------------------------------------------------------------------
# Transports
# ---------------------------------------------------------------------------

class InProcessChannel:
    """Ordered, reliable in-memory frame queue."""

    def __init__(self):
        self._frames: deque[bytes] = deque()

    def send(self, frame: bytes) -> None:
        self._frames.append(bytes(frame))

    def recv(self) -> bytes | None:
        return self._frames.popleft() if self._frames else None

    def __len__(self) -> int:
        return len(self._frames)


def read_frames(stream):
    """Yield the hello frame then each envelope's bytes from a byte stream.

    Frames are self-delimiting; the stream is a file object or socket
    file.  Truncation raises a malformed-frame error.
    """
    hello = stream.read(HELLO_LEN)
    if len(hello) == 0:
        return
    if len(hello) < HELLO_LEN:
        raise MalformedFrameError("truncated hello frame", offset=len(hello))
    yield hello
    while True:
        header = stream.read(_ENV_HEADER.size)
        if len(header) == 0:
            return
        if len(header) < _ENV_HEADER.size:
            raise MalformedFrameError("truncated envelope header", offset=len(header))
        total = envelope_length(header)
        rest = stream.read(total - _ENV_HEADER.size)
        if len(rest) < total - _ENV_HEADER.size:
            raise MalformedFrameError("truncated envelope body",
                                      offset=_ENV_HEADER.size + len(rest))
        yield header + rest
