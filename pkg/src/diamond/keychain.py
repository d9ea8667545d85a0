"""Evolving key chains shared by the encryption and MAC layers.

Two update mechanisms exist:

* FPRG_AES: a seed chain stepped by the forward-secure generator
  (two AES calls per period) with the period key extracted alongside.
* HASH_SHA256: the period key itself is hashed forward,
  key' = SHA-256(key || label)[:16], with a distinct one-byte label per
  chain so parallel chains never collide.

Chains are single-owner and strictly sequential.  Superseded keys and
seeds are zeroized; once period n has been emitted the chain destroys
its remaining material and refuses further use.
"""

from __future__ import annotations

from enum import Enum

from . import primitives
from .errors import ExhaustedKeyMaterialError
from .util import zeroize

LABEL_FSE = b"E"
LABEL_PRF = b"P"
LABEL_UH = b"U"
LABEL_AEAD = b"A"


class UpdateMechanism(Enum):
    FPRG_AES = "fprg-aes128"
    HASH_SHA256 = "hash-sha256"


class KeyChain:
    """Base chain: owns the key of ``period`` and can hand keys forward.

    ``take_keys(c)`` transfers ownership of the keys for periods
    [period, period+c); the chain then sits at period+c.  Taking the
    final period leaves the chain exhausted with all material destroyed.
    ``advance()`` discards the current key without use (an explicit
    update), and is refused once it would need a key past period n.
    """

    def __init__(self, n: int):
        self.n = n
        self.period = 1
        self.current_key: bytearray | None = None

    @property
    def exhausted(self) -> bool:
        return self.current_key is None

    def _emit(self, count: int) -> list[bytearray]:
        raise NotImplementedError

    def _destroy(self) -> None:
        pass

    def take_keys(self, count: int) -> list[bytearray]:
        if count < 1:
            raise ValueError("count must be positive")
        if self.exhausted or self.period + count - 1 > self.n:
            raise ExhaustedKeyMaterialError(
                f"cannot emit periods {self.period}..{self.period + count - 1} "
                f"(max {self.n})")
        last = self.period + count - 1
        out = [self.current_key]
        if last == self.n:
            out += self._emit(count - 1)
            self.current_key = None
            self._destroy()
        else:
            fresh = self._emit(count)
            out += fresh[:-1]
            self.current_key = fresh[-1]
        self.period += count
        return out

    def advance(self) -> None:
        if self.exhausted or self.period >= self.n:
            raise ExhaustedKeyMaterialError(
                f"no key material past period {self.period} (max {self.n})")
        old = self.current_key
        self.current_key = self._emit(1)[0]
        zeroize(old)
        self.period += 1


class FprgChain(KeyChain):
    def __init__(self, seed: bytes | bytearray, n: int):
        super().__init__(n)
        self._fprg = primitives.FprgState(bytearray(seed), max_periods=n)
        _, self.current_key = primitives.fprg_update(self._fprg)

    def _emit(self, count: int) -> list[bytearray]:
        return primitives.fprg_take_batch(self._fprg, count)

    def _destroy(self) -> None:
        zeroize(self._fprg.seed)


class HashChain(KeyChain):
    def __init__(self, key: bytes | bytearray, n: int, label: bytes):
        super().__init__(n)
        self.current_key = bytearray(key)
        self._label = label

    def _emit(self, count: int) -> list[bytearray]:
        # Derives forward from the key of the period being handed out;
        # callers invoke this while self.current_key is still readable.
        out = []
        prev = bytes(self.current_key)
        for _ in range(count):
            prev = primitives.hash_eval(prev + self._label)[:16]
            out.append(bytearray(prev))
        return out


def build_chain(mechanism: UpdateMechanism, secret: bytes | bytearray, n: int,
                label: bytes) -> KeyChain:
    if mechanism is UpdateMechanism.FPRG_AES:
        return FprgChain(secret, n)
    return HashChain(secret, n, label)
