"""Forward-secure, aggregate, offline/online authenticated encryption.

Per-message keys evolve one way (compromise never exposes the past),
per-message tags compress into one constant-size authenticator per
epoch, and all PRF work happens in a message-independent offline phase
so the online path is an XOR plus a single universal-hash evaluation.

Quick start::

    from diamond import make_config, SecretMaterial, Sender, Receiver, make_rng

    config = make_config("diamond1", n=1024, b=32, msg_len=64)
    rng = make_rng()
    material = SecretMaterial.generate(config, rng)

    sender = Sender(config, material, rng)
    receiver = Receiver(config, material)

    receiver.on_hello(sender.hello())
    envelopes = [env for m in records if (env := sender.step(m))]
    for env in envelopes:
        plaintexts = receiver.step(env)
"""

from .errors import (AuthenticationError, ConfigurationError, DesyncError,
                     DiamondError, ExhaustedKeyMaterialError,
                     MalformedFrameError, ReuseError, StructuralError)
from .famac import AggMode, AggregateTag
from .faae import (SchemeConfig, SchemeId, SecretMaterial, make_config,
                   offline_storage_bytes, scheme_registry_lookup)
from .session import (BatchEnvelope, InProcessChannel, Receiver, Sender,
                      SessionHello, decode_envelope, encode_envelope)
from .util import make_rng

__version__ = "0.1.0"

__all__ = [
    "AggMode", "AggregateTag", "AuthenticationError", "BatchEnvelope",
    "ConfigurationError", "DesyncError", "DiamondError",
    "ExhaustedKeyMaterialError", "InProcessChannel", "MalformedFrameError",
    "Receiver", "ReuseError", "SchemeConfig", "SchemeId", "SecretMaterial",
    "Sender", "SessionHello", "StructuralError", "decode_envelope",
    "encode_envelope", "make_config", "make_rng", "offline_storage_bytes",
    "scheme_registry_lookup", "__version__",
]
