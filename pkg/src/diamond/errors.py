"""Exception hierarchy for the diamond package.

Length and type violations raise the builtin ValueError; everything
protocol- or key-lifecycle-related derives from DiamondError so callers
can catch one base class at the session boundary.
"""


class DiamondError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(DiamondError):
    """Invalid scheme parameters (n, b, message length, counter capacity)."""


class ExhaustedKeyMaterialError(DiamondError):
    """The key chain has emitted all n period keys; no further use is possible."""


class ReuseError(DiamondError):
    """A one-time precomputed value (keystream block or tag mask) was consumed twice."""


class DesyncError(DiamondError):
    """Sender and receiver state machines disagree on period or epoch index."""


class AuthenticationError(DiamondError):
    """Aggregate tag verification failed; no plaintext was released."""


class StructuralError(DiamondError):
    """Malformed batch shape: misaligned epoch, wrong count, mismatched scheme fields."""


class MalformedFrameError(DiamondError):
    """A wire frame failed validation before any cryptographic processing.

    ``offset`` points at the first offending byte when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} (offset {offset})")
        self.offset = offset
