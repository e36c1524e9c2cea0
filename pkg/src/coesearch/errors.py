"""Exception types shared across the package."""


class CoeError(Exception):
    """Base class for all errors raised by coesearch."""


class ConfigurationError(CoeError, ValueError):
    """Parameters violate a documented invariant."""


class FieldError(CoeError, ArithmeticError):
    """Invalid field arithmetic (zero inversion, modulus mismatch)."""


class CapabilityError(CoeError):
    """The backend does not support the requested operation."""


class DecryptionError(CoeError):
    """Accumulated noise may exceed the decryption headroom."""


class SparsityError(CoeError, ValueError):
    """Input vector has more nonzero entries than the declared sparsity."""


class DecodeError(CoeError):
    """A decrypted encoding is malformed or cannot be decoded."""


class RecoveryError(DecodeError):
    """BFS-CODE decoding failed to recover every inserted value.

    Re-running the encoder with a fresh hash seed is the expected remedy.
    """


class ProtocolError(CoeError):
    """Unexpected message, phase violation or malformed frame."""


class SearchAborted(CoeError):
    """Client aborted because the decoded false positives exceeded f_p."""

    def __init__(self, false_positives, f_p):
        super().__init__(f"{false_positives} false positives exceed f_p={f_p}")
        self.false_positives = false_positives
        self.f_p = f_p
