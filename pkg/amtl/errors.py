"""
AMTL Errors

One exception hierarchy for the whole package. Every failure the library
raises on purpose derives from AMTLError so callers (the CLI in particular)
can map them to exit codes without catching unrelated exceptions.
"""

from typing import Any, Dict, Iterable, Optional


class AMTLError(Exception):
    """Root of all intentional failures."""


class InvalidInputError(AMTLError, ValueError):
    """Numeric input outside the domain of an operation (non-finite, empty)."""


class ContractError(AMTLError, ValueError):
    """A precondition of an operation was violated by the caller."""


class NondeterminismError(AMTLError):
    """A function expected to be deterministic returned different values."""


class EmptyCorpusError(AMTLError, ValueError):
    """A corpus of zero sentences was requested or supplied."""


class TooShortError(AMTLError, ValueError):
    """Sentence too short for error injection."""


class UnknownSymbolError(AMTLError, KeyError):
    """Text contains characters that are not in the vocabulary."""

    def __init__(self, symbols: Iterable[str]):
        self.symbols = sorted(set(symbols))
        super().__init__(f"unknown symbol(s): {', '.join(repr(s) for s in self.symbols)}")

    def __str__(self) -> str:
        return self.args[0]


class LengthError(AMTLError, ValueError):
    """Sentence longer than the model's position table."""


class DegenerateConfidenceError(AMTLError, ValueError):
    """A candidate confidence of exactly zero makes the similarity score undefined."""


class NoDiffError(AMTLError, ValueError):
    """Two sentences that were expected to differ are identical."""


class CheckpointVersionError(AMTLError):
    """Checkpoint was written with an incompatible format version."""


class CheckpointCorruptError(AMTLError):
    """Checkpoint is truncated or does not carry the expected header."""


class DivergenceError(AMTLError, FloatingPointError):
    """Training produced a non-finite loss.

    Attributes:
        snapshot: Diagnostic values captured at the failing step
    """

    def __init__(self, message: str, snapshot: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.snapshot = snapshot or {}


class ConfigError(AMTLError, ValueError):
    """Configuration file, environment or flag could not be resolved."""


class NoPluginError(AMTLError, LookupError):
    """No registered plugin answered a required hook."""
