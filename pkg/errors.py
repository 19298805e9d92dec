"""Error types shared by the curvature toolkit.
Every error carries a message that can be shown to the user as-is.
"""
from dataclasses import dataclass
from typing import List, Optional


class RicciError(Exception):
    """Base class for all toolkit errors."""


class DomainError(RicciError, ValueError):
    """A numeric argument lies outside the domain of the operation."""


@dataclass(frozen=True)
class Violation:
    """One failed axiom found while validating a Markov triple.

    Args:
        kind: One of 'normalization', 'detailed_balance', 'reducible', 'malformed'
        detail: Human readable description
    """
    kind: str
    detail: str

    def __str__(self) -> str:
        return f"[{self.kind}] {self.detail}"


class TripleValidationError(RicciError):
    """Raised when (states, rates, weights) do not form a valid Markov triple."""

    def __init__(self, violations: List[Violation], message: Optional[str] = None):
        self.violations = list(violations)
        if message is None:
            lines = "\n".join(f"  - {v}" for v in self.violations)
            message = f"Invalid Markov triple ({len(self.violations)} violation(s)):\n{lines}"
        super().__init__(message)


class NormalizationError(TripleValidationError):
    """Weights do not sum to one."""


class DetailedBalanceError(TripleValidationError):
    """pi(x)Q(x,y) != pi(y)Q(y,x) for some pair."""


class ReducibleChainError(TripleValidationError):
    """The support graph of Q is not connected."""


class MalformedTripleError(TripleValidationError):
    """Structurally broken input (unknown states, negative rates, self loops...)."""


VIOLATION_ERRORS = {
    'normalization': NormalizationError,
    'detailed_balance': DetailedBalanceError,
    'reducible': ReducibleChainError,
    'malformed': MalformedTripleError,
}


class InvalidSubgraphError(RicciError):
    """A SubgraphPattern is not a cycle of the chain's support graph."""


class UnsupportedModelError(RicciError):
    """The operation is only defined for a narrower class of chains."""


class ModelParameterError(RicciError, ValueError):
    """Model constructor parameters are out of range."""


class CertificationError(RicciError):
    """The combinatorial facts behind a certificate could not be verified."""


class PathRejectedError(RicciError):
    """A discrete path violates the continuity equation beyond tolerance."""


class OptimizerError(RicciError):
    """A numerical search broke down; diagnostics are attached."""

    def __init__(self, message: str, diagnostics: Optional[list] = None):
        self.diagnostics = list(diagnostics or [])
        super().__init__(message)


class ModelSpecError(RicciError):
    """A model expression could not be parsed."""
