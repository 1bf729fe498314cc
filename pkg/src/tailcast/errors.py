"""Exception hierarchy and warning categories.

Use ``DomainError`` for arguments outside an operation's contract,
``DegenerateDataError`` for inputs that make a procedure meaningless,
``EstimationError`` for optimizer trouble, ``SamplerError`` for MCMC
failure, and ``NumericError`` for quadrature / root-finding breakdowns.
"""

from __future__ import annotations


class TailcastError(Exception):
    """Base class for all package errors."""


class DomainError(TailcastError, ValueError):
    """An argument violates the operation's domain."""


class UnboundedQuantileError(DomainError):
    """Quantile requested at probability 1 for an unbounded distribution."""


class BeyondEndpointError(DomainError):
    """A threshold shift or excess lies past the distribution endpoint."""


class InfiniteMeanError(DomainError):
    """A mean/expected-shortfall is requested where the shape makes it infinite."""


class LevelRuleError(DomainError):
    """An extreme-level selection rule is inapplicable or infeasible."""


class DegenerateDataError(TailcastError, ValueError):
    """Data carries no usable information (ties, zero variance, rank deficiency)."""


class EstimationError(TailcastError, RuntimeError):
    """Optimizer failed to converge.  Carries the best iterate found."""

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class PriorError(TailcastError, ValueError):
    """A prior specification fails its integrability / boundedness checks."""


class SamplerError(TailcastError, RuntimeError):
    """The MCMC sampler failed (e.g. every proposal rejected)."""


class NumericError(TailcastError, ArithmeticError):
    """A numerical routine (quadrature, bracketing, mass check) did not converge."""


class TieWarning(UserWarning):
    """Zero excesses were dropped at the threshold."""


class BoundaryWarning(UserWarning):
    """An estimate sits on (or presses against) a parameter-space boundary."""


class SamplerHealthWarning(UserWarning):
    """MCMC diagnostics outside their comfortable range."""
