"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class LbsError(Exception):
    """Base class for errors raised by lbsreg."""


class DomainError(LbsError, ValueError):
    """An argument lies outside the domain of the operation."""


class SingularDesignError(LbsError, ValueError):
    """A design matrix is rank deficient."""


class InfeasiblePointError(LbsError, ValueError):
    """A coefficient vector maps to a non-positive alpha or theta."""


class UnavailableError(LbsError):
    """A requested quantity cannot be computed from the inputs given."""


class StudyError(LbsError):
    """A Monte Carlo study exceeded its failure budget."""
