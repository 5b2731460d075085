"""Typed errors shared across the package.

Budget exhaustion during an episode is deliberately *not* an error (episodes
truncate); these exceptions cover contract violations the caller must fix.
"""

from __future__ import annotations


class GenlabError(Exception):
    """Base class for all package errors."""


class InterfaceMismatchError(GenlabError):
    """Task and agent do not share an observation/action interface."""


class BudgetInfeasibleError(GenlabError):
    """A requested procedure cannot fit in the granted budget."""

    def __init__(self, component: str, message: str | None = None):
        self.component = component
        super().__init__(message or f"budget component exhausted before start: {component}")


class InadmissibleGoalError(GenlabError):
    """Goal record rejected by the family admissibility predicate."""


class FamilyMismatchError(GenlabError):
    """Operation requires distributions/tasks over the same family."""


class EmptySupportError(GenlabError):
    """Distribution or task list has no atoms."""


class SupportTooLargeError(GenlabError):
    """Exact solver invoked beyond its hard support-size cap."""


class InvalidMetricError(GenlabError):
    """Ground metric violates symmetry, zero diagonal, or triangle inequality."""


class EmptyCliffError(GenlabError):
    """Prescribed-failure shift needs a nonempty cliff set."""


class EmptyFailureSetError(GenlabError):
    """Fragility construction requires a nonempty failure set at the breadth threshold."""


class ConstantPerformanceError(GenlabError):
    """Relativity witness needs per-task performance straddling the threshold."""


class MissingConfidenceError(GenlabError):
    """Calibration check requires an agent with a confidence channel."""


class NoViolationPredicateError(GenlabError):
    """Constraint check requires a family with a violation indicator."""


class MissingBundleInputError(GenlabError):
    """Bundle configuration lacks an auxiliary input a checker needs."""


class CompositionUnsupportedError(GenlabError):
    """Task pair cannot be composed (interface or kind mismatch)."""


class EnumerationLimitError(GenlabError):
    """Enumeration setup exceeds the hard exactness caps."""


class TwoPointSetupError(GenlabError):
    """Externality experiment validation failed (benign/contaminated pair)."""


class ConfigError(GenlabError):
    """Config validation failure with a field-path diagnostic."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class BridgeSpawnError(GenlabError):
    """External agent process could not be started."""
