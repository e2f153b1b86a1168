"""Exceptions and warning classes shared by the mixture library and the CLI."""

from typing import List, Optional


class MixtureError(Exception):
    """Base class for every error raised by the library."""


class InvalidParameterError(MixtureError, ValueError):
    """A distribution or model parameter is outside its admissible range."""


class UsageError(MixtureError, ValueError):
    """The caller passed inputs with the wrong shape, type or option."""


class SingularDesignError(MixtureError):
    """The weighted design matrix of a component is numerically rank deficient."""

    def __init__(self, component: Optional[int], condition: float, where: Optional[str] = None):
        self.component = component
        self.condition = condition
        if where is None:
            where = f"component {component}" if component is not None else "design"
        super().__init__(f"Singular weighted design for {where} (condition number {condition:.3g})")


class EmptyComponentError(MixtureError):
    """A component lost (almost) all of its posterior mass."""

    def __init__(self, component: int, n_k: float):
        self.component = component
        self.n_k = n_k
        super().__init__(f"Component {component} is empty (n_k={n_k:.3g})")


class GatingDivergenceError(MixtureError):
    """The logistic gating objective became non-finite."""


class FitFailureError(MixtureError):
    """Every ECM start failed; ``diagnostics`` holds one message per start."""

    def __init__(self, message: str, diagnostics: Optional[List[str]] = None):
        self.diagnostics = list(diagnostics or [])
        detail = "; ".join(self.diagnostics[:5])
        super().__init__(f"{message}: {detail}" if detail else message)


class IngestionIssue:
    """Represents a problem found in one row/cell of an input CSV."""

    def __init__(self, row_num: int, column: str, issue: str, severity: str = "error"):
        self.row_num = row_num
        self.column = column
        self.issue = issue
        self.severity = severity

    def __str__(self):
        icon = "ERROR" if self.severity == "error" else "WARN"
        return f"[{icon}] Row {self.row_num} - {self.column}: {self.issue}"


class IngestionError(MixtureError):
    """A CSV file could not be turned into a Dataset."""

    def __init__(self, message: str, issues: Optional[List[IngestionIssue]] = None):
        self.issues = list(issues or [])
        lines = [message] + [f"  {issue}" for issue in self.issues[:20]]
        if len(self.issues) > 20:
            lines.append(f"  ... {len(self.issues) - 20} more")
        super().__init__("\n".join(lines))


class BoundaryDegeneracyWarning(UserWarning):
    """Local-linear fit fell back to the local-constant estimate."""


class PosteriorUnderflowWarning(UserWarning):
    """Every component density underflowed for some observations."""
