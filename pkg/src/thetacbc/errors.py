"""Exception hierarchy shared by the library and the CLI."""


class ThetaCBCError(Exception):
    """Base class for all library errors."""


class ValidationError(ThetaCBCError, ValueError):
    """Input violates a type invariant."""


class ShapeError(ValidationError):
    """Matrix or vector dimensions do not agree."""


class ContractError(ThetaCBCError, ValueError):
    """A precondition of an operation is violated (e.g. a non-unit direction)."""


class DegenerateSetError(ThetaCBCError, ValueError):
    """The inflated set size ``s + theta`` is negative."""


class UnsupportedConfigurationError(ThetaCBCError):
    pass


class InvalidCertificateError(ThetaCBCError):
    """Barrier constants do not form a certificate (``beta <= 0`` or ``beta < eta``)."""


class UnstabilizableError(ThetaCBCError):
    pass


class NoCertificateError(ThetaCBCError):
    """The closed loop is not Schur stable, so no quadratic certificate exists."""


class ScenarioError(ValidationError):
    """Scenario document is malformed; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class ScenarioShapeError(ScenarioError, ShapeError):
    """Scenario document has inconsistent dimensions."""
