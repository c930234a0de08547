"""Exception hierarchy shared by all simulator modules."""


class GripperError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(GripperError, ValueError):
    """Invalid geometry, parameters or thresholds."""


class DomainError(GripperError, ValueError):
    """An argument lies outside the domain of a model equation."""


class UnsupportedObjectError(GripperError):
    pass


class UngraspableObjectError(GripperError):
    """Object is narrower than the capillary bore."""


class FitError(GripperError):
    pass


class CalibrationError(GripperError):
    """Fit residual exceeded the configured cap.

    ``residuals`` holds one ``(label, measured, predicted, residual)`` tuple
    per measurement.
    """

    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)

    def report(self) -> str:
        lines = [str(self)]
        for label, measured, predicted, resid in self.residuals:
            lines.append(f"  {label}: measured={measured:.6g} N predicted={predicted:.6g} N residual={resid:+.6g} N")
        return "\n".join(lines)


class InsufficientDataError(GripperError, ValueError):
    pass


class ContractError(GripperError, ValueError):
    """Caller violated an interface precondition (wrong length, bad ids)."""


class RejectedCommandError(GripperError):
    """Command is not valid in the current circuit phase."""


class ScenarioLoadError(GripperError):
    """Scenario or calibration file failed to parse or validate.

    ``diagnostics`` is a list of human-readable ``line``/``field`` messages.
    """

    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        return base + "\n" + "\n".join(f"  - {d}" for d in self.diagnostics)
