"""Exceptions shared by the simulator apps"""


class MhdNudgeError(Exception):
    """Base class for every error raised by the simulator"""


class InvalidParameterError(MhdNudgeError, ValueError):
    """A physical or numerical parameter is outside its admissible range"""


class GridMismatchError(MhdNudgeError, ValueError):
    """Two fields (or samples and a grid) do not share one resolution"""


class DivergenceError(MhdNudgeError, ValueError):
    """A field that must be divergence-free is not"""


class CflViolationError(MhdNudgeError):
    """Time step exceeds the advective CFL limit"""

    def __init__(self, dt, admissible_dt, max_speed):
        self.dt = dt
        self.admissible_dt = admissible_dt
        self.max_speed = max_speed
        super().__init__(
            f"dt={dt:.6g} violates the CFL limit (max speed {max_speed:.6g}); "
            f"admissible dt <= {admissible_dt:.6g}"
        )


class StiffnessError(MhdNudgeError):
    """Explicit nudging is unstable for the requested mu * dt"""

    def __init__(self, mu, dt):
        self.mu = mu
        self.dt = dt
        self.admissible_dt = 1.0 / mu
        super().__init__(
            f"explicit nudging needs mu*dt <= 1 (mu={mu:.6g}, dt={dt:.6g}); "
            f"admissible dt <= {self.admissible_dt:.6g}"
        )


class NumericalInstabilityError(MhdNudgeError):
    """The state stopped being finite"""

    def __init__(self, step, t, parameters=None):
        self.step = step
        self.t = t
        self.parameters = dict(parameters or {})
        details = ', '.join(f"{key}={value}" for key, value in sorted(self.parameters.items()))
        super().__init__(f"non-finite state at step {step} (t={t:.6g}); {details}")


class InterpolantError(MhdNudgeError, ValueError):
    """An observation operator is incompatible with its inputs"""


class ThresholdError(MhdNudgeError, ValueError):
    """A theorem threshold cannot be evaluated (missing constants)"""


class DiagnosticError(MhdNudgeError, ValueError):
    """A diagnostic was asked to work on a degenerate series"""


class ConfigurationError(MhdNudgeError):
    """An experiment configuration failed validation

    ``diagnostics`` is a list of ``(key, line, message)`` triples; ``line`` is
    ``None`` when the key does not appear in the file.
    """

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = []
        for key, line, message in self.diagnostics:
            where = f"line {line}" if line else "missing"
            lines.append(f"{key} ({where}): {message}")
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))


class CheckFailure(MhdNudgeError):
    """A scenario acceptance check did not pass"""

    def __init__(self, failed_checks):
        self.failed_checks = list(failed_checks)
        super().__init__(f"checks failed: {', '.join(self.failed_checks)}")
