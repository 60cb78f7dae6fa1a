"""Solver exceptions – raised by the library, mapped to exit codes by the CLI."""

from typing import Any


class ContactHJError(Exception):
    """Base for all contact-hj errors."""
    exit_code = 3


class ConfigValidationError(ContactHJError):
    """Run configuration failed strict validation."""
    exit_code = 2

    def __init__(self, offending_keys: list[str], message: str = ""):
        self.offending_keys = list(offending_keys)
        self.message = message
        text = "Invalid configuration"
        if offending_keys:
            text += f" (keys: {', '.join(offending_keys)})"
        if message:
            text += f": {message}"
        super().__init__(text)


class InvalidWindowError(ContactHJError):
    """Search window wider than half the torus."""
    exit_code = 2

    def __init__(self, radius: int, n: int):
        self.radius = radius
        self.n = n
        super().__init__(f"Invalid window: radius {radius} exceeds n/2 for n={n}")


class StabilityError(ContactHJError):
    """lambda*dt above the monotonicity bound."""
    exit_code = 2

    def __init__(self, lam: float, dt: float, bound: float = 0.5):
        self.lam = lam
        self.dt = dt
        self.bound = bound
        super().__init__(f"Unstable step: lambda*dt = {lam * dt:g} > {bound:g} (lambda={lam:g}, dt={dt:g})")


class TransformWindowError(ContactHJError):
    """Legendre transform sup landed on the edge of [-p_max, p_max]."""

    def __init__(self, p_max: float, count: int = 1):
        self.p_max = p_max
        self.count = count
        super().__init__(f"Transform window overflow: sup not attained inside [-{p_max:g}, {p_max:g}] at {count} point(s)")


class UnsupportedModelError(ContactHJError):
    """Operation requires a closed-form model."""
    exit_code = 2

    def __init__(self, kind: str, operation: str):
        self.kind = kind
        self.operation = operation
        super().__init__(f"{operation} is not supported for model kind: {kind}")


class MalformedFieldError(ContactHJError):
    """Space-time field cannot be backtracked."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"Malformed field: {reason}")


class PicardNonConvergenceError(ContactHJError):
    """Picard iteration hit max_iter with gap above tol."""

    def __init__(self, trace: Any, field: Any = None):
        self.trace = trace
        self.field = field
        last = trace.iterates[-1] if trace.iterates else float("nan")
        super().__init__(f"Picard iteration did not converge after {trace.iterations} iterations (last gap {last:.3e})")


class NoCharacteristicFoundError(ContactHJError):
    """No characteristic reached the target from any source node."""

    def __init__(self, target_x: float):
        self.target_x = target_x
        super().__init__(f"No characteristic found reaching x={target_x:g}")


class NoBracketError(ContactHJError):
    """Critical search ends share one classification."""
    exit_code = 0

    def __init__(self, report: Any, classification: str = ""):
        self.report = report
        self.classification = classification
        message = "No bracket for critical search"
        if classification:
            message += f" ({classification} at both ends)"
        super().__init__(message)


class DivergenceError(ContactHJError):
    """Semigroup iterates drift or overflow where boundedness was required."""

    def __init__(self, drift_rate: float, sup_norm: float, reason: str = ""):
        self.drift_rate = drift_rate
        self.sup_norm = sup_norm
        self.reason = reason
        message = f"Unbounded evolution: drift {drift_rate:.3e}, sup-norm {sup_norm:.3e}"
        if reason:
            message += f" ({reason})"
        super().__init__(message)


class OracleBudgetError(ContactHJError):
    """Brute-force enumeration over budget."""
    exit_code = 2

    def __init__(self, path_count: int, budget: int):
        self.path_count = path_count
        self.budget = budget
        super().__init__(f"Brute-force budget exceeded: {path_count} paths > {budget}")
