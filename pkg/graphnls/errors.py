"""
graphnls exceptions
Every error carries the CLI exit category and a short remediation hint
"""

from typing import Optional, Sequence


class GraphNlsError(Exception):
    """Base class for all library errors"""

    exit_code = 1
    remediation = ""

    def __init__(self, message: str, remediation: Optional[str] = None):
        super().__init__(message)
        if remediation is not None:
            self.remediation = remediation


class GraphError(GraphNlsError):
    """Invalid metric graph"""

    exit_code = 3
    remediation = "Check that every edge has a positive finite length and the graph is connected."


class GraphParseError(GraphError):
    """Malformed graph description"""

    def __init__(self, line_no: int, line: str, reason: str):
        self.line_no = line_no
        self.line = line
        super().__init__(
            f"line {line_no}: {reason}: {line.strip()!r}",
            "Edge records read 'edge <id> <vertex_a> <vertex_b> <length>'.",
        )


class ParameterError(GraphNlsError):
    """A precondition on the inputs does not hold"""

    exit_code = 2
    remediation = "Adjust the parameters to satisfy the documented preconditions."


class RefusalError(GraphNlsError):
    """The request falls in a regime the library refuses to compute"""

    exit_code = 4


class SupercriticalMassError(RefusalError):
    remediation = (
        "For p = 6 the energy is unbounded below when the mass exceeds the critical "
        "mass of the graph; lower --mass below the reported critical mass."
    )


class IllPosedEvolutionError(RefusalError):
    remediation = (
        "For p = 6 global well-posedness is only guaranteed below the critical mass; "
        "lower --mass or use p < 6."
    )


class NumericalError(GraphNlsError):
    """A numerical method failed"""

    exit_code = 5
    remediation = "Try a smaller --h, a smaller step, or more iterations."


class SpectralSolverError(NumericalError):
    def __init__(self, message: str, residuals: Sequence[float] = ()):
        self.residuals = list(residuals)
        super().__init__(message)


class ConvergenceError(NumericalError):
    pass


class ContinuationError(NumericalError):
    remediation = "Start closer to the branch point or reduce the continuation step."


class BracketError(NumericalError):
    remediation = "Widen the mass bracket so the ground state changes constancy inside it."
