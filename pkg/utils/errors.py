"""
Exception hierarchy for frontlab
Every error raised by the library derives from FrontlabError so the CLI can map it to an exit code
"""
from typing import Any, Optional


class FrontlabError(Exception):
    """Base class for all frontlab errors"""


class ContractViolation(FrontlabError, ValueError):
    """A precondition of an operation does not hold"""


class CatalogMissError(FrontlabError, KeyError):
    """Unknown preset or experiment name"""

    def __str__(self) -> str:
        # KeyError quotes its argument; keep the plain message
        return str(self.args[0]) if self.args else ""


class InvalidSpecError(FrontlabError, ValueError):
    """Invalid terrace or model specification"""


class ConfigError(FrontlabError, ValueError):
    """Run configuration failed validation"""


class NumericalError(FrontlabError, RuntimeError):
    """Base class for failures of a numerical procedure"""


class AnalysisFailure(NumericalError):
    """A linear analysis could not produce a result (e.g. no pinched root)"""


class NoConnectionError(NumericalError):
    """Phase-plane shooting escaped without connecting to the target state"""


class NoConvergenceError(NumericalError):
    """Newton iteration stagnated; carries the last iterate"""

    def __init__(self, message: str, last_iterate: Any = None, residual: Optional[float] = None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class IndeterminateError(NumericalError):
    """Root tracking could not decide (persistent collision ambiguity)"""


class BlowUpError(NumericalError):
    """Time stepping produced NaN/Inf; carries the last finite state"""

    def __init__(self, message: str, last_state: Any = None):
        super().__init__(message)
        self.last_state = last_state


class FrontSolveError(NumericalError):
    """A front solve failed inside a parameter sweep"""

    def __init__(self, message: str, parameter: Optional[float] = None):
        super().__init__(message)
        self.parameter = parameter


class CriterionFailure(FrontlabError):
    """At least one requested acceptance criterion failed"""


# Exit codes of the CLI
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CRITERION = 4


def exit_code_for(exc: Optional[BaseException]) -> int:
    """
    Map an exception (or None for success) to a CLI exit code

    Args:
        exc: Raised exception, or None

    Returns:
        0 on success, 2 for configuration problems, 3 for numerical failures,
        4 for failed criteria
    """
    if exc is None:
        return EXIT_OK
    if isinstance(exc, CriterionFailure):
        return EXIT_CRITERION
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(exc, (ConfigError, CatalogMissError, InvalidSpecError, ContractViolation)):
        return EXIT_CONFIG
    return EXIT_NUMERICAL
