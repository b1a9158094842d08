"""Exception hierarchy shared by every module of the package."""


class SurrogateError(Exception):
    """Base class for all package errors."""


class InputError(SurrogateError, ValueError):
    """Caller supplied malformed or inconsistent input."""


class ConfigError(InputError):
    """A configuration file is missing a key or holds an invalid value."""


class ParseError(InputError):
    """A data file could not be parsed.

    Parameters
    ----------
    message : str
        Human readable description.
    path : str, optional
        File being parsed.
    line : int, optional
        1-based line number of the offending row.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class InvalidParamsError(InputError):
    """Physical parameters violate their invariants."""


class NumericalError(SurrogateError, ArithmeticError):
    """Base class for numerical failures (exit code 2 in the CLI)."""


class SolverFailureError(NumericalError):
    """An iterative solver did not converge."""


class NumericalBlowupError(NumericalError):
    """A time integration produced a non-finite or unphysical state."""


class InconsistentDataError(InputError):
    """Duplicate training inputs carry conflicting outputs."""


class SingularKernelError(NumericalError):
    """The kernel matrix could not be factorized even after jitter escalation."""


class UndefinedMetricError(SurrogateError, ZeroDivisionError):
    """A ratio metric has a zero denominator over the requested window."""


class UnconvergedTableError(SurrogateError):
    """A surrogate table did not reach its std threshold and was used without override."""


class SimulationError(SurrogateError):
    """The black-box simulator failed inside the active-learning loop.

    The ``partial`` attribute holds whatever training data had been gathered.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
