class LrlError(Exception):
    """Base class for every error raised by the toolkit"""


class InvalidParameterError(LrlError, ValueError):
    """Malformed constructor or function arguments"""


class DomainError(LrlError, ValueError):
    """Input outside the domain of an operation"""


class NumericalError(LrlError, ArithmeticError):
    """Non-finite evaluation"""


class DivergenceError(NumericalError):
    """Integrated state became non-finite"""

    def __init__(self, step, time):
        self.step = step
        self.time = time
        super().__init__(f"integration diverged at step {step} (t={time!r})")


class AssumptionError(LrlError):
    """A defining inequality for the potentials failed certification"""

    def __init__(self, inequality, detail=""):
        self.inequality = inequality
        message = f"assumption {inequality} violated"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class NoFiniteVelocityError(DomainError):
    """Multi-site bound with mu3 = 0 has no finite velocity"""


class InternalConsistencyError(LrlError, RuntimeError):
    """Imaginary residue of a kernel sum exceeded its roundoff limit"""


class ConfigError(InvalidParameterError):
    """Experiment config failed to parse or validate"""

    def __init__(self, message, field=None, line=None):
        self.detail = message
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
