"""Exception hierarchy shared by all modules."""


class DNSSError(Exception):
    """Base class for every error raised by the package."""


class NotHermitian(DNSSError, ValueError):
    pass


class NotUnitary(DNSSError, ValueError):
    pass


class Diverged(DNSSError, ArithmeticError):
    """Eigendecomposition failed its residual checks after refinement."""


class BadTrace(DNSSError, ValueError):
    pass


class InvalidParams(DNSSError, ValueError):
    pass


class UnknownSpecies(DNSSError, KeyError):
    pass


class SequenceSyntaxError(DNSSError, SyntaxError):
    """Parse error in a pulse-sequence program.

    Carries ``line``/``col`` (1-based), the offending ``token`` text and a
    description of what was ``expected`` there.
    """

    def __init__(self, message, line, col, token="", expected=""):
        self.line = line
        self.col = col
        self.token = token
        self.expected = expected
        super().__init__(f"{message} at line {line}, col {col}")


class UnboundParameter(DNSSError, NameError):
    def __init__(self, name, line=None, col=None):
        where = f" (line {line}, col {col})" if line is not None else ""
        super().__init__(f"unbound parameter {name!r}{where}")
        # NameError.__init__ resets .name, so assign afterwards
        self.name = name
        self.line = line
        self.col = col


class NegativeDuration(DNSSError, ValueError):
    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        where = f" (line {line}, col {col})" if line is not None else ""
        super().__init__(message + where)


class InvalidPreset(DNSSError, ValueError):
    pass


class OutOfRegime(DNSSError, ValueError):
    """The pulse-only propagator is not predominantly an x rotation."""


class NotConverged(DNSSError, ArithmeticError):
    pass


class BranchTrackingLost(DNSSError, ArithmeticError):
    pass


class ConfigError(DNSSError, ValueError):
    pass
