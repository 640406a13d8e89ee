"""Exception hierarchy. Each class carries a short machine-readable code used by the CLI."""


class KinexError(Exception):
    code = "E_KINEX"


class ParseError(KinexError, ValueError):
    code = "E_PARSE"


class InsufficientDataError(KinexError, ValueError):
    code = "E_INSUFFICIENT_DATA"


class DegenerateSeriesError(KinexError, ValueError):
    code = "E_DEGENERATE"


class DomainError(KinexError, ValueError):
    code = "E_DOMAIN"


class NumericError(KinexError, ArithmeticError):
    code = "E_NUMERIC"


class NotFoundError(KinexError, KeyError):
    code = "E_NOT_FOUND"

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class UsageError(KinexError, ValueError):
    code = "E_USAGE"
