"""Exception hierarchy shared across the package.

Each error maps to a CLI exit code through ``exit_code``.
"""


class KlmatError(Exception):
    exit_code = 1


class ConfigError(KlmatError, ValueError):
    exit_code = 1


class DataError(KlmatError):
    exit_code = 2


class ParseError(DataError, ValueError):
    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class EmptyDataset(DataError):
    pass


class SchemaError(DataError):
    pass


class NumericError(KlmatError, ArithmeticError):
    exit_code = 3


class DegenerateFactor(NumericError):
    pass


class DegenerateEstimator(NumericError):
    pass


class SupportError(NumericError, ValueError):
    pass


class EmptyEvaluation(NumericError):
    pass
