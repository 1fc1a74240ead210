class IdrKitError(Exception):
    """Base of every error the package raises on purpose.

    `code` is the machine-readable tag the CLI prints as `error[CODE]:`.
    """

    code = "INTERNAL"


class UsageError(IdrKitError):
    code = "USAGE"


class DataError(IdrKitError):
    code = "DATA"


class ConfigError(DataError):
    code = "CONFIG"


class EmptyInput(DataError):
    code = "EMPTY_INPUT"


class DomainError(DataError):
    code = "DOMAIN"


class EmptyFile(DataError):
    code = "EMPTY_FILE"


class DegenerateComponent(DataError):
    code = "DEGENERATE"


class NumericalUnderflow(DataError):
    code = "UNDERFLOW"


class ParseError(DataError):
    code = "PARSE"

    def __init__(self, line: int, column: int | None, reason: str, path: str = ""):
        self.line = line
        self.column = column
        self.reason = reason
        self.path = path
        where = f"{path}:" if path else ""
        col = f", column {column}" if column is not None else ""
        super().__init__(f"{where}line {line}{col}: {reason}")
