from typing import Optional


class MilloptError(Exception):
    """Base class for every error raised by the toolkit."""


class SchemaError(MilloptError):
    pass


class SchemaMismatchError(SchemaError):
    def __init__(self, column: str, message: Optional[str] = None):
        self.column = column
        super().__init__(message or f"Column '{column}' is missing from the input")


class ParseError(MilloptError):
    def __init__(self, row: int, column: str, value: str):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"Cannot parse {value!r} as a number (row {row}, column '{column}')")


class EmptyDatasetError(MilloptError):
    def __init__(self, stage: str):
        self.stage = stage
        super().__init__(f"No rows left after {stage}")


class InvalidFoldCountError(MilloptError):
    def __init__(self, k: int, n: int, reason: str = "need 2 <= k <= n"):
        self.k = k
        self.n = n
        super().__init__(f"Fold count k={k} is invalid for n={n} rows ({reason})")


class DimensionError(MilloptError):
    def __init__(self, expected, got, what: str = "input"):
        self.expected = expected
        self.got = got
        super().__init__(f"Dimension mismatch for {what}: expected {expected}, got {got}")


class InsufficientDataError(MilloptError):
    pass


class DegenerateDifferenceError(MilloptError):
    def __init__(self):
        super().__init__("All paired differences are exactly zero; t statistic is undefined")


class InvalidKError(MilloptError):
    def __init__(self, k: int, limit: int, what: str = "k"):
        self.k = k
        self.limit = limit
        super().__init__(f"Invalid {what}={k} (allowed range depends on {limit})")


class SpecError(MilloptError):
    def __init__(self, family: str, message: str, key: Optional[str] = None):
        self.family = family
        self.key = key
        super().__init__(f"{family}: {message}")


class UnimplementedFamilyError(MilloptError):
    def __init__(self, family: str, reason: str):
        self.family = family
        self.reason = reason
        super().__init__(f"Model family '{family}' is registered but not implemented: {reason}")


class ConfigError(MilloptError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"Invalid configuration at '{key}': {message}")


class FeasibilityError(MilloptError):
    pass


class StageError(MilloptError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")
