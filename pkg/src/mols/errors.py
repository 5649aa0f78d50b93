"""Exception types shared across the package."""


class MolsError(Exception):
    """Base class for all errors raised by this package."""


class InvalidSparsityError(MolsError, ValueError):
    pass


class InvalidParametersError(MolsError, ValueError):
    pass


class MissingGroundTruthError(MolsError, ValueError):
    pass


class RankDeficiencyError(MolsError, ArithmeticError):
    """A column is (numerically) in the span of the columns already chosen."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"column {index} is numerically dependent on the current basis")


class ExhaustedCandidatesError(MolsError):
    def __init__(self, needed, available):
        self.needed = needed
        self.available = available
        super().__init__(f"need {needed} admissible candidates, only {available} left")


class EnumerationTooLargeError(MolsError):
    def __init__(self, count, limit):
        self.count = count
        self.limit = limit
        super().__init__(f"support enumeration needs {count} subsets (limit {limit})")


class MissingOrderError(MolsError, KeyError):
    def __init__(self, order):
        self.order = order
        super().__init__(f"isometry constant of order {order} is not in the report")

    def __str__(self):
        return self.args[0]


class UnknownAlgorithmError(MolsError, KeyError):
    def __str__(self):
        return self.args[0]


class FileFormatError(MolsError, ValueError):
    """Malformed text input. ``line`` is 1-based."""

    def __init__(self, path, line, message):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")
