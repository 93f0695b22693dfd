"""Exception hierarchy. Each family maps to one CLI exit code."""


class RlocError(Exception):
    exit_code = 1


class ConfigError(RlocError, ValueError):
    exit_code = 2


class DataError(RlocError, ValueError):
    exit_code = 3


class FormatError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.row = row
        self.column = column


class InvalidReadingError(DataError):
    pass


class SplitError(DataError):
    pass


class NoCoverageError(DataError):
    pass


class MetricError(DataError):
    pass


class VersionError(DataError):
    pass


class TrainingError(RlocError):
    exit_code = 4


class DegenerateTrainingError(TrainingError):
    pass


class FitError(TrainingError):
    pass


class LabelingError(TrainingError):
    pass


class OracleRefused(RlocError):
    """Raised by the exhaustive oracles when the search space is too large."""
