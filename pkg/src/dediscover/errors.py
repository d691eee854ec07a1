"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end:
1 for configuration/schema problems, 2 for simulation/stability problems
and 3 for numeric failures.
"""


class DiscoveryError(Exception):
    exit_code = 3


class SchemaError(DiscoveryError):
    """Missing columns, inconsistent descriptors, malformed configs."""

    exit_code = 1


class ParseError(SchemaError):
    """A cell in an input file could not be converted to a number."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class ConfigError(SchemaError):
    pass


class MissingInputError(SchemaError):
    pass


class GeometryError(DiscoveryError):
    """Grid problems: non-monotone or non-uniform coordinates, duplicates."""

    exit_code = 1


class DuplicateCoordinateError(GeometryError):
    pass


class StabilityError(DiscoveryError):
    exit_code = 2


class DivergenceError(DiscoveryError):
    exit_code = 2

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NumericError(DiscoveryError):
    exit_code = 3


class DegenerateColumnError(NumericError):
    def __init__(self, descriptor):
        super().__init__(f"column {descriptor!r} has zero norm")
        self.descriptor = descriptor


class StateError(DiscoveryError):
    exit_code = 3


class UndefinedFitnessError(NumericError):
    pass
