"""Exception hierarchy shared across the package."""


class CondshapError(Exception):
    """Base class for all package errors."""


class ConfigError(CondshapError):
    """Invalid configuration, CLI arguments, or estimator/model spec strings."""


class DataError(CondshapError):
    """Malformed input data. Carries the offending location when known."""

    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class NumericalError(CondshapError):
    """Numerical failure (singular matrix beyond the jitter ladder, etc.)."""


class IncompleteTableError(CondshapError):
    """A coalition table is missing entries or contains non-finite values."""

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)


class EstimatorError(CondshapError):
    """Contribution estimation failed. Names the coalition/instance when known."""

    def __init__(self, message, coalition=None, instance=None):
        tags = []
        if coalition is not None:
            tags.append(f"coalition mask={coalition:#x}")
        if instance is not None:
            tags.append(f"instance {instance}")
        if tags:
            message = f"{message} [{', '.join(tags)}]"
        super().__init__(message)
        self.coalition = coalition
        self.instance = instance


class AxiomViolation(CondshapError):
    """A random game violated one of the Shapley axioms. Carries the game."""

    def __init__(self, axiom, detail, game_json):
        super().__init__(f"{axiom} axiom violated: {detail}\ngame: {game_json}")
        self.axiom = axiom
        self.game_json = game_json


class BridgeError(CondshapError):
    """Wire-protocol or sidecar failure. `code` is the protocol error code."""

    def __init__(self, code, message):
        super().__init__(f"{code}: {message}")
        self.code = code
