"""Exception hierarchy shared by all sqlgrad stages."""


class SqlgradError(Exception):
    """Base class for every error raised by this package."""


# --- SQL frontend ---

class LexError(SqlgradError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


class ParseError(SqlgradError):
    def __init__(self, message: str, line: int, column: int, expected: tuple[str, ...] = ()):
        detail = f"{message} at line {line}, column {column}"
        if expected:
            detail += f" (expected one of: {', '.join(expected)})"
        super().__init__(detail)
        self.line = line
        self.column = column
        self.expected = expected


class UnsupportedFeature(SqlgradError):
    """SQL construct outside the supported subset (subqueries, ORDER BY, ...)."""


# --- catalog / configuration ---

class ConfigError(SqlgradError):
    pass


class UnknownTable(SqlgradError):
    pass


class UnknownColumn(SqlgradError):
    pass


class AmbiguousColumn(SqlgradError):
    pass


# --- translation ---

class CyclicDependency(SqlgradError):
    def __init__(self, cycle: list[str]):
        super().__init__("cyclic view dependency: " + " -> ".join(cycle))
        self.cycle = cycle


class UnsupportedOperator(SqlgradError):
    pass


class UnmappedTable(SqlgradError):
    pass


# --- tensor IR ---

class ShapeMismatch(SqlgradError):
    pass


# --- data movement ---

class DuplicateFeatureName(SqlgradError):
    pass


class MissingJoinKey(SqlgradError):
    pass


class MissingTarget(SqlgradError):
    def __init__(self, observation_key):
        super().__init__(f"no target value for observation {observation_key!r}")
        self.observation_key = observation_key


class DuplicateKey(SqlgradError):
    pass


class NonNumericValue(SqlgradError):
    pass


class SchemaMismatch(SqlgradError):
    pass


class CsvTypeError(SqlgradError):
    def __init__(self, message: str, row: int, column: str):
        super().__init__(f"{message} (row {row}, column {column})")
        self.row = row
        self.column = column


class LengthMismatch(SqlgradError):
    pass


# --- evaluation / training ---

class NonFiniteValue(SqlgradError):
    def __init__(self, node: str):
        super().__init__(f"non-finite value produced by {node}")
        self.node = node


class NonFiniteGradient(SqlgradError):
    pass


class DivergenceDetected(SqlgradError):
    def __init__(self, iteration: int, value: float):
        super().__init__(f"training diverged at iteration {iteration} (objective={value!r})")
        self.iteration = iteration
        self.value = value


# --- code generation ---

class UnsupportedNode(SqlgradError):
    pass


# --- CLI ---

class MissingInput(SqlgradError):
    pass
