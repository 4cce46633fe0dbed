"""Exception types raised across the package."""


class SSLHError(Exception):
    """Base class for all package errors."""


class EdgeListParseError(SSLHError, ValueError):
    def __init__(self, path, line_no, line):
        self.path = path
        self.line_no = line_no
        self.line = line
        super().__init__(f"{path}:{line_no}: cannot parse {line!r}")


class IsolatedNodeError(SSLHError, ValueError):
    def __init__(self, nodes):
        self.nodes = list(nodes)
        head = ", ".join(str(v) for v in self.nodes[:10])
        more = "" if len(self.nodes) <= 10 else f" (+{len(self.nodes) - 10} more)"
        super().__init__(f"isolated nodes not allowed: {head}{more}")


class DimensionError(SSLHError, ValueError):
    pass


class RepresentationError(SSLHError, ValueError):
    """A label or compatibility matrix is in the wrong form for the operation."""


class InfeasibleSpecError(SSLHError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("infeasible generator spec: " + "; ".join(self.violations))


class AssignmentDeadlockError(SSLHError, RuntimeError):
    pass


class DivergenceError(SSLHError, ValueError):
    pass


class DenseLimitError(SSLHError, ValueError):
    pass


class PowerIterationError(SSLHError, RuntimeError):
    def __init__(self, message, last_estimates):
        self.last_estimates = tuple(last_estimates)
        super().__init__(f"{message}; last estimates {self.last_estimates}")


class DegenerateCountsError(SSLHError, ValueError):
    pass


class UnknownPresetError(SSLHError, KeyError):
    pass


class EmptyHoldoutError(SSLHError, ValueError):
    pass
