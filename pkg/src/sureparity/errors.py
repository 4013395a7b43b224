"""Exception types shared across the package."""


class SureParityError(Exception):
    """Base class for every error raised by this package."""


class SingularSystem(SureParityError):
    def __init__(self, row, combination):
        self.row = row
        self.combination = combination
        super().__init__(f"singular system: row {row} is a combination of earlier rows")


class RowNotStochastic(SureParityError):
    def __init__(self, state, action, total):
        self.state, self.action, self.total = state, action, total
        super().__init__(f"RowNotStochastic({state},{action}): weights sum to {total}")


class TargetNotSink(SureParityError):
    def __init__(self, state):
        self.state = state
        super().__init__(f"TargetNotSink({state})")


class NoEnabledAction(SureParityError):
    def __init__(self, state):
        self.state = state
        super().__init__(f"NoEnabledAction({state})")


class InvalidModel(SureParityError):
    """Structural problem not covered by the named invariants (unknown ids, bad weights)."""


class StrategyActionNotEnabled(SureParityError):
    def __init__(self, state, action):
        self.state, self.action = state, action
        super().__init__(f"StrategyActionNotEnabled: {action!r} at {state!r}")


class MaterializationCapExceeded(SureParityError):
    def __init__(self, horizon, cap):
        self.horizon, self.cap = horizon, cap
        super().__init__(f"horizon {horizon} exceeds materialization cap {cap}")


class ThresholdNotStrictlyExceeded(SureParityError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"ThresholdNotStrictlyExceeded({index})")


class NotClean(SureParityError):
    def __init__(self, offenders, what="targets"):
        self.offenders = sorted(map(str, offenders))
        self.what = what
        super().__init__(f"model is not clean w.r.t. {what}; offending states: {self.offenders}")


class NotCleanTargets(NotClean):
    def __init__(self, offenders):
        super().__init__(offenders, "targets")


class NotCleanParity(NotClean):
    def __init__(self, offenders):
        super().__init__(offenders, "parity")


class BudgetExceeded(SureParityError):
    pass


class NotAVertex(SureParityError):
    pass


class PointOutside(SureParityError):
    pass


class PointStrictlyInside(SureParityError):
    pass


class NotRelativelyInterior(SureParityError):
    pass


class ParseError(SureParityError):
    """Syntax error in an input file, with 1-based line and column."""

    def __init__(self, line, col, expected, source="input"):
        self.line, self.col, self.expected = line, col, expected
        super().__init__(f"{source}:{line}:{col}: expected {expected}")


class QuerySyntax(SureParityError):
    def __init__(self, pos, expected):
        self.pos, self.expected = pos, expected
        super().__init__(f"query column {pos + 1}: expected {expected}")


class MixedStrictness(SureParityError):
    def __init__(self):
        super().__init__("mixing '>' and '>=' thresholds is not supported: "
                         "a query is either all strict or all non-strict")


class UnknownTarget(SureParityError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown target {name!r}")
