"""Exception hierarchy shared by all modules."""


class BlockMarkovError(Exception):
    """Base class for every error raised by the package."""


class DimensionMismatch(BlockMarkovError, ValueError):
    pass


class NonStochastic(BlockMarkovError, ValueError):
    pass


class NotRegular(BlockMarkovError, ValueError):
    pass


class AlphabetMismatch(BlockMarkovError, ValueError):
    pass


class UnknownSymbol(BlockMarkovError, ValueError):
    def __init__(self, symbol, position):
        super().__init__(f"unknown symbol {symbol!r} at position {position}")
        self.symbol = symbol
        self.position = position


class NonBinaryAlphabet(BlockMarkovError, ValueError):
    pass


class NoConditioningEvents(BlockMarkovError, ValueError):
    pass


class ConditionViolation(BlockMarkovError):
    def __init__(self, report):
        failed = ", ".join(e.cond_id for e in report.entries if not e.passed)
        super().__init__(f"admissibility conditions failed: {failed}")
        self.report = report


class ComplexEigenvalues(BlockMarkovError):
    pass


class NumericalFailure(BlockMarkovError):
    pass


class NonStochasticResult(BlockMarkovError):
    pass


class ZeroProbabilitySequence(BlockMarkovError):
    pass


class StarvedState(BlockMarkovError):
    def __init__(self, state, mass):
        super().__init__(f"state {state} has expected outgoing mass {mass:.3g}")
        self.state = state
        self.mass = mass


class NonMonotoneLikelihood(BlockMarkovError):
    def __init__(self, trace):
        super().__init__(
            f"log-likelihood decreased at iteration {len(trace) - 1}: "
            f"{trace[-2]!r} -> {trace[-1]!r}"
        )
        self.trace = list(trace)
