"""Exception types raised across the package."""


class FPPError(Exception):
    """Base class for all package errors."""


class BadParameter(FPPError, ValueError):
    pass


class BadExponent(BadParameter):
    pass


class BadIntensity(BadParameter):
    pass


class BadWindow(BadParameter):
    pass


class BadBoxSize(BadParameter):
    pass


class BadTarget(BadParameter):
    pass


class EmptyPath(FPPError, ValueError):
    pass


class DuplicatePoint(FPPError, ValueError):
    pass


class BadIndex(FPPError, IndexError):
    pass


class InfiniteEnergy(FPPError, ArithmeticError):
    """A path segment of positive length is traversed in zero time."""


class TooManyCandidates(FPPError):
    def __init__(self, n_candidates, limit, hint=""):
        self.n_candidates = n_candidates
        self.limit = limit
        msg = f"{n_candidates} candidate points exceed the limit of {limit}"
        if hint:
            msg += f"; {hint}"
        super().__init__(msg)


class TooLarge(FPPError, ValueError):
    pass


class MissingSeed(FPPError, ValueError):
    pass


class SpecError(FPPError, ValueError):
    """Validation failure carrying every problem found, not just the first."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
