"""Exception hierarchy for the hiraft package."""


class HiraftError(Exception):
    """Base class for all package errors."""


# threshold signatures
class EmptyIdentity(HiraftError, ValueError):
    pass


class SuiteMismatch(HiraftError, ValueError):
    pass


class PolicyMismatch(HiraftError, ValueError):
    pass


class PolicyInvalid(HiraftError, ValueError):
    pass


# geography / reputation
class OutOfRegion(HiraftError, ValueError):
    pass


class BadWeights(HiraftError, ValueError):
    pass


# consensus
class NoResponses(HiraftError, ValueError):
    pass


class NotLeader(HiraftError, RuntimeError):
    pass


# hierarchy
class NoLeader(HiraftError, RuntimeError):
    pass


class NotMyChild(HiraftError, ValueError):
    pass


# simulation
class UnknownNode(HiraftError, KeyError):
    pass


class ConfigInvalid(HiraftError, ValueError):
    """Raised with a list of ``(field, problem)`` diagnostics."""

    def __init__(self, problems):
        self.problems = list(problems)
        detail = "; ".join(f"{field}: {msg}" for field, msg in self.problems)
        super().__init__(f"invalid configuration: {detail}")
