"""Exception types raised across holderlab."""


class HolderlabError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(HolderlabError, ValueError):
    pass


class OutOfRangeError(HolderlabError, ValueError):
    pass


class DomainError(HolderlabError, ValueError):
    pass


class SeriesTruncationError(HolderlabError, ArithmeticError):
    """A series did not reach its tolerance within the allowed number of terms."""


class ContractViolation(HolderlabError, RuntimeError):
    """An input broke a documented contract, such as a sampler that is not centred."""


class CouplingError(ContractViolation):
    """Two paths that must share a driver were generated from different streams."""


class UnsupportedProblemError(HolderlabError, NotImplementedError):
    pass


class ConfigError(HolderlabError, ValueError):
    pass
