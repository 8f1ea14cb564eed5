"""Exception hierarchy shared by every subpackage."""


class SwarmGridError(Exception):
    pass


class BudgetExhausted(SwarmGridError):
    pass


class NonFiniteResult(SwarmGridError):
    pass


class DimensionMismatch(SwarmGridError, ValueError):
    pass


class ConfigError(SwarmGridError):
    pass


class ConfigTypeError(ConfigError, TypeError):
    pass


class MissingConfig(ConfigError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class OptimizerBusy(SwarmGridError):
    pass


class UnknownFunction(SwarmGridError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class LineSearchFailed(SwarmGridError):
    pass


class ExecutorShutDown(SwarmGridError):
    pass


class BrokenBarrier(SwarmGridError):
    pass


class ProtocolError(SwarmGridError):
    pass


class ServerFailedReply(SwarmGridError):
    pass


class ConnectionLost(SwarmGridError):
    pass


class AlreadyInitialized(SwarmGridError):
    pass


class InitFailed(SwarmGridError):
    pass


class CmdFailed(SwarmGridError):
    def __init__(self, message, worker_ids=()):
        super().__init__(message)
        self.worker_ids = tuple(worker_ids)


class DistributedEvalFailed(SwarmGridError):
    pass


class ZeroVariance(SwarmGridError, ValueError):
    pass


class AllZeroDiffs(SwarmGridError, ValueError):
    pass


class DegeneratePopulation(SwarmGridError):
    pass
