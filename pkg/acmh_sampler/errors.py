"""Exception types raised by the sampler library."""


class DegeneratePointError(ValueError):
    """Every mixture component density underflows at the evaluation point."""


class DegenerateSeriesError(ValueError):
    """A chain coordinate is constant, so its autocorrelation is undefined."""


class InsufficientDataError(ValueError):
    """Too few history states to fit a mixture."""


class TemperingError(RuntimeError):
    """All importance weights underflowed at an annealing stage."""

    def __init__(self, stage: int, message: str = ''):
        self.stage = stage
        super().__init__(message or f'all SMC weights underflow at stage {stage}')


__all__ = ['DegeneratePointError', 'DegenerateSeriesError', 'InsufficientDataError', 'TemperingError']
