"""Base class for target distributions.

Keep this file small: just the API the samplers use.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any, Dict, Optional

import numpy as np

from ..mixture_t import TMixture, default_envelope


class Target(ABC):
    """A (possibly unnormalized) log density on R^d.

    ``log_density`` must accept a single point ``(d,)`` returning a float, or a
    batch ``(n, d)`` returning an array, and return -inf outside the support.
    """
    name: str = 'base'
    is_data_target: bool = False
    has_exact_sampler: bool = False

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError('dimension must be positive')
        self.dim = int(dim)

    @abstractmethod
    def log_density(self, x: Any) -> Any:
        raise NotImplementedError()

    def envelope(self, initial: Optional[TMixture] = None) -> Any:
        """Heavy-tailed g0 used by the independent branch.

        Without a target-specific choice this is the initial mixture with every
        component's degrees of freedom set to 1.
        """
        if initial is None:
            raise ValueError(f'target {self.name!r} has no envelope of its own; pass the initial mixture')
        return default_envelope(initial)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Exact draws, for targets that support them."""
        raise NotImplementedError(f'target {self.name!r} has no exact sampler')

    def initial_point(self) -> np.ndarray:
        return np.zeros(self.dim)

    def to_config(self) -> Dict[str, Any]:
        return {'name': self.name, 'dim': self.dim}


class DensityTarget(Target):
    """Wrap any object with ``logpdf`` / ``sample`` (a StudentT, a TMixture) as a target."""
    name = 'density'
    has_exact_sampler = True

    def __init__(self, density: Any, g0: Any = None):
        super().__init__(density.d)
        self.density = density
        self._g0 = g0

    def log_density(self, x: Any) -> Any:
        return self.density.logpdf(x)

    def envelope(self, initial: Optional[TMixture] = None) -> Any:
        if self._g0 is not None:
            return self._g0
        return super().envelope(initial)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.density.sample(rng, size)
