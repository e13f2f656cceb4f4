"""Banana-shaped Gaussian twist.

pi_b(x) = N_d(phi_b(x); 0, Sigma) with Sigma = diag(100, 1, ..., 1) and
phi_b(x) = (x1, x2 + b x1**2 - 100 b, x3, ..., xd). The map has unit Jacobian,
so the density is normalized.
"""
from __future__ import annotations

from typing import Any, Dict, Optional

import numpy as np

from ..mixture_t import StudentT, TMixture, single_component
from .base import Target

CURVATURE = 0.03
_VAR1 = 100.0


def twist(x: Any, b: float = CURVATURE) -> np.ndarray:
    """phi_b applied row-wise."""
    pts = np.array(np.atleast_2d(x), dtype=float)
    pts[:, 1] = pts[:, 1] + b * pts[:, 0] ** 2 - _VAR1 * b
    return pts


class BananaTarget(Target):
    name = 'banana'

    def __init__(self, dim: int, b: float = CURVATURE):
        if dim < 2:
            raise ValueError('banana target needs dim >= 2')
        super().__init__(dim)
        self.b = float(b)
        self._log_norm = -0.5 * (dim * np.log(2.0 * np.pi) + np.log(_VAR1))
        scale = np.ones(dim)
        scale[:2] = _VAR1
        self._g0 = single_component(StudentT(np.zeros(dim), np.diag(scale), 5.0))

    def log_density(self, x: Any) -> Any:
        y = twist(x, self.b)
        quad = y[:, 0] ** 2 / _VAR1 + np.sum(y[:, 1:] ** 2, axis=1)
        out = self._log_norm - 0.5 * quad
        return float(out[0]) if np.ndim(x) == 1 else out

    def envelope(self, initial: Optional[TMixture] = None) -> TMixture:
        return self._g0

    def ridge_point(self) -> np.ndarray:
        """The point with phi_b(x) = 0."""
        x = np.zeros(self.dim)
        x[1] = _VAR1 * self.b
        return x

    def to_config(self) -> Dict[str, Any]:
        return {'name': self.name, 'dim': self.dim, 'b': self.b}


def banana_target(d: int, b: float = CURVATURE) -> BananaTarget:
    return BananaTarget(d, b)
