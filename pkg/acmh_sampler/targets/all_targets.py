"""Authoritative target registry.

Synthetic targets (built from a dimension):
- msn: two-component skew-normal mixture
- banana: twisted Gaussian

Data targets (built from a CSV):
- logistic: Cauchy-prior logistic regression, label column ``y``
- covariance: reference-prior covariance posterior on log(Sigma)
"""
from __future__ import annotations

from typing import Any, Dict, Optional

import numpy as np

from .banana import BananaTarget
from .base import Target
from .covariance import CovarianceTarget
from .logistic import LogisticTarget
from .msn import SkewNormalMixtureTarget

ALL_TARGETS: tuple = (
    SkewNormalMixtureTarget,
    BananaTarget,
    LogisticTarget,
    CovarianceTarget,
)

TARGET_BY_NAME: dict = {cls.name: cls for cls in ALL_TARGETS}


def make_target(name: str, dim: Optional[int] = None, data: Any = None,
                params: Optional[Dict[str, Any]] = None) -> Target:
    """Build a registered target.

    ``data`` is the design/label pair ``(X, y)`` for ``logistic`` and the
    observation matrix for ``covariance``; synthetic targets need ``dim``.
    """
    try:
        cls = TARGET_BY_NAME[name]
    except KeyError:
        raise ValueError(f'unknown target {name!r}; choose from {sorted(TARGET_BY_NAME)}') from None
    params = dict(params or {})
    if cls.is_data_target:
        if data is None:
            raise ValueError(f'target {name!r} needs data')
        if cls is LogisticTarget:
            X, y = data
            return LogisticTarget(X, y)
        return CovarianceTarget(np.asarray(data, dtype=float), **params)
    if dim is None:
        raise ValueError(f'target {name!r} needs a dimension')
    return cls(int(dim), **params)


__all__ = ('ALL_TARGETS', 'TARGET_BY_NAME', 'make_target')
