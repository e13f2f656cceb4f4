"""Bayesian logistic regression with weakly informative Cauchy priors.

Predictors are standardized to mean 0 and standard deviation 0.5; the
intercept gets a Cauchy(0, 10) prior and each coefficient Cauchy(0, 2.5).
The parameter vector is theta = (beta0, beta1, ..., betap), so d = p + 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple
import csv
import logging

import numpy as np
from scipy.special import expit
from scipy.stats import cauchy

from ..mixture_t import TMixture
from .base import Target

_logger = logging.getLogger(__name__)

INTERCEPT_SCALE = 10.0
COEF_SCALE = 2.5
TARGET_SD = 0.5
LABEL_COLUMN = 'y'


@dataclass(frozen=True)
class Standardization:
    """Column means and standard deviations of the training predictors."""
    mean: Tuple[float, ...]
    sd: Tuple[float, ...]

    @classmethod
    def fit(cls, X: np.ndarray) -> 'Standardization':
        p = X.shape[1]
        if X.shape[0] == 0:
            return cls((0.0,) * p, (TARGET_SD,) * p)
        sd = X.std(axis=0)
        constant = [j for j in range(p) if not sd[j] > 0]
        if constant:
            raise ValueError(f'predictor columns {constant} are constant; cannot standardize')
        return cls(tuple(float(v) for v in X.mean(axis=0)), tuple(float(v) for v in sd))

    def apply(self, X: Any) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return TARGET_SD * (X - np.asarray(self.mean)) / np.asarray(self.sd)

    def to_dict(self) -> Dict[str, Any]:
        return {'mean': list(self.mean), 'sd': list(self.sd)}


class IndependentCauchy:
    """Product of centred Cauchy densities with per-coordinate scales."""

    def __init__(self, scales: Sequence[float]):
        self.scales = np.asarray(scales, dtype=float)
        self.d = self.scales.shape[0]

    def logpdf(self, x: Any) -> Any:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        out = cauchy.logpdf(pts, scale=self.scales).sum(axis=1)
        return float(out[0]) if np.ndim(x) == 1 else out

    def sample(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        n = 1 if size is None else int(size)
        out = rng.standard_cauchy((n, self.d)) * self.scales
        return out[0] if size is None else out


class LogisticTarget(Target):
    name = 'logistic'
    is_data_target = True

    def __init__(self, design: Any, labels: Any, standardization: Optional[Standardization] = None):
        X = np.asarray(design, dtype=float)
        if X.ndim != 2:
            raise ValueError('design must be an (n, p) matrix')
        y = np.asarray(labels, dtype=float).reshape(-1)
        n, p = X.shape
        if y.shape[0] != n:
            raise ValueError(f'{y.shape[0]} labels for {n} design rows')
        if not np.all((y == 0) | (y == 1)):
            raise ValueError('labels must be 0 or 1')
        if 0 < n < p:
            raise ValueError(f'need at least p={p} observations, got {n}')
        super().__init__(p + 1)
        self.p = p
        self.standardization = standardization or Standardization.fit(X)
        self.Z = self.standardization.apply(X) if n else np.zeros((0, p))
        self.y = y
        self.prior = IndependentCauchy([INTERCEPT_SCALE] + [COEF_SCALE] * p)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def linear_predictor(self, theta: np.ndarray, Z: np.ndarray) -> np.ndarray:
        """(m, n) matrix of beta0 + z'beta for each parameter row."""
        return theta[:, :1] + theta[:, 1:] @ Z.T

    def log_likelihood(self, x: Any) -> Any:
        theta = np.atleast_2d(np.asarray(x, dtype=float))
        if self.n == 0:
            out = np.zeros(theta.shape[0])
        else:
            eta = self.linear_predictor(theta, self.Z)
            out = (self.y * eta - np.logaddexp(0.0, eta)).sum(axis=1)
        return float(out[0]) if np.ndim(x) == 1 else out

    def log_density(self, x: Any) -> Any:
        theta = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.atleast_1d(self.log_likelihood(theta)) + np.atleast_1d(self.prior.logpdf(theta))
        return float(out[0]) if np.ndim(x) == 1 else out

    def envelope(self, initial: Optional[TMixture] = None) -> IndependentCauchy:
        return self.prior

    def predictive_mean(self, draws: Any, X_new: Any) -> np.ndarray:
        """mu(x) = mean over posterior draws of expit(beta0 + x'beta), x on the raw scale."""
        theta = np.atleast_2d(np.asarray(draws, dtype=float))
        Z = self.standardization.apply(X_new)
        return expit(self.linear_predictor(theta, Z)).mean(axis=0)

    def to_config(self) -> Dict[str, Any]:
        return {
            'name': self.name, 'dim': self.dim, 'n': self.n, 'p': self.p,
            'standardization': self.standardization.to_dict(),
        }


def load_csv(path: Path | str) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    """Read a header CSV with label column ``y``; returns (X, y, predictor names)."""
    path = Path(path)
    with path.open('r', encoding='utf-8', newline='') as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or LABEL_COLUMN not in reader.fieldnames:
            raise ValueError(f'{path}: header must contain a {LABEL_COLUMN!r} column')
        names = [c for c in reader.fieldnames if c != LABEL_COLUMN]
        rows = list(reader)
    try:
        X = np.array([[float(r[c]) for c in names] for r in rows], dtype=float).reshape(len(rows), len(names))
        y = np.array([float(r[LABEL_COLUMN]) for r in rows], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValueError(f'{path}: non-numeric entry: {exc}') from exc
    _logger.debug('Loaded %d rows, %d predictors from %s', X.shape[0], X.shape[1], path)
    return X, y, names


def train_test_split(
    X: np.ndarray, y: np.ndarray, test_fraction: float, rng: np.random.Generator,
) -> Tuple[Tuple[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]:
    """Random partition into ((X_train, y_train), (X_test, y_test))."""
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError('test_fraction must be in [0, 1)')
    n = X.shape[0]
    order = rng.permutation(n)
    n_test = int(round(test_fraction * n))
    test, train = order[:n_test], order[n_test:]
    return (X[train], y[train]), (X[test], y[test])


def logistic_target(design: Any, labels: Any) -> LogisticTarget:
    return LogisticTarget(design, labels)
