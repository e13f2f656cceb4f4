"""Chain records shared by the ACMH runner and the baseline samplers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List
import hashlib

import numpy as np

from .mixture_t import TMixture


class History:
    """The trial-chain history: an append-only list of states."""

    def __init__(self, initial: Any):
        init = np.atleast_2d(np.asarray(initial, dtype=float))
        self._states: List[np.ndarray] = [row.copy() for row in init]
        self.d = init.shape[1]
        self.append_count = 0
        self._cache: np.ndarray | None = init.copy()

    def append(self, x: Any) -> None:
        row = np.array(x, dtype=float).reshape(-1)
        if row.shape[0] != self.d:
            raise ValueError('history state has the wrong dimension')
        self._states.append(row)
        self.append_count += 1
        self._cache = None

    def __len__(self) -> int:
        return len(self._states)

    @property
    def states(self) -> np.ndarray:
        """Read-only snapshot of all states, shape (len, d)."""
        if self._cache is None:
            self._cache = np.vstack(self._states)
        view = self._cache.view()
        view.setflags(write=False)
        return view

    def digest(self) -> str:
        """sha256 of the state bytes; identifies the exact input of a refit."""
        return hashlib.sha256(np.ascontiguousarray(self.states).tobytes()).hexdigest()


@dataclass
class ChainOutput:
    """Sampling-phase record of one chain.

    ``accept_flags`` refers to the reversible (or baseline) step;
    ``rw_accept_flags`` is -1 where no random-walk step was composed.
    """
    iterates: np.ndarray
    accept_flags: np.ndarray
    branch_tags: List[str]
    mixture_snapshots: Dict[int, TMixture] = field(default_factory=dict)
    rw_accept_flags: np.ndarray | None = None
    burnin_accept_rate: float = float('nan')
    cpu_seconds: float = 0.0
    refits: List[Dict[str, Any]] = field(default_factory=list)
    fit_reports: Dict[int, Dict[str, Any]] = field(default_factory=dict)

    def __post_init__(self):
        if self.iterates.shape[0] != self.accept_flags.shape[0] or len(self.branch_tags) != self.iterates.shape[0]:
            raise ValueError('iterates, accept flags and branch tags must have the same length')

    @property
    def n(self) -> int:
        return self.iterates.shape[0]

    @property
    def d(self) -> int:
        return self.iterates.shape[1]

    @property
    def accept_rate(self) -> float:
        return float(np.mean(self.accept_flags)) if self.n else float('nan')


__all__ = ['History', 'ChainOutput']
