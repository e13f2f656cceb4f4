"""Writers and readers for the files of a run directory.

Every numeric cell is written with 17 significant digits so that chains
reload bit-for-bit.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence
import csv
import json
import math

import numpy as np

from ..diagnostics import autocorrelation

SUMMARY_FIELDS = [
    'replication', 'variant', 'd', 'acc_rate', 'iact_avg', 'iact_max', 'sqdist_avg', 'sqdist_min',
    'lpds', 'cpu_seconds', 'ii_per_time', 'acc_over_iact',
]


def fmt(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return '%.17g' % float(value)
    if value is None:
        return ''
    return str(value)


def coordinate_names(d: int) -> List[str]:
    return [f'x{j + 1}' for j in range(d)]


def write_json(path: Path, data: Dict[str, Any]) -> None:
    with Path(path).open('w', encoding='utf-8') as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write('\n')


def read_json(path: Path) -> Dict[str, Any]:
    with Path(path).open('r', encoding='utf-8') as fh:
        return json.load(fh)


def write_chain_csv(path: Path, chain: Any) -> None:
    """iter, accepted, branch, x1..xd; one row per recorded iteration."""
    names = coordinate_names(chain.d)
    with Path(path).open('w', encoding='utf-8', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(['iter', 'accepted', 'branch'] + names)
        for i in range(chain.n):
            writer.writerow([i + 1, fmt(chain.accept_flags[i]), chain.branch_tags[i]]
                            + [fmt(v) for v in chain.iterates[i]])


def read_chain_csv(path: Path) -> Dict[str, Any]:
    """Returns {'iterates', 'accepted', 'branch'} from a chain CSV."""
    with Path(path).open('r', encoding='utf-8', newline='') as fh:
        reader = csv.DictReader(fh)
        names = [c for c in (reader.fieldnames or []) if c.startswith('x')]
        rows = list(reader)
    iterates = np.array([[float(r[c]) for c in names] for r in rows], dtype=float).reshape(len(rows), len(names))
    return {
        'iterates': iterates,
        'accepted': np.array([r['accepted'] == '1' for r in rows], dtype=bool),
        'branch': [r['branch'] for r in rows],
    }


def write_matrix_csv(path: Path, X: np.ndarray, names: Optional[Sequence[str]] = None) -> None:
    X = np.atleast_2d(X)
    with Path(path).open('w', encoding='utf-8', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names) if names else coordinate_names(X.shape[1]))
        for row in X:
            writer.writerow([fmt(v) for v in row])


def write_trace_csv(path: Path, iterates: np.ndarray, columns: int = 2) -> None:
    """iter, x1..xk for the first ``columns`` marginals."""
    k = min(columns, iterates.shape[1])
    with Path(path).open('w', encoding='utf-8', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(['iter'] + coordinate_names(k))
        for i, row in enumerate(iterates[:, :k]):
            writer.writerow([i + 1] + [fmt(v) for v in row])


def write_acf_csv(path: Path, iterates: np.ndarray, lags: int = 500) -> None:
    """lag, x1..xd autocorrelations; constant marginals are left blank."""
    n, d = iterates.shape
    max_lag = min(lags, n - 1)
    cols = []
    for j in range(d):
        col = iterates[:, j]
        cols.append(autocorrelation(col, max_lag) if np.ptp(col) > 0 else None)
    with Path(path).open('w', encoding='utf-8', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(['lag'] + coordinate_names(d))
        for t in range(max_lag + 1):
            writer.writerow([t] + [fmt(c[t]) if c is not None else '' for c in cols])


def mean_row(rows: Iterable[Dict[str, Any]]) -> Dict[str, Any]:
    rows = list(rows)
    out: Dict[str, Any] = {'replication': 'mean'}
    for key in SUMMARY_FIELDS[1:]:
        values = [r.get(key) for r in rows]
        if key == 'variant':
            out[key] = values[0] if values else ''
            continue
        nums = [float(v) for v in values if v not in (None, '') and math.isfinite(float(v))]
        out[key] = sum(nums) / len(nums) if nums else None
    return out


def write_summary_csv(path: Path, rows: Sequence[Dict[str, Any]]) -> None:
    with Path(path).open('w', encoding='utf-8', newline='') as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS, extrasaction='ignore')
        writer.writeheader()
        for row in list(rows) + ([mean_row(rows)] if rows else []):
            writer.writerow({k: fmt(row.get(k)) for k in SUMMARY_FIELDS})


def read_summary_csv(path: Path) -> List[Dict[str, str]]:
    with Path(path).open('r', encoding='utf-8', newline='') as fh:
        return list(csv.DictReader(fh))
