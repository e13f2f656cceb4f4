"""Package-wide defaults loaded from ``config/defaults.json``.

The JSON document is read once at import. Set ``ACMH_DEFAULTS`` to the path
of another JSON file to replace it (sections missing from that file fall back
to the built-in values below).
"""
from __future__ import annotations

from typing import Any, Dict
import json
import logging
import os
from pathlib import Path

_logger = logging.getLogger(__name__)

_CONFIG_PATH = Path(__file__).resolve().parent / 'config' / 'defaults.json'

_BUILTIN: Dict[str, Dict[str, Any]] = {
    'proposal': {'beta0': 0.001, 'gamma': 0.2, 'iota_rw': 10, 'rho_beta': [1.0, 1.0], 'block_target_size': 10},
    'run': {'n_burnin': 50000, 'n_sample': 50000, 'refit_stage1': 2000, 'refit_stage2': 4000, 'a_n': 10},
    'smc': {'T': 10, 'n_particles': 500, 'n_moves': 10, 'pi0_nu': 3.0, 'prepass_steps': 1000},
    'fit': {
        'max_components': 10, 'nu_grid': [1, 2, 4, 8, 16, 32], 'weight_floor': 0.02,
        'max_iters': 200, 'tol': 1e-6, 'init_components': 5,
    },
    'diagnostics': {
        'iact_max_lag': 1000, 'lpds_test_size': 5000, 'log_density_floor': -745.0,
        'acf_lags': 500, 'trace_columns': 2,
    },
}


def _load_defaults(path: Path) -> Dict[str, Any]:
    try:
        with path.open('r', encoding='utf-8') as fh:
            return json.load(fh)
    except FileNotFoundError:
        return {}
    except json.JSONDecodeError as exc:
        _logger.debug('Invalid defaults config %s: %s', path, exc)
        return {}


def _merge(loaded: Dict[str, Any]) -> Dict[str, Dict[str, Any]]:
    out = {section: dict(values) for section, values in _BUILTIN.items()}
    for section, values in loaded.items():
        if isinstance(values, dict) and section in out:
            out[section].update(values)
    return out


_env_path = os.environ.get('ACMH_DEFAULTS')
DEFAULTS: Dict[str, Dict[str, Any]] = _merge(_load_defaults(Path(_env_path) if _env_path else _CONFIG_PATH))


def section(name: str) -> Dict[str, Any]:
    """Return a copy of one defaults section ('proposal', 'run', 'smc', 'fit', 'diagnostics')."""
    return dict(DEFAULTS[name])


__all__ = ['DEFAULTS', 'section']
