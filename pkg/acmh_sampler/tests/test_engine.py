import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from acmh_sampler.chain import RunConfig
from acmh_sampler.engine import ExperimentConfig, run_experiment, variant_run_config
from acmh_sampler.fit_mixture import FitConfig
from acmh_sampler.smc_init import SMCConfig
from acmh_sampler.utils import run_io
import main as cli


TIMING_FIELDS = {'cpu_seconds', 'ii_per_time'}


def _tiny_run(seed=3):
    return RunConfig(
        n_burnin=200, n_sample=200, refit_stage1=100, refit_stage2=100, a_n=10,
        fit=FitConfig(max_components=3, init_components=2, max_iters=30),
        smc=SMCConfig(T=2, n_particles=100, n_moves=2),
        seed=seed,
    )


def _tiny_experiment(tmp_path, **kwargs):
    base = ExperimentConfig(target='msn', dim=1, run=_tiny_run(), replications=2,
                            out_dir=str(tmp_path / 'runs'), lpds_test_size=500, acf_lags=20)
    return replace(base, **kwargs)


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        ExperimentConfig(target='nope', dim=2)
    with pytest.raises(ValueError):
        ExperimentConfig(target='msn', dim=2, variant='gibbs')
    with pytest.raises(ValueError):
        ExperimentConfig(target='logistic')
    with pytest.raises(ValueError):
        ExperimentConfig(target='msn', dim=2, replications=0)
    cfg = _tiny_experiment(tmp_path)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_variant_mapping():
    base = _tiny_run()
    assert variant_run_config('acmh', base) == base
    assert variant_run_config('acmh-indep', base).fixed_delta == 1.0
    assert variant_run_config('acmh-no-rw', base).use_rw is False
    assert variant_run_config('acmh-no-block', base).proposal.gamma == 0.0


def test_acmh_experiment_writes_run_directories(tmp_path):
    cfg = _tiny_experiment(tmp_path)
    assert run_experiment(cfg) == 0
    rep = Path(cfg.out_dir) / 'acmh' / 'rep_0'
    for name in ('config.json', 'particles.csv', 'chain_main.csv', 'chain_trial.csv',
                 'trace.csv', 'acf.csv', 'report.json'):
        assert (rep / name).is_file(), name
    assert list(rep.glob('mixture_*.json'))

    chain = run_io.read_chain_csv(rep / 'chain_main.csv')
    assert chain['iterates'].shape == (200, 1)
    report = run_io.read_json(rep / 'report.json')
    assert report['seed'] == 3 and report['d'] == 1
    assert report['acc_rate'] == pytest.approx(chain['accepted'].mean())
    assert report['lpds'] is not None and 'censored_score' in report

    rows = run_io.read_summary_csv(Path(cfg.out_dir) / 'acmh' / 'summary.csv')
    assert [r['replication'] for r in rows] == ['0', '1', 'mean']
    mean_acc = (float(rows[0]['acc_rate']) + float(rows[1]['acc_rate'])) / 2
    assert float(rows[2]['acc_rate']) == pytest.approx(mean_acc)


def test_fit_reports_sit_next_to_mixture_snapshots(tmp_path):
    cfg = _tiny_experiment(tmp_path, replications=1)
    assert run_experiment(cfg) == 0
    rep = Path(cfg.out_dir) / 'acmh' / 'rep_0'
    snapshots = {p.name[len('mixture_'):] for p in rep.glob('mixture_*.json')}
    reports = {p.name[len('fit_report_'):] for p in rep.glob('fit_report_*.json')}
    assert '0.json' in snapshots and snapshots == reports
    first = run_io.read_json(rep / 'fit_report_0.json')
    assert first['G_selected'] >= 1 and first['objective_trace']
    assert first['n_points'] == 100


def test_experiment_is_reproducible(tmp_path):
    first = _tiny_experiment(tmp_path / 'a', replications=1)
    second = _tiny_experiment(tmp_path / 'b', replications=1)
    assert run_experiment(first) == 0 and run_experiment(second) == 0
    rows_a = run_io.read_summary_csv(Path(first.out_dir) / 'acmh' / 'summary.csv')
    rows_b = run_io.read_summary_csv(Path(second.out_dir) / 'acmh' / 'summary.csv')
    for a, b in zip(rows_a, rows_b):
        assert {k: v for k, v in a.items() if k not in TIMING_FIELDS} == \
               {k: v for k, v in b.items() if k not in TIMING_FIELDS}
    chain_a = (Path(first.out_dir) / 'acmh' / 'rep_0' / 'chain_main.csv').read_bytes()
    chain_b = (Path(second.out_dir) / 'acmh' / 'rep_0' / 'chain_main.csv').read_bytes()
    assert chain_a == chain_b


def test_arwmh_variant(tmp_path):
    cfg = _tiny_experiment(tmp_path, target='banana', dim=2, variant='arwmh', replications=1,
                           censor_threshold=None)
    assert run_experiment(cfg) == 0
    rep = Path(cfg.out_dir) / 'arwmh' / 'rep_0'
    assert not (rep / 'chain_trial.csv').exists()
    chain = run_io.read_chain_csv(rep / 'chain_main.csv')
    assert set(chain['branch']) == {'rw'}


def test_logistic_experiment_scores_holdout(tmp_path):
    rng = np.random.default_rng(4)
    X = rng.standard_normal((60, 2))
    y = (X[:, 0] + 0.5 * rng.standard_normal(60) > 0).astype(int)
    data = tmp_path / 'data.csv'
    lines = ['a,b,y'] + [f'{a},{b},{c}' for (a, b), c in zip(X, y)]
    data.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    cfg = _tiny_experiment(tmp_path, target='logistic', dim=None, data_path=str(data),
                           test_fraction=0.25, replications=1)
    assert run_experiment(cfg) == 0
    report = run_io.read_json(Path(cfg.out_dir) / 'acmh' / 'rep_0' / 'report.json')
    assert report['d'] == 3
    assert report['crps'] is not None and report['crps'] >= 0.0


def test_failing_replication_gives_status_one(tmp_path):
    data = tmp_path / 'bad.csv'
    data.write_text('a,b\n1,2\n', encoding='utf-8')
    cfg = _tiny_experiment(tmp_path, target='logistic', dim=None, data_path=str(data), replications=1)
    assert run_experiment(cfg) == 1
    assert run_io.read_summary_csv(Path(cfg.out_dir) / 'acmh' / 'summary.csv') == []


def test_cli_runs_from_config_file(tmp_path):
    config = {
        'target': 'msn', 'dim': 1, 'replications': 1, 'lpds_test_size': 200, 'acf_lags': 10,
        'run': _tiny_run().to_dict(),
    }
    path = tmp_path / 'cfg.json'
    path.write_text(json.dumps(config), encoding='utf-8')
    out = tmp_path / 'cli'
    assert cli.main(['--config', str(path), '--out', str(out)]) == 0
    assert (out / 'acmh' / 'summary.csv').is_file()


def test_cli_rejects_invalid_config(tmp_path):
    assert cli.main(['--target', 'msn', '--dim', '2', '--iters', '7', '--out', str(tmp_path)]) == 2
    assert cli.main(['--out', str(tmp_path)]) == 2
    missing = tmp_path / 'missing.json'
    assert cli.main(['--target', 'msn', '--dim', '1', '--config', str(missing)]) == 2


def test_chain_csv_round_trip(tmp_path):
    from acmh_sampler.records import ChainOutput

    rng = np.random.default_rng(5)
    chain = ChainOutput(iterates=rng.standard_normal((5, 3)) * 1e-7,
                        accept_flags=np.array([1, 0, 1, 1, 0], dtype=bool),
                        branch_tags=['cmh', 'block', 'independent-g0', 'rw', 'cmh'])
    run_io.write_chain_csv(tmp_path / 'c.csv', chain)
    back = run_io.read_chain_csv(tmp_path / 'c.csv')
    assert np.array_equal(back['iterates'], chain.iterates)
    assert np.array_equal(back['accepted'], chain.accept_flags)
    assert back['branch'] == chain.branch_tags
