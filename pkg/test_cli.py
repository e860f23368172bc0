"""
Tests for the command-line front end
"""

import json
import os
import sys

import pandas as pd
import pytest
import yaml
from typer.testing import CliRunner

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from forecast_lab.cli import app

runner = CliRunner()

EXPERIMENT = {
    'horizons': [1],
    'min_window': 36,
    'first_eval_date': '2005-07',
    'mcmc': {'n_iter': 1000, 'burn_in': 500},
    'factor_grid': {'r_max': 2, 'p_f_max': 1},
    'top_k': 3,
}


def write_config(path, **document):
    document.setdefault('verbosity', 0)
    with open(path, 'w', encoding='utf-8') as fh:
        yaml.safe_dump(document, fh)
    return str(path)


@pytest.fixture
def synthetic_inputs(tmp_path):
    config = write_config(tmp_path / 'synth.yaml',
                          synthetic={'seed': 3, 'T': 72, 'p': 8, 'r_true': 2, 'n_sparse': 2})
    result = runner.invoke(app, ['synth', '--config', config, '--out', str(tmp_path)])
    assert result.exit_code == 0, result.output
    return tmp_path / 'panel.csv', tmp_path / 'catalog.csv'


def test_synth_writes_panel_and_catalog(synthetic_inputs):
    panel_path, catalog_path = synthetic_inputs
    panel = pd.read_csv(panel_path)
    catalog = pd.read_csv(catalog_path)
    assert panel.shape == (72, 1 + 8 + 1)
    assert list(catalog.columns) == ['id', 'name', 'transform_code', 'source_tag']
    assert (catalog['source_tag'] == 'target').sum() == 1


def test_transform_reports_every_column(synthetic_inputs, tmp_path):
    panel_path, catalog_path = synthetic_inputs
    config = write_config(tmp_path / 'cfg.yaml', panel_csv=str(panel_path), catalog_csv=str(catalog_path))
    out = tmp_path / 'transformed'
    result = runner.invoke(app, ['transform', '-c', config, '-o', str(out)])
    assert result.exit_code == 0, result.output
    report = pd.read_csv(out / 'transform_report.csv')
    assert len(report) == 9
    assert set(report['status']) == {'retained'}


def test_transform_log_of_nonpositive_exits_with_data_code(tmp_path):
    pd.DataFrame({
        'date': ['2020-01-01', '2020-02-01', '2020-03-01'],
        'ip': [100.0, 0.0, 101.0],
        'y': [1.0, 2.0, 3.0],
    }).to_csv(tmp_path / 'panel.csv', index=False)
    pd.DataFrame({
        'id': ['ip', 'y'], 'name': ['Industrial production', 'Target'],
        'transform_code': [5, 1], 'source_tag': ['output', 'target'],
    }).to_csv(tmp_path / 'catalog.csv', index=False)
    config = write_config(tmp_path / 'cfg.yaml', panel_csv=str(tmp_path / 'panel.csv'),
                          catalog_csv=str(tmp_path / 'catalog.csv'))
    result = runner.invoke(app, ['transform', '-c', config, '-o', str(tmp_path / 'out')])
    assert result.exit_code == 3


def test_unparseable_panel_date_exits_with_data_code(tmp_path):
    pd.DataFrame({'date': ['2020-01-01', 'sometime', '2020-03-01'], 'y': [1.0, 2.0, 3.0]}) \
        .to_csv(tmp_path / 'panel.csv', index=False)
    pd.DataFrame({'id': ['y'], 'name': ['Target'], 'transform_code': [1], 'source_tag': ['target']}) \
        .to_csv(tmp_path / 'catalog.csv', index=False)
    config = write_config(tmp_path / 'cfg.yaml', panel_csv=str(tmp_path / 'panel.csv'),
                          catalog_csv=str(tmp_path / 'catalog.csv'))
    result = runner.invoke(app, ['transform', '-c', config, '-o', str(tmp_path / 'out')])
    assert result.exit_code == 3


def test_missing_config_file_exits_with_config_code(tmp_path):
    result = runner.invoke(app, ['transform', '-c', str(tmp_path / 'absent.yaml')])
    assert result.exit_code == 2


def test_unknown_model_exits_with_config_code(synthetic_inputs, tmp_path):
    panel_path, catalog_path = synthetic_inputs
    config = write_config(tmp_path / 'cfg.yaml', panel_csv=str(panel_path), catalog_csv=str(catalog_path),
                          experiment={**EXPERIMENT, 'models': ['ar2', 'random_forest']})
    result = runner.invoke(app, ['run', '-c', config, '-o', str(tmp_path / 'run')])
    assert result.exit_code == 2


def test_run_without_experiment_section(synthetic_inputs, tmp_path):
    panel_path, catalog_path = synthetic_inputs
    config = write_config(tmp_path / 'cfg.yaml', panel_csv=str(panel_path), catalog_csv=str(catalog_path))
    result = runner.invoke(app, ['run', '-c', config])
    assert result.exit_code == 2


def test_run_report_diagnose(synthetic_inputs, tmp_path):
    print("\n" + "=" * 70)
    print("CLI end-to-end: run, report, diagnose")
    print("=" * 70)
    panel_path, catalog_path = synthetic_inputs
    config = write_config(tmp_path / 'cfg.yaml', panel_csv=str(panel_path), catalog_csv=str(catalog_path),
                          experiment=EXPERIMENT)
    run_dir = tmp_path / 'run'
    result = runner.invoke(app, ['run', '-c', config, '-o', str(run_dir), '--threads', '1'])
    assert result.exit_code == 0, result.output

    with open(run_dir / 'run_manifest.json', encoding='utf-8') as fh:
        manifest = json.load(fh)
    assert manifest['target_id'] == 'y'
    assert len(manifest['inputs']['panel_csv']['sha256']) == 64
    assert manifest['threads'] == 1

    report_dir = tmp_path / 'report'
    result = runner.invoke(app, ['report', str(run_dir / 'store.npz'), '-c', config, '-o', str(report_dir)])
    assert result.exit_code == 0, result.output
    scores = pd.read_csv(report_dir / 'scores.csv')
    assert set(scores['model']) == {'ar2', 'hs', 'fa_ar', 'favar', 'dfm'}
    assert (report_dir / 'report.json').exists()

    diag_dir = tmp_path / 'diag'
    result = runner.invoke(app, ['diagnose', str(run_dir / 'store.npz'), '-c', config,
                                 '-o', str(diag_dir), '--top-k', '2'])
    assert result.exit_code == 0, result.output
    bars = pd.read_csv(diag_dir / 'drivers_h1_bars.csv')
    assert len(bars) == 8
    assert bars['count'].sum() == 2 * manifest['timings']['1']['origins']


def test_diagnose_without_horseshoe_cells(synthetic_inputs, tmp_path):
    panel_path, catalog_path = synthetic_inputs
    config = write_config(tmp_path / 'cfg.yaml', panel_csv=str(panel_path), catalog_csv=str(catalog_path),
                          experiment={**EXPERIMENT, 'models': ['ar2']})
    run_dir = tmp_path / 'run'
    assert runner.invoke(app, ['run', '-c', config, '-o', str(run_dir), '--threads', '1']).exit_code == 0
    result = runner.invoke(app, ['diagnose', str(run_dir / 'store.npz'), '-c', config, '-o', str(tmp_path)])
    assert result.exit_code == 3


def test_report_on_missing_store(tmp_path):
    result = runner.invoke(app, ['report', str(tmp_path / 'nothing.npz'), '-o', str(tmp_path)])
    assert result.exit_code == 5
