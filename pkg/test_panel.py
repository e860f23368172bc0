"""
Tests for panel loading, transforms, standardization and design construction
"""

import os
import sys

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from forecast_lab.errors import (
    CatalogError,
    DataError,
    DateGapError,
    DuplicateIdError,
    EmptyDesignError,
    InsufficientHistoryError,
    TransformDomainError,
)
from forecast_lab.panel import (
    Panel,
    SeriesMeta,
    aligned_window,
    apply_transform,
    build_design,
    compute_window_stats,
    load_catalog_csv,
    load_panel_csv,
    target_history,
    transform_panel,
    transform_report,
    window_stats_at,
    write_catalog_csv,
    write_panel_csv,
)
from forecast_lab.synthetic import generate_synthetic_panel, generate_synthetic_with_truth


def make_panel(T=40, p=4, codes=None, seed=0, start='2000-01'):
    """Small random panel: p predictors plus target 'y'"""
    rng = np.random.default_rng(seed)
    dates = pd.date_range(start, periods=T, freq='MS')
    ids = [f"x{j}" for j in range(p)]
    frame = pd.DataFrame(rng.standard_normal((T, p)) + 5.0, index=dates, columns=ids)
    frame['y'] = rng.standard_normal(T)
    codes = codes or {}
    metas = {c: SeriesMeta(id=c, name=c, transform_code=codes.get(c, 1)) for c in frame.columns}
    return Panel(frame=frame, metas=metas, target_id='y')


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------

def test_first_difference_cumsum_recovers_series():
    rng = np.random.default_rng(1)
    x = np.cumsum(rng.standard_normal(200)) + 100.0
    d = apply_transform(x, 2)
    assert np.isnan(d[0])
    rebuilt = x[0] + np.cumsum(d[1:])
    np.testing.assert_allclose(rebuilt, x[1:], atol=1e-12 * np.abs(x).max() * 10)


@pytest.mark.parametrize('code,lost', [(1, 0), (2, 1), (3, 2), (4, 0), (5, 1), (6, 2), (7, 2)])
def test_leading_missing_per_code(code, lost):
    x = np.linspace(1.0, 3.0, 12) ** 2
    out = apply_transform(x, code)
    assert np.all(np.isnan(out[:lost]))
    assert np.all(np.isfinite(out[lost:]))


def test_log_difference_matches_numpy():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    np.testing.assert_allclose(apply_transform(x, 5)[1:], np.log(2.0) * np.ones(3))


def test_percent_change_difference():
    x = np.array([100.0, 110.0, 121.0, 127.05])
    out = apply_transform(x, 7)
    np.testing.assert_allclose(out[2:], [0.0, 0.05 - 0.10], atol=1e-12)


def test_log_code_on_zero_names_column_and_date():
    s = pd.Series([1.0, 2.0, 0.0, 3.0], index=pd.date_range('2001-01', periods=4, freq='MS'))
    with pytest.raises(TransformDomainError) as excinfo:
        apply_transform(s, 5, column='ip')
    assert excinfo.value.column == 'ip'
    assert excinfo.value.date == '2001-03'
    assert 'ip' in str(excinfo.value)


def test_missing_values_pass_through():
    x = np.array([1.0, np.nan, 3.0, 4.0])
    out = apply_transform(x, 2)
    assert np.isnan(out[1]) and np.isnan(out[2])
    assert out[3] == pytest.approx(1.0)


def test_transform_report_counts_lost_rows():
    panel = make_panel(codes={'x0': 2, 'x1': 6})
    report = transform_report(panel)
    rows = report.rows.set_index('id')
    assert rows.loc['x0', 'rows_lost'] == 1
    assert rows.loc['x1', 'rows_lost'] == 2
    assert report.dropped() == []
    assert list(transform_panel(panel).columns) == list(panel.frame.columns)


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------

def test_window_stats_drop_constant_and_missing_columns():
    window = pd.DataFrame({
        'a': [1.0, 2.0, 3.0, 4.0],
        'b': [5.0, 5.0, 5.0, 5.0],
        'c': [1.0, np.nan, 2.0, 3.0],
    })
    stats = compute_window_stats(window)
    assert stats.retained_ids == ('a',)
    assert stats.means['a'] == pytest.approx(2.5)
    assert stats.sds['a'] == pytest.approx(np.std([1, 2, 3, 4], ddof=1))


def test_window_stats_empty_design():
    window = pd.DataFrame({'a': [1.0, 1.0, 1.0], 'b': [2.0, 2.0, 2.0]})
    with pytest.raises(EmptyDesignError):
        compute_window_stats(window)


def test_missing_value_before_window_excludes_level_series():
    panel = make_panel(T=40, codes={'x0': 2})
    panel.frame.iloc[0, panel.frame.columns.get_loc('x1')] = np.nan
    assert panel.lead_rows() == 1
    stats = window_stats_at(panel, panel.frame.index[-1], lag=1)
    assert 'x1' not in stats.retained_ids
    assert {'x0', 'x2', 'x3'} <= set(stats.retained_ids)


# ---------------------------------------------------------------------------
# Designs
# ---------------------------------------------------------------------------

def test_design_size_for_forty_months():
    panel = make_panel(T=40)
    origin = panel.dates[-1]
    stats = window_stats_at(panel, origin, lag=0, min_window=36)
    design = build_design(panel, horizon=1, lag=0, origin=origin, stats=stats, min_window=36)
    assert design.n == 39
    assert design.k == 4
    assert design.target_dates[-1] == origin
    np.testing.assert_allclose(design.y, panel.frame['y'].to_numpy()[1:])


def test_lag_shifts_predictor_rows():
    panel = make_panel(T=40)
    origin = panel.dates[-1]
    stats = window_stats_at(panel, origin, lag=1, min_window=36)
    d0 = build_design(panel, 1, 0, origin, stats, min_window=36)
    d1 = build_design(panel, 1, 1, origin, stats, min_window=36)
    np.testing.assert_allclose(d1.X, d0.X[:-1])
    np.testing.assert_allclose(d1.y, d0.y[1:])
    np.testing.assert_allclose(d1.x_oos, d0.X[-1])


def test_standardized_training_columns():
    panel = make_panel(T=60)
    origin = panel.dates[-1]
    stats = window_stats_at(panel, origin, lag=1, min_window=36)
    aligned = aligned_window(panel, origin, 1, stats, min_window=36)
    np.testing.assert_allclose(aligned.X.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(aligned.X.std(axis=0, ddof=1), 1.0, atol=1e-12)


def test_design_never_reads_after_origin():
    panel = make_panel(T=60)
    origin = panel.dates[45]
    stats = window_stats_at(panel, origin, lag=1, min_window=36)
    before = build_design(panel, 3, 1, origin, stats, min_window=36)

    frame = panel.frame.copy()
    frame.iloc[46:] = 1e6
    shifted = Panel(frame=frame, metas=panel.metas, target_id='y')
    stats2 = window_stats_at(shifted, origin, lag=1, min_window=36)
    after = build_design(shifted, 3, 1, origin, stats2, min_window=36)

    np.testing.assert_array_equal(before.X, after.X)
    np.testing.assert_array_equal(before.y, after.y)
    np.testing.assert_array_equal(before.x_oos, after.x_oos)


def test_differenced_target_history_starts_after_lost_rows():
    panel = make_panel(T=50, codes={'y': 2, 'x0': 3})
    origin = panel.dates[-1]
    history = target_history(panel, origin)
    assert len(history) == 48
    assert np.all(np.isfinite(history))


def test_insufficient_history():
    panel = make_panel(T=30)
    with pytest.raises(InsufficientHistoryError):
        window_stats_at(panel, panel.dates[-1], lag=1, min_window=36)


# ---------------------------------------------------------------------------
# CSV IO
# ---------------------------------------------------------------------------

def test_csv_round_trip(tmp_path):
    panel = make_panel(T=24, codes={'x1': 5})
    panel_path = tmp_path / 'panel.csv'
    catalog_path = tmp_path / 'catalog.csv'
    write_panel_csv(panel, panel_path)
    metas = dict(panel.metas)
    metas['y'] = SeriesMeta(id='y', name='y', transform_code=1, source_tag='target')
    write_catalog_csv(metas, catalog_path)

    loaded = load_panel_csv(panel_path, load_catalog_csv(catalog_path))
    assert loaded.target_id == 'y'
    assert loaded.metas['x1'].transform_code == 5
    pd.testing.assert_frame_equal(loaded.frame, panel.frame, check_freq=False)


def test_duplicate_catalog_id(tmp_path):
    path = tmp_path / 'catalog.csv'
    path.write_text("id,name,transform_code,source_tag\na,A,1,\na,B,2,\n")
    with pytest.raises(DuplicateIdError):
        load_catalog_csv(path)


def test_panel_column_without_catalog_entry(tmp_path):
    catalog = tmp_path / 'catalog.csv'
    catalog.write_text("id,name,transform_code,source_tag\ny,Y,1,target\n")
    panel = tmp_path / 'panel.csv'
    panel.write_text("date,y,mystery\n2000-01-01,1,2\n2000-02-01,2,3\n")
    with pytest.raises(CatalogError):
        load_panel_csv(panel, load_catalog_csv(catalog))


def test_unparseable_date_is_a_data_error(tmp_path):
    catalog = tmp_path / 'catalog.csv'
    catalog.write_text("id,name,transform_code,source_tag\ny,Y,1,target\n")
    panel = tmp_path / 'panel.csv'
    panel.write_text("date,y\n2000-01-01,1\nnot-a-month,2\n")
    with pytest.raises(DataError):
        load_panel_csv(panel, load_catalog_csv(catalog))


def test_invalid_transform_code(tmp_path):
    path = tmp_path / 'catalog.csv'
    path.write_text("id,name,transform_code,source_tag\na,A,9,\n")
    with pytest.raises(CatalogError):
        load_catalog_csv(path)


def test_month_gap_rejected():
    dates = pd.DatetimeIndex(['2000-01-01', '2000-02-01', '2000-04-01'])
    frame = pd.DataFrame({'y': [1.0, 2.0, 3.0]}, index=dates)
    with pytest.raises(DateGapError):
        Panel(frame=frame, metas={'y': SeriesMeta('y', 'y', 1)}, target_id='y')


# ---------------------------------------------------------------------------
# Synthetic panels
# ---------------------------------------------------------------------------

def test_synthetic_panel_is_reproducible():
    a = generate_synthetic_panel(seed=3, T=80, p=12, r_true=2)
    b = generate_synthetic_panel(seed=3, T=80, p=12, r_true=2)
    c = generate_synthetic_panel(seed=4, T=80, p=12, r_true=2)
    pd.testing.assert_frame_equal(a.frame, b.frame)
    assert not np.allclose(a.frame.to_numpy(), c.frame.to_numpy())
    assert a.frame.shape == (80, 13)
    assert a.metas['y'].source_tag == 'target'


def test_synthetic_truth_sparse_ids():
    panel, truth = generate_synthetic_with_truth(seed=5, T=100, p=20, r_true=3)
    assert len(truth['sparse_ids']) == 5
    assert set(truth['sparse_ids']) <= set(panel.predictor_ids)
    assert truth['factors'].shape == (100, 3)
