"""
Rolling Evaluation Harness
Expanding-window origins, per-cell refits of every model on the same
information set, and score-table assembly
"""

import hashlib
import time
import warnings
from dataclasses import dataclass, field
from datetime import datetime
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.linalg import LinAlgError

from .config import (
    BASELINE_TAG,
    FULL_SAMPLE_LABEL,
    METRIC_KINDS,
    UNASSIGNED_SUBSAMPLE_LABEL,
    ExperimentConfig,
    is_higher_better,
    subsample_table,
)
from .direct_models import ar_predictive, ar_regressor, fit_ar_flat, hs_direct_forecast
from .errors import (
    DataError,
    EmptyOriginSetError,
    ExcessiveFailuresError,
    ForecastLabError,
    InsufficientDataError,
    MissingBaselineError,
    ZeroVarianceError,
)
from .factor_models import (
    extract_factors_pca,
    favar_iterate,
    fit_dfm_twostep,
    fit_fa_ar,
    fit_var,
    kalman_filter_forecast,
    select_factor_config,
)
from .mcmc import RngStream
from .panel import (
    Panel,
    aligned_window,
    apply_transform,
    design_from_window,
    target_history,
    window_stats_at,
)
from .scoring import (
    LossSeries,
    ScoreCell,
    crps_sample,
    dm_test,
    interval_coverage,
    log_score,
    qws,
    relative_skill,
)
from .store import STATUS_FAILED, ForecastRecord, ForecastRecordStore
from .utils import banner, month_stamp, say

CELL_ERRORS = (ForecastLabError, ValueError, ArithmeticError, LinAlgError)


@dataclass
class ScoreTables:
    scores: pd.DataFrame
    coverage: pd.DataFrame
    cells: List[ScoreCell] = field(default_factory=list, repr=False)


# ---------------------------------------------------------------------------
# Origins
# ---------------------------------------------------------------------------

def _months_between(start, end) -> int:
    a, b = month_stamp(start), month_stamp(end)
    return (b.year - a.year) * 12 + (b.month - a.month)


def enumerate_origins(panel: Panel, h: int, config: ExperimentConfig) -> List[pd.Timestamp]:
    """
    Origins t0 .. T-h

    t0 is the later of (first evaluation date - h) and the first month with
    min_window usable rows.
    """
    T = len(panel)
    eval_pos = _months_between(panel.dates[0], config.first_eval_date)
    if eval_pos > T - 1:
        raise EmptyOriginSetError(f"First evaluation date {config.first_eval_date} is after the panel end")
    history_pos = panel.lead_rows() + config.min_window - 1
    t0 = max(eval_pos - h, history_pos)
    last = T - 1 - h
    if t0 > last:
        raise EmptyOriginSetError(f"No forecast origins at horizon {h}")
    return list(panel.dates[t0:last + 1])


def assign_subsample(date, subsamples) -> str:
    """Label of the window containing an evaluation date"""
    stamp = month_stamp(date)
    for sub in subsample_table(subsamples):
        start = month_stamp(sub['start']) if sub.get('start') else None
        end = month_stamp(sub['end']) if sub.get('end') else None
        if (start is None or stamp >= start) and (end is None or stamp <= end):
            return sub['label']
    return UNASSIGNED_SUBSAMPLE_LABEL


# ---------------------------------------------------------------------------
# Cells
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class _CellInputs:
    panel: Panel
    origin: pd.Timestamp
    horizon: int
    config: ExperimentConfig
    stats: object = None
    aligned: object = None
    design: object = None
    factor_config: object = None

    def ensure_window(self):
        if self.aligned is None:
            cfg = self.config
            self.stats = window_stats_at(self.panel, self.origin, cfg.lag, cfg.min_window)
            self.aligned = aligned_window(self.panel, self.origin, cfg.lag, self.stats, cfg.min_window)
            if not np.all(np.isfinite(self.aligned.y)):
                raise DataError("Target has missing values inside the training window")
        return self.aligned

    def ensure_design(self):
        if self.design is None:
            self.design = design_from_window(self.ensure_window(), self.horizon, self.config.lag,
                                             self.origin)
        return self.design

    def ensure_factor_config(self):
        if self.factor_config is None:
            aligned = self.ensure_window()
            self.factor_config = select_factor_config(aligned.X, aligned.y, self.horizon,
                                                      self.config.factor_grid)
        return self.factor_config


def _run_ar2(cell: _CellInputs, stream):
    cfg = cell.config
    y = target_history(cell.panel, cell.origin).to_numpy(dtype=float)
    post = fit_ar_flat(y, cfg.ar_order, cell.horizon)
    pred = ar_predictive(post, ar_regressor(y, cfg.ar_order), cfg.n_draws, stream,
                         origin_date=cell.origin, horizon=cell.horizon, model_tag='ar2')
    return pred.draws, {'n_train': post.n}


def _run_hs(cell: _CellInputs, stream):
    cfg = cell.config
    design = cell.ensure_design()
    out = hs_direct_forecast(design, design.x_oos, cfg.mcmc, stream, K=cfg.top_k)
    info = {
        'n_train': design.n,
        'chain': out.chain_diagnostics,
        'keep_ids': list(out.summary.predictor_ids),
        'keep_mean': out.keep_mean.tolist(),
        'top_k_truncated': out.top_k_truncated,
    }
    return out.predictive.draws, info


def _run_fa_ar(cell: _CellInputs, stream):
    cfg = cell.config
    aligned = cell.ensure_window()
    fc = cell.ensure_factor_config()
    factors = extract_factors_pca(aligned.X, fc.r).factors
    pred = fit_fa_ar(aligned.y, factors, fc, cell.horizon, cfg.n_draws, stream,
                     origin_date=cell.origin)
    return pred.draws, {'r': fc.r, 'p_f': fc.p_f}


def _run_favar(cell: _CellInputs, stream):
    cfg = cell.config
    aligned = cell.ensure_window()
    fc = cell.ensure_factor_config()
    factors = extract_factors_pca(aligned.X, fc.r).factors
    Z = np.column_stack([factors, aligned.y])
    fit = fit_var(Z, cfg.favar_lags)
    pred = favar_iterate(fit, Z[-cfg.favar_lags:], cell.horizon, cfg.n_draws, stream,
                         origin_date=cell.origin)
    return pred.draws, {'r': fc.r, 'q': cfg.favar_lags}


def _run_dfm(cell: _CellInputs, stream):
    cfg = cell.config
    aligned = cell.ensure_window()
    fc = cell.ensure_factor_config()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always')
        model = fit_dfm_twostep(aligned.X, fc.r, y=aligned.y)
        pred = kalman_filter_forecast(model, aligned.X, cell.horizon, cfg.n_draws, stream,
                                      origin_date=cell.origin)
    return pred.draws, {'r': fc.r, 'spectral_radius': model.spectral_radius,
                        'warnings': sorted({str(w.message) for w in caught})}


MODEL_RUNNERS = {
    'ar2': _run_ar2,
    'hs': _run_hs,
    'fa_ar': _run_fa_ar,
    'favar': _run_favar,
    'dfm': _run_dfm,
}


def run_cell(panel: Panel, config: ExperimentConfig, h: int, origin_index: int) -> List[ForecastRecord]:
    """Fit every configured model for one (horizon, origin) cell"""
    origin = panel.dates[origin_index]
    target_date = origin + pd.DateOffset(months=h)
    cell = _CellInputs(panel=panel, origin=origin, horizon=h, config=config)
    records = []
    for tag in config.models:
        stream = RngStream(config.seed, (h, origin_index, tag))
        try:
            draws, info = MODEL_RUNNERS[tag](cell, stream)
            records.append(ForecastRecord(model=tag, horizon=h, origin=origin,
                                          target_date=target_date, draws=draws, info=info))
        except CELL_ERRORS as exc:
            records.append(ForecastRecord(model=tag, horizon=h, origin=origin,
                                          target_date=target_date, status=STATUS_FAILED,
                                          message=f"{type(exc).__name__}: {exc}"))
    return records


def realized_target(panel: Panel) -> pd.Series:
    """Transformed target over the whole panel (evaluation only)"""
    meta = panel.metas[panel.target_id]
    return apply_transform(panel.frame[panel.target_id], meta.transform_code, column=panel.target_id)


def run_manifest(panel: Panel, config: ExperimentConfig) -> Dict:
    frame_bytes = pd.util.hash_pandas_object(panel.frame, index=True).to_numpy().tobytes()
    return {
        'created_at': datetime.now().isoformat(),
        'config': config.model_dump(mode='json'),
        'config_hash': config.config_hash(),
        'seed': config.seed,
        'panel_hash': hashlib.sha256(frame_bytes).hexdigest(),
        'target_id': panel.target_id,
        'n_predictors': len(panel.predictor_ids),
        'panel_start': f"{panel.dates[0]:%Y-%m}",
        'panel_end': f"{panel.dates[-1]:%Y-%m}",
        'predictor_blocks': {pid: panel.metas[pid].source_tag for pid in panel.predictor_ids},
    }


def run_rolling(panel: Panel, config: ExperimentConfig, threads: int = 1) -> ForecastRecordStore:
    """
    Expanding-window experiment over every horizon and origin

    Cells are dispatched in a fixed order and every model draws from a
    stream keyed by (horizon, origin index, model), so results do not
    depend on the number of workers.
    """
    store = ForecastRecordStore(manifest=run_manifest(panel, config))
    realized = realized_target(panel)
    timings = {}

    banner(f"ROLLING EVALUATION: {len(config.models)} models, horizons {config.horizons}")
    for h in config.horizons:
        started = time.time()
        origins = enumerate_origins(panel, h, config)
        positions = [panel.position(o) for o in origins]
        say(f"\n[h={h}] {len(origins)} origins "
            f"({origins[0]:%Y-%m} .. {origins[-1]:%Y-%m}), {len(origins) * len(config.models)} cells")

        results = Parallel(n_jobs=threads)(
            delayed(run_cell)(panel, config, h, pos) for pos in positions
        )

        failed = 0
        total = 0
        for pos, records in zip(positions, results):
            for rec in records:
                rec.realized = float(realized.iloc[pos + h])
                store.add(rec)
                total += 1
                failed += 0 if rec.ok else 1

        elapsed = time.time() - started
        timings[str(h)] = {'seconds': round(elapsed, 3), 'origins': len(origins),
                           'cells': total, 'failed': failed}
        marker = "✓" if failed == 0 else "⚠️"
        say(f"  {marker} h={h}: {total - failed}/{total} cells ok in {elapsed:.1f}s")
        if total and failed / total > config.max_failure_share:
            raise ExcessiveFailuresError(
                f"{failed} of {total} cells failed at horizon {h} "
                f"(limit {config.max_failure_share:.0%})"
            )

    store.manifest['timings'] = timings
    return store


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _losses(draws: np.ndarray, y: float, target_variance: float) -> Dict[str, float]:
    mean = float(np.mean(draws))
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        ls = log_score(draws, y, target_variance=target_variance)
    return {
        'RMSE': (mean - y) ** 2,
        'MAE': abs(mean - y),
        'CRPS': crps_sample(draws, y),
        'LOGSCORE': ls,
        'QWS_LEFT': qws(draws, y, 'left'),
        'QWS_RIGHT': qws(draws, y, 'right'),
        'QWS_TAILS': qws(draws, y, 'tails'),
        'QWS_CENTER': qws(draws, y, 'center'),
        'QWS_UNIFORM': qws(draws, y, 'uniform'),
    }


def _level(metric, values):
    if values.size == 0:
        return float('nan')
    if metric == 'RMSE':
        return float(np.sqrt(np.mean(values)))
    return float(np.mean(values))


def _dm_loss(metric, values):
    """Loss used in DM comparisons; log scores are negated"""
    return -values if is_higher_better(metric) else values


def evaluate(store: ForecastRecordStore, config: Optional[ExperimentConfig] = None) -> ScoreTables:
    """
    Score every model against the baseline per horizon, subsample and metric

    Each horizon is evaluated on the origins where every model succeeded and
    the outcome is observed. Empty subsamples yield NaN levels with n_obs 0.
    """
    config = config or store.experiment_config()
    subsamples = config.subsamples if config is not None else []
    models = store.models()
    if BASELINE_TAG not in models:
        raise MissingBaselineError(f"Store has no '{BASELINE_TAG}' baseline records")

    rows, cover_rows, cells = [], [], []
    for h in store.horizons():
        common = None
        for model in models:
            ok = {o for o in store.origins(h, model, ok_only=True)
                  if np.isfinite(store.get(model, h, o).realized)}
            common = ok if common is None else common & ok
        origins = sorted(common or [])
        if not origins:
            raise MissingBaselineError(f"No evaluable origins at horizon {h}")

        realized = np.array([store.get(BASELINE_TAG, h, o).realized for o in origins])
        target_variance = float(np.var(realized)) if realized.size > 1 else 1.0
        target_dates = [store.get(BASELINE_TAG, h, o).target_date for o in origins]
        labels = np.array([assign_subsample(d, subsamples) for d in target_dates])

        losses = {}
        for model in models:
            per_origin = [_losses(store.get(model, h, o).draws, y, target_variance or 1.0)
                          for o, y in zip(origins, realized)]
            losses[model] = {m: np.array([row[m] for row in per_origin]) for m in METRIC_KINDS}
            hits = np.array([interval_coverage(store.get(model, h, o).draws, y, 0.9)
                             for o, y in zip(origins, realized)])
            for sub in [FULL_SAMPLE_LABEL] + [s['label'] for s in subsample_table(subsamples)]:
                mask = np.ones(len(origins), bool) if sub == FULL_SAMPLE_LABEL else labels == sub
                cover_rows.append({'model': model, 'horizon': h, 'subsample': sub,
                                   'coverage90': float(hits[mask].mean()) if mask.any() else float('nan'),
                                   'n_obs': int(mask.sum())})

        dates = pd.DatetimeIndex(target_dates)
        sub_labels = [FULL_SAMPLE_LABEL] + [s['label'] for s in subsample_table(subsamples)]
        if (labels == UNASSIGNED_SUBSAMPLE_LABEL).any():
            sub_labels.append(UNASSIGNED_SUBSAMPLE_LABEL)

        for sub in sub_labels:
            mask = np.ones(len(origins), bool) if sub == FULL_SAMPLE_LABEL else labels == sub
            n_obs = int(mask.sum())
            for metric in METRIC_KINDS:
                base_values = losses[BASELINE_TAG][metric][mask]
                base_level = _level(metric, base_values)
                for model in models:
                    values = losses[model][metric][mask]
                    level = _level(metric, values)
                    skill, dm_p, dm_hln_p, dm_stat, flag = np.nan, np.nan, np.nan, np.nan, ''
                    if n_obs == 0:
                        flag = 'empty'
                    else:
                        try:
                            skill = relative_skill(level, base_level, metric)
                        except ZeroVarianceError:
                            flag = 'zero_baseline'
                        if model != BASELINE_TAG:
                            try:
                                result = dm_test(
                                    LossSeries(dates[mask], _dm_loss(metric, values), h),
                                    LossSeries(dates[mask], _dm_loss(metric, base_values), h),
                                    h,
                                )
                                dm_p, dm_hln_p, dm_stat = result.p, result.p_hln, result.dm
                            except ZeroVarianceError:
                                flag = flag or 'dm_zero_variance'
                            except InsufficientDataError:
                                flag = flag or 'dm_insufficient'
                    rows.append({
                        'model': model, 'horizon': h, 'subsample': sub, 'metric': metric,
                        'level': level, 'relative_skill': skill, 'dm_p': dm_p,
                        'dm_hln_p': dm_hln_p, 'dm_stat': dm_stat, 'n_obs': n_obs, 'flag': flag,
                    })
                    cells.append(ScoreCell(model_tag=model, horizon=h, metric_kind=metric,
                                           level=level, relative_skill=skill, dm_p=dm_p,
                                           dm_hln_p=dm_hln_p, subsample=sub, n_obs=n_obs))

    return ScoreTables(scores=pd.DataFrame(rows), coverage=pd.DataFrame(cover_rows), cells=cells)
