"""
Shrinkage Diagnostics Module
Horseshoe kappa ratios, keep signals, top-K rankings and driver ledgers
"""

import json
import os
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import DEFAULT_TOP_K
from .errors import DataError, TopKTruncatedWarning, UniverseMismatchWarning
from .utils import NumpyEncoder, convert_to_json_serializable


@dataclass(frozen=True, eq=False)
class KappaSummary:
    keep_mean: np.ndarray
    predictor_ids: Tuple[str, ...]
    origin_date: Optional[pd.Timestamp] = None
    horizon: Optional[int] = None

    def as_series(self) -> pd.Series:
        return pd.Series(self.keep_mean, index=list(self.predictor_ids))


@dataclass(eq=False)
class DriverLedger:
    K: int
    top_lists: Dict[pd.Timestamp, List[Tuple[str, float]]]
    counts: Dict[str, int]
    mean_keep: Dict[str, float]
    keep_by_origin: pd.DataFrame = field(repr=False, default=None)
    horizon: Optional[int] = None

    @property
    def n_origins(self) -> int:
        return len(self.top_lists)

    def union_top_ids(self) -> List[str]:
        ids = {pid for ranked in self.top_lists.values() for pid, _ in ranked}
        return sorted(ids, key=lambda pid: (-self.mean_keep.get(pid, 0.0), pid))


def kappa(tau2, lambda2, v):
    """kappa = 1 / (1 + tau2 * lambda2 * v), broadcast"""
    return 1.0 / (1.0 + np.asarray(tau2) * np.asarray(lambda2) * np.asarray(v))


def kappa_from_draws(draws, v, predictor_ids: Optional[Sequence[str]] = None,
                     origin_date=None, horizon=None) -> KappaSummary:
    """
    Average keep = 1 - kappa over retained draws

    Args:
        draws (HsDraws): retained horseshoe draws
        v: per-predictor design scale, sum of squares of the standardized column
        predictor_ids: ids aligned with the columns of the draws

    Returns:
        KappaSummary
    """
    v = np.asarray(v, dtype=float)
    k = draws.lambda2_draws.shape[1]
    if v.shape != (k,):
        raise DataError(f"Design scale has {v.size} entries for {k} predictors")
    if np.any(v <= 0):
        raise DataError("Design scale entries must be positive")
    if predictor_ids is None or len(predictor_ids) == 0:
        predictor_ids = [f"x{j + 1}" for j in range(k)]
    if len(predictor_ids) != k:
        raise DataError(f"{len(predictor_ids)} ids for {k} predictors")

    kap = kappa(draws.tau2_draws[:, None], draws.lambda2_draws, v[None, :])
    keep = np.clip(1.0 - kap.mean(axis=0), 0.0, 1.0)
    return KappaSummary(keep_mean=keep, predictor_ids=tuple(predictor_ids),
                        origin_date=origin_date, horizon=horizon)


def top_k(summary: KappaSummary, K: int = DEFAULT_TOP_K) -> List[Tuple[str, float]]:
    """Predictors ranked by descending keep; ties by id"""
    if K < 1:
        raise ValueError("K must be >= 1")
    k = len(summary.predictor_ids)
    if K > k:
        warnings.warn(f"Requested top {K} of {k} predictors; truncating to {k}",
                      TopKTruncatedWarning, stacklevel=2)
        K = k
    pairs = sorted(zip(summary.predictor_ids, summary.keep_mean.tolist()),
                   key=lambda item: (-item[1], item[0]))
    return [(pid, float(keep)) for pid, keep in pairs[:K]]


def summaries_from_store(store, horizon: int, model: str = 'hs') -> List[KappaSummary]:
    """Keep summaries saved with the successful horseshoe cells of one horizon"""
    summaries = []
    for origin in store.origins(horizon, model, ok_only=True):
        info = store.get(model, horizon, origin).info
        if 'keep_ids' not in info:
            continue
        summaries.append(KappaSummary(keep_mean=np.asarray(info['keep_mean'], dtype=float),
                                      predictor_ids=tuple(info['keep_ids']),
                                      origin_date=origin, horizon=horizon))
    return summaries


def aggregate_drivers(per_origin: Sequence[KappaSummary], K: int = DEFAULT_TOP_K) -> DriverLedger:
    """
    Cross-origin persistence of top-K keepers

    counts tally top-K appearances; mean keep averages over every origin,
    including those where the predictor missed the top K.
    """
    if not per_origin:
        raise DataError("No shrinkage summaries to aggregate")

    universes = [set(s.predictor_ids) for s in per_origin]
    common = set.intersection(*universes)
    if any(u != common for u in universes):
        warnings.warn(f"Predictor universes differ across origins; aligning on {len(common)} "
                      f"shared predictors", UniverseMismatchWarning, stacklevel=2)
    if not common:
        raise DataError("Origins share no predictors")

    ordered = sorted(common)
    rows = {}
    top_lists = {}
    counts = {pid: 0 for pid in ordered}
    for position, summary in enumerate(per_origin):
        keep = summary.as_series().loc[ordered]
        label = summary.origin_date if summary.origin_date is not None else position
        aligned = KappaSummary(keep_mean=keep.to_numpy(), predictor_ids=tuple(ordered),
                               origin_date=summary.origin_date, horizon=summary.horizon)
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', TopKTruncatedWarning)
            ranked = top_k(aligned, K)
        top_lists[label] = ranked
        for pid, _ in ranked:
            counts[pid] += 1
        rows[label] = keep

    keep_by_origin = pd.DataFrame(rows).T.sort_index()
    mean_keep = keep_by_origin.mean(axis=0).to_dict()
    horizons = {s.horizon for s in per_origin}
    return DriverLedger(K=K, top_lists=top_lists, counts=counts, mean_keep=mean_keep,
                        keep_by_origin=keep_by_origin,
                        horizon=horizons.pop() if len(horizons) == 1 else None)


def driver_bars(ledger: DriverLedger) -> pd.DataFrame:
    """id, mean_keep, count, rank; sorted by mean keep"""
    bars = pd.DataFrame({
        'id': list(ledger.mean_keep),
        'mean_keep': list(ledger.mean_keep.values()),
        'count': [ledger.counts.get(pid, 0) for pid in ledger.mean_keep],
    })
    bars = bars.sort_values(['mean_keep', 'id'], ascending=[False, True]).reset_index(drop=True)
    bars['rank'] = np.arange(1, len(bars) + 1)
    return bars


def driver_heatmap(ledger: DriverLedger) -> pd.DataFrame:
    """Per-origin keep for the union of top-K ids (origins x ids)"""
    ids = ledger.union_top_ids()
    heat = ledger.keep_by_origin[ids].copy()
    heat.index.name = 'origin_date'
    return heat


def block_heatmap(ledger: DriverLedger, metas) -> pd.DataFrame:
    """
    Top-K appearances per source block per origin

    metas maps id to a SeriesMeta or directly to its source tag.
    """
    rows = {}
    for origin, ranked in ledger.top_lists.items():
        tally = {}
        for pid, _ in ranked:
            block = getattr(metas[pid], 'source_tag', metas[pid]) if pid in metas else ''
            tally[block or 'unassigned'] = tally.get(block or 'unassigned', 0) + 1
        rows[origin] = tally
    heat = pd.DataFrame(rows).T.fillna(0).astype(int).sort_index()
    heat = heat[sorted(heat.columns)]
    heat.index.name = 'origin_date'
    return heat


def export_driver_artifacts(ledger: DriverLedger, path, prefix='drivers', metas=None,
                            write_json=False) -> Dict[str, str]:
    """
    Write bar and heatmap CSVs (plus optional block heatmap and JSON ledger)

    Returns:
        dict: artifact name -> file path
    """
    os.makedirs(path, exist_ok=True)
    files = {}

    bars_path = os.path.join(path, f"{prefix}_bars.csv")
    driver_bars(ledger).to_csv(bars_path, index=False, float_format='%.10g')
    files['bars'] = bars_path

    heat = driver_heatmap(ledger)
    heat.index = [_date_label(d) for d in heat.index]
    heat.index.name = 'origin_date'
    heat_path = os.path.join(path, f"{prefix}_heatmap.csv")
    heat.to_csv(heat_path, float_format='%.10g')
    files['heatmap'] = heat_path

    if metas is not None:
        blocks = block_heatmap(ledger, metas)
        blocks.index = [_date_label(d) for d in blocks.index]
        blocks.index.name = 'origin_date'
        block_path = os.path.join(path, f"{prefix}_blocks.csv")
        blocks.to_csv(block_path)
        files['blocks'] = block_path

    if write_json:
        json_path = os.path.join(path, f"{prefix}_ledger.json")
        payload = {
            'K': ledger.K,
            'horizon': ledger.horizon,
            'n_origins': ledger.n_origins,
            'counts': ledger.counts,
            'mean_keep': ledger.mean_keep,
            'top_lists': {_date_label(k): v for k, v in ledger.top_lists.items()},
        }
        with open(json_path, 'w', encoding='utf-8') as fh:
            json.dump(convert_to_json_serializable(payload), fh, indent=2, cls=NumpyEncoder)
        files['ledger'] = json_path

    return files


def _date_label(value):
    if isinstance(value, pd.Timestamp):
        return value.strftime('%Y-%m-%d')
    return str(value)
