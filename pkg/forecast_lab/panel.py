"""
Panel Module
Dated macro panel, FRED-MD style transforms, training-window
standardization and direct-forecast design construction
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .config import PANEL_CONFIG, TRANSFORM_CODES, get_transform_info, leads_lost
from .errors import (
    CatalogError,
    DataError,
    DateGapError,
    DuplicateIdError,
    EmptyDesignError,
    InsufficientDataError,
    InsufficientHistoryError,
    TransformDomainError,
)
from .utils import month_stamp

CATALOG_COLUMNS = ['id', 'name', 'transform_code', 'source_tag']


@dataclass(frozen=True)
class SeriesMeta:
    id: str
    name: str
    transform_code: int
    source_tag: str = ''

    def __post_init__(self):
        if self.transform_code not in TRANSFORM_CODES:
            raise CatalogError(f"Series '{self.id}' has invalid transform code {self.transform_code}")


@dataclass(frozen=True, eq=False)
class Panel:
    """Raw monthly panel: one column per series, target included"""

    frame: pd.DataFrame
    metas: Dict[str, SeriesMeta]
    target_id: str

    def __post_init__(self):
        if self.target_id not in self.frame.columns:
            raise DataError(f"Target '{self.target_id}' not in panel")
        missing = [c for c in self.frame.columns if c not in self.metas]
        if missing:
            raise CatalogError(f"No catalog entry for columns: {missing}")
        _check_monthly(self.frame.index)

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.frame.index

    @property
    def columns(self) -> Dict[str, np.ndarray]:
        return {c: self.frame[c].to_numpy() for c in self.frame.columns}

    @property
    def predictor_ids(self) -> List[str]:
        return [c for c in self.frame.columns if c != self.target_id]

    def __len__(self):
        return len(self.frame)

    def position(self, date) -> int:
        stamp = month_stamp(date)
        if stamp not in self.frame.index:
            raise DataError(f"Date {stamp:%Y-%m} is outside the panel")
        return int(self.frame.index.get_loc(stamp))

    def truncate(self, origin) -> 'Panel':
        """Panel restricted to rows dated on or before origin"""
        pos = self.position(origin)
        return Panel(self.frame.iloc[:pos + 1].copy(), self.metas, self.target_id)

    def lead_rows(self) -> int:
        """Leading rows lost to differencing across every column"""
        return max(leads_lost(self.metas[c].transform_code) for c in self.frame.columns)


@dataclass(frozen=True, eq=False)
class WindowStats:
    means: pd.Series
    sds: pd.Series
    retained_ids: Tuple[str, ...]

    def standardize(self, frame: pd.DataFrame) -> pd.DataFrame:
        cols = list(self.retained_ids)
        absent = [c for c in cols if c not in frame.columns]
        if absent:
            raise DataError(f"Frame lacks retained columns: {absent[:5]}")
        return (frame[cols] - self.means[cols]) / self.sds[cols]


@dataclass(frozen=True, eq=False)
class DesignPair:
    X: np.ndarray
    y: np.ndarray
    origin_date: pd.Timestamp
    horizon: int
    lag: int
    x_oos: np.ndarray = field(repr=False, default=None)
    predictor_ids: Tuple[str, ...] = ()
    target_dates: Tuple[pd.Timestamp, ...] = field(repr=False, default=())

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True, eq=False)
class AlignedWindow:
    """Rows t = first usable .. origin: target y_t next to standardized x_{t-L}"""

    dates: pd.DatetimeIndex
    y: np.ndarray
    X: np.ndarray
    predictor_ids: Tuple[str, ...]


@dataclass(frozen=True)
class TransformReport:
    rows: pd.DataFrame

    def dropped(self) -> List[str]:
        return self.rows.loc[self.rows['status'] == 'dropped', 'id'].tolist()


def _check_monthly(index):
    if len(index) == 0:
        raise DataError("Panel has no dates")
    periods = pd.PeriodIndex(index, freq='M')
    steps = np.diff(periods.asi8)
    if np.any(steps <= 0):
        raise DateGapError("Panel dates are not strictly increasing")
    if np.any(steps != 1):
        gap_at = index[1:][steps != 1][0]
        raise DateGapError(f"Panel dates skip a month before {gap_at:%Y-%m}")


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------

def apply_transform(series, code, column=None):
    """
    Apply a FRED-MD transformation code

    Args:
        series: list, array or pd.Series (missing = NaN)
        code (int): Transform code 1..7
        column (str): Column name used in error messages

    Returns:
        Same length output; pd.Series if a Series was given, else ndarray
    """
    info = get_transform_info(code)
    as_series = isinstance(series, pd.Series)
    s = series.astype(float) if as_series else pd.Series(np.asarray(series, dtype=float))

    if info['uses_log']:
        observed = s.dropna()
        bad = observed[observed <= 0]
        if len(bad):
            raise TransformDomainError(column or s.name, _label(bad.index[0]), bad.iloc[0], code)
        logged = np.log(s)

    if code == 1:
        out = s.copy()
    elif code == 2:
        out = s.diff()
    elif code == 3:
        out = s.diff().diff()
    elif code == 4:
        out = logged
    elif code == 5:
        out = logged.diff()
    elif code == 6:
        out = logged.diff().diff()
    else:
        out = (s / s.shift(1) - 1.0).diff()

    return out if as_series else out.to_numpy()


def _label(index_value):
    if isinstance(index_value, pd.Timestamp):
        return index_value.strftime('%Y-%m')
    return index_value


def transform_panel(panel: Panel) -> pd.DataFrame:
    """All columns transformed by their catalog codes"""
    out = {}
    for col in panel.frame.columns:
        out[col] = apply_transform(panel.frame[col], panel.metas[col].transform_code, column=col)
    return pd.DataFrame(out, index=panel.frame.index)


def transform_report(panel: Panel, transformed: Optional[pd.DataFrame] = None) -> TransformReport:
    """Per-column summary: code, rows lost, interior missings, retained/dropped"""
    if transformed is None:
        transformed = transform_panel(panel)
    head = panel.lead_rows()
    rows = []
    for col in transformed.columns:
        code = panel.metas[col].transform_code
        body = transformed[col].iloc[head:]
        n_missing = int(body.isna().sum())
        rows.append({
            'id': col,
            'transform_code': code,
            'description': TRANSFORM_CODES[code]['description'],
            'rows_lost': leads_lost(code),
            'n_missing': n_missing,
            'status': 'retained' if n_missing == 0 else 'dropped',
        })
    return TransformReport(pd.DataFrame(rows))


# ---------------------------------------------------------------------------
# Standardization and designs
# ---------------------------------------------------------------------------

def compute_window_stats(window: pd.DataFrame, sd_floor: float = PANEL_CONFIG['sd_floor']) -> WindowStats:
    """
    Column means and sample sds over a training window

    Columns with any missing value in the window, or with sd below the
    floor, are excluded.
    """
    if len(window) < 2:
        raise InsufficientHistoryError("Window statistics need at least two rows")
    complete = window.columns[window.notna().all(axis=0).to_numpy()]
    means = window[complete].mean(axis=0)
    sds = window[complete].std(axis=0, ddof=1)
    retained = [c for c in complete if sds[c] > sd_floor]
    if not retained:
        raise EmptyDesignError("No column survives the missing-data and variance policy")
    return WindowStats(means=means[retained], sds=sds[retained], retained_ids=tuple(retained))


def _usable(panel: Panel, origin):
    """Truncated panel, transformed frame and first usable row index"""
    visible = panel.truncate(origin)
    transformed = transform_panel(visible)
    return visible, transformed, visible.lead_rows()


def _check_history(n_rows, min_window, origin):
    if n_rows < min_window:
        raise InsufficientHistoryError(
            f"Only {n_rows} usable months up to {month_stamp(origin):%Y-%m}; need {min_window}"
        )


def predictor_window(panel: Panel, origin, lag: int, min_window: int = 2) -> pd.DataFrame:
    """
    Transformed predictor rows available at origin (first usable .. origin - L)

    A column with a missing value anywhere from its own first usable row
    through origin - L is left out of the window.
    """
    visible, transformed, first = _usable(panel, origin)
    last = len(visible) - 1
    _check_history(last - first + 1, min_window, origin)
    if last - lag < first:
        raise InsufficientHistoryError("Publication lag leaves no predictor rows")
    kept = [
        c for c in visible.predictor_ids
        if transformed[c].iloc[leads_lost(visible.metas[c].transform_code):last - lag + 1].notna().all()
    ]
    return transformed[kept].iloc[first:last - lag + 1]


def window_stats_at(panel: Panel, origin, lag: int, min_window: int = 2,
                    sd_floor: float = PANEL_CONFIG['sd_floor']) -> WindowStats:
    return compute_window_stats(predictor_window(panel, origin, lag, min_window), sd_floor)


def aligned_window(panel: Panel, origin, lag: int, stats: WindowStats,
                   min_window: int = PANEL_CONFIG['default_min_window']) -> AlignedWindow:
    """
    Target y_t beside the standardized predictor row x_{t-L}

    Rows run from the first usable month plus L through origin. No cell
    dated after origin is read.
    """
    visible, transformed, first = _usable(panel, origin)
    last = len(visible) - 1
    _check_history(last - first + 1, min_window, origin)
    m = last - first - lag + 1
    if m < 2:
        raise InsufficientHistoryError("Publication lag leaves fewer than two aligned rows")

    predictors = transformed[visible.predictor_ids].iloc[first:first + m]
    X = stats.standardize(predictors).to_numpy(dtype=float)
    if not np.all(np.isfinite(X)):
        raise DataError("Standardized predictors contain missing values inside the window")
    y = transformed[visible.target_id].iloc[first + lag:last + 1]
    return AlignedWindow(
        dates=y.index,
        y=y.to_numpy(dtype=float),
        X=X,
        predictor_ids=tuple(stats.retained_ids),
    )


def design_from_window(aligned: AlignedWindow, horizon: int, lag: int, origin) -> DesignPair:
    """Shift an aligned window into (x_{t-L}, y_{t+h}) training pairs"""
    if horizon < 1:
        raise DataError("horizon must be >= 1")
    m = len(aligned.y)
    n = m - horizon
    if n < 1:
        raise InsufficientHistoryError(f"No training pairs at horizon {horizon}")

    X = aligned.X[:n]
    y = aligned.y[horizon:]
    target_dates = aligned.dates[horizon:]
    keep = np.isfinite(y)
    if not keep.all():
        X, y, target_dates = X[keep], y[keep], target_dates[keep]
    if len(y) < 1:
        raise InsufficientDataError("Every training target is missing")

    return DesignPair(
        X=X,
        y=y,
        origin_date=month_stamp(origin),
        horizon=horizon,
        lag=lag,
        x_oos=aligned.X[m - 1].copy(),
        predictor_ids=aligned.predictor_ids,
        target_dates=tuple(target_dates),
    )


def build_design(panel: Panel, horizon: int, lag: int, origin, stats: WindowStats,
                 min_window: int = PANEL_CONFIG['default_min_window']) -> DesignPair:
    """
    Direct-forecast design: standardized x_{t-L} rows against y_{t+h}

    The final training target is dated origin; the predictor row for the
    held-out target at origin + h is returned as x_oos.
    """
    if horizon < 1:
        raise DataError("horizon must be >= 1")
    aligned = aligned_window(panel, origin, lag, stats, min_window)
    return design_from_window(aligned, horizon, lag, origin)


def target_history(panel: Panel, origin) -> pd.Series:
    """Transformed target from the first usable month through origin"""
    visible, transformed, first = _usable(panel, origin)
    return transformed[visible.target_id].iloc[first:]


# ---------------------------------------------------------------------------
# CSV IO
# ---------------------------------------------------------------------------

def load_catalog_csv(path) -> Dict[str, SeriesMeta]:
    """
    Load a series catalog

    Args:
        path (str): CSV with columns id,name,transform_code,source_tag

    Returns:
        dict: id -> SeriesMeta, in file order
    """
    df = pd.read_csv(path, dtype={'id': str, 'name': str, 'source_tag': str}, keep_default_na=False)
    absent = [c for c in CATALOG_COLUMNS if c not in df.columns]
    if absent:
        raise CatalogError(f"Catalog is missing columns: {absent}")
    duplicated = df['id'][df['id'].duplicated()].tolist()
    if duplicated:
        raise DuplicateIdError(f"Duplicate ids in catalog: {duplicated}")
    metas = {}
    for row in df.itertuples(index=False):
        try:
            code = int(row.transform_code)
        except (TypeError, ValueError):
            raise CatalogError(f"Series '{row.id}' has non-integer transform code {row.transform_code!r}")
        metas[row.id] = SeriesMeta(id=row.id, name=row.name, transform_code=code,
                                   source_tag=row.source_tag)
    return metas


def load_panel_csv(path, catalog: Dict[str, SeriesMeta], target_id: Optional[str] = None) -> Panel:
    """
    Load a panel CSV and match every column to the catalog

    Args:
        path (str): CSV whose first column is `date`
        catalog (dict): id -> SeriesMeta
        target_id (str): Target column; defaults to the single catalog entry tagged 'target'

    Returns:
        Panel
    """
    header = pd.read_csv(path, header=None, nrows=1, dtype=str).iloc[0].tolist()
    if not header or header[0] != 'date':
        raise DataError("Panel CSV must start with a 'date' column")
    ids = header[1:]
    seen = set()
    dupes = [c for c in ids if c in seen or seen.add(c)]
    if dupes:
        raise DuplicateIdError(f"Duplicate columns in panel: {dupes}")
    unmatched = [c for c in ids if c not in catalog]
    if unmatched:
        raise CatalogError(f"Panel columns without catalog entry: {unmatched}")

    df = pd.read_csv(path, dtype={'date': str})
    try:
        dates = pd.DatetimeIndex([month_stamp(d) for d in df['date']])
    except (TypeError, ValueError) as exc:
        raise DataError(f"Unparseable date in panel CSV: {exc}") from exc
    try:
        frame = df.drop(columns=['date']).astype(float)
    except ValueError as exc:
        raise DataError(f"Non-numeric value in panel CSV: {exc}") from exc
    frame.index = dates

    if target_id is None:
        tagged = [c for c in ids if catalog[c].source_tag == 'target']
        if len(tagged) != 1:
            raise CatalogError("Set target_id or tag exactly one catalog row with source_tag 'target'")
        target_id = tagged[0]

    metas = {c: catalog[c] for c in ids}
    return Panel(frame=frame, metas=metas, target_id=target_id)


def write_panel_csv(panel: Panel, path, frame: Optional[pd.DataFrame] = None):
    out = (frame if frame is not None else panel.frame).copy()
    out.index = out.index.strftime('%Y-%m-%d')
    out.index.name = 'date'
    out.to_csv(path, float_format='%.17g')


def write_catalog_csv(metas: Dict[str, SeriesMeta], path):
    rows = [{'id': m.id, 'name': m.name, 'transform_code': m.transform_code,
             'source_tag': m.source_tag} for m in metas.values()]
    pd.DataFrame(rows, columns=CATALOG_COLUMNS).to_csv(path, index=False)
