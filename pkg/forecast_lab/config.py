"""
Forecast Lab Configuration
Transform codes, scoring weights, subsample windows and run-config schemas
"""

import hashlib
import json
from datetime import date
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# FRED-MD style transformation codes
TRANSFORM_CODES = {
    1: {'description': 'Level', 'uses_log': False, 'leads_lost': 0},
    2: {'description': 'First difference', 'uses_log': False, 'leads_lost': 1},
    3: {'description': 'Second difference', 'uses_log': False, 'leads_lost': 2},
    4: {'description': 'Log level', 'uses_log': True, 'leads_lost': 0},
    5: {'description': 'First difference of log', 'uses_log': True, 'leads_lost': 1},
    6: {'description': 'Second difference of log', 'uses_log': True, 'leads_lost': 2},
    7: {'description': 'First difference of percent change', 'uses_log': False, 'leads_lost': 2},
}

# Standardization / design policy
PANEL_CONFIG = {
    'sd_floor': 1e-8,
    'default_lag': 1,
    'default_min_window': 36,
}

# Quantile-weighted score schemes (weight as a function of tau)
QWS_WEIGHTS = {
    'uniform': lambda tau: 1.0 + 0.0 * tau,
    'center': lambda tau: tau * (1.0 - tau),
    'tails': lambda tau: (2.0 * tau - 1.0) ** 2,
    'left': lambda tau: (1.0 - tau) ** 2,
    'right': lambda tau: tau ** 2,
}

QWS_GRID_STEP = 0.05
QWS_GRID = tuple(round(QWS_GRID_STEP * i, 2) for i in range(1, 20))

METRIC_KINDS = [
    'RMSE', 'MAE', 'CRPS', 'LOGSCORE',
    'QWS_LEFT', 'QWS_RIGHT', 'QWS_TAILS', 'QWS_CENTER', 'QWS_UNIFORM',
]

# Metrics shown in report tables unless asked otherwise
REPORTED_METRICS = ['RMSE', 'MAE', 'CRPS', 'LOGSCORE', 'QWS_LEFT', 'QWS_RIGHT', 'QWS_TAILS']

# Evaluation-date windows; bounds are inclusive month-stamps (None = open)
DEFAULT_SUBSAMPLES = [
    {'label': 'pre-2019', 'start': None, 'end': '2019-12'},
    {'label': '2020-2021', 'start': '2020-01', 'end': '2021-12'},
    {'label': '2022-2024', 'start': '2022-01', 'end': '2024-12'},
]
FULL_SAMPLE_LABEL = 'full'
UNASSIGNED_SUBSAMPLE_LABEL = 'other'

MODEL_TAGS = {
    'ar2': 'Direct AR(p), flat prior, Student-t predictive',
    'hs': 'Direct horseshoe regression on the full panel',
    'fa_ar': 'Direct factor-augmented AR',
    'favar': 'Iterated factor-augmented VAR',
    'dfm': 'Two-step dynamic factor model with Kalman filter',
}
BASELINE_TAG = 'ar2'

MIN_PREDICTIVE_DRAWS = 500
MIN_DM_OBSERVATIONS = 4
LOG_SCORE_VARIANCE_FLOOR = 1e-8
DEFAULT_TOP_K = 20

STORE_FORMAT_VERSION = 1
CONFIG_VERSION = 1
CONFIG_ENV_VAR = 'FORECAST_LAB_CONFIG'

EXIT_CODES = {
    'ok': 0,
    'config': 2,
    'data': 3,
    'numerical': 4,
    'io': 5,
}


def get_transform_info(code):
    """
    Get the transform table entry for a code

    Args:
        code (int): Transform code 1..7

    Returns:
        dict: description, uses_log and leads_lost
    """
    if code not in TRANSFORM_CODES:
        raise ValueError(f"Unknown transform code: {code}")
    return TRANSFORM_CODES[code]


def leads_lost(code):
    """Number of leading observations consumed by a transform code"""
    return get_transform_info(code)['leads_lost']


def get_qws_weight(scheme):
    """
    Get the weight function for a QWS scheme

    Args:
        scheme (str): One of uniform, center, tails, left, right

    Returns:
        callable: tau -> weight
    """
    scheme = scheme.lower()
    if scheme not in QWS_WEIGHTS:
        raise ValueError(f"Unknown QWS scheme: {scheme}")
    return QWS_WEIGHTS[scheme]


def is_higher_better(metric_kind):
    """LOGSCORE is the only positively oriented metric"""
    return metric_kind == 'LOGSCORE'


# ---------------------------------------------------------------------------
# Run configuration schemas
# ---------------------------------------------------------------------------

class HsChainConfig(BaseModel):
    """Horseshoe Gibbs chain budget and sigma^2 hyperparameters"""

    model_config = ConfigDict(frozen=True, extra='forbid')

    n_iter: int = 10000
    burn_in: int = 5000
    thin: int = Field(default=1, ge=1)
    a_sigma: float = Field(default=0.0, ge=0.0)
    b_sigma: float = Field(default=0.0, ge=0.0)

    @model_validator(mode='after')
    def _check_budget(self):
        if self.burn_in < 0 or self.n_iter <= self.burn_in:
            raise ValueError("n_iter must exceed burn_in and burn_in must be >= 0")
        return self

    @property
    def n_retained(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin


class FactorGrid(BaseModel):
    """Search bounds for (r, p_f)"""

    model_config = ConfigDict(frozen=True, extra='forbid')

    r_max: int = Field(default=8, ge=1)
    p_f_max: int = Field(default=3, ge=0)

    def candidates(self) -> List[Tuple[int, int]]:
        return [(r, p_f) for r in range(1, self.r_max + 1) for p_f in range(self.p_f_max + 1)]


class Subsample(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    label: str
    start: Optional[str] = None
    end: Optional[str] = None


class ExperimentConfig(BaseModel):
    """Everything that determines a rolling experiment"""

    model_config = ConfigDict(frozen=True, extra='forbid')

    horizons: List[int] = Field(default_factory=lambda: [1, 3, 6, 12])
    min_window: int = Field(default=PANEL_CONFIG['default_min_window'], ge=2)
    first_eval_date: date
    lag: int = Field(default=PANEL_CONFIG['default_lag'], ge=0)
    models: List[str] = Field(default_factory=lambda: list(MODEL_TAGS))
    seed: int = Field(default=20240101, ge=0, lt=2 ** 64)
    mcmc: HsChainConfig = Field(default_factory=HsChainConfig)
    factor_grid: FactorGrid = Field(default_factory=FactorGrid)
    ar_order: int = Field(default=2, ge=0)
    favar_lags: int = Field(default=2, ge=1)
    top_k: int = Field(default=DEFAULT_TOP_K, ge=1)
    max_failure_share: float = Field(default=0.10, ge=0.0, le=1.0)
    subsamples: List[Subsample] = Field(
        default_factory=lambda: [Subsample(**s) for s in DEFAULT_SUBSAMPLES]
    )

    @field_validator('horizons')
    @classmethod
    def _check_horizons(cls, value):
        if not value:
            raise ValueError("horizons must be non-empty")
        if any(h < 1 for h in value):
            raise ValueError("horizons must be >= 1")
        return sorted(set(value))

    @field_validator('models')
    @classmethod
    def _check_models(cls, value):
        unknown = [m for m in value if m not in MODEL_TAGS]
        if unknown:
            raise ValueError(f"Unknown model tags: {unknown}")
        if BASELINE_TAG not in value:
            raise ValueError(f"The baseline model '{BASELINE_TAG}' must be included")
        return list(dict.fromkeys(value))

    @field_validator('first_eval_date', mode='before')
    @classmethod
    def _parse_month(cls, value):
        if isinstance(value, str) and len(value) == 7:
            value = value + '-01'
        return value

    @model_validator(mode='after')
    def _check_draws(self):
        if self.mcmc.n_retained < MIN_PREDICTIVE_DRAWS:
            raise ValueError(
                f"MCMC budget retains {self.mcmc.n_retained} draws; "
                f"at least {MIN_PREDICTIVE_DRAWS} are required"
            )
        return self

    @property
    def n_draws(self) -> int:
        """Predictive sample size shared by every model"""
        return self.mcmc.n_retained

    def config_hash(self) -> str:
        canonical = json.dumps(self.model_dump(mode='json'), sort_keys=True)
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


class SyntheticSpec(BaseModel):
    """Parameters of the synthetic factor panel"""

    model_config = ConfigDict(frozen=True, extra='forbid')

    seed: int = 7
    T: int = Field(default=200, ge=60)
    p: int = Field(default=120, ge=1)
    r_true: int = Field(default=3, ge=0)
    factor_rho: float = Field(default=0.8, gt=-1.0, lt=1.0)
    loading_scale: float = Field(default=1.0, ge=0.0)
    idio_sd: float = Field(default=1.0, gt=0.0)
    target_factor_scale: float = 1.0
    n_sparse: int = Field(default=5, ge=0)
    sparse_coef: float = 0.5
    target_noise_sd: float = Field(default=0.5, gt=0.0)
    start_date: str = '2000-01'


class CliConfig(BaseModel):
    """Top-level YAML document consumed by the command line"""

    model_config = ConfigDict(extra='forbid')

    version: int = CONFIG_VERSION
    panel_csv: Optional[str] = None
    catalog_csv: Optional[str] = None
    target_id: Optional[str] = None
    output_dir: str = 'output'
    verbosity: int = Field(default=1, ge=0, le=2)
    threads: Optional[int] = Field(default=None, ge=1)
    experiment: Optional[ExperimentConfig] = None
    synthetic: SyntheticSpec = Field(default_factory=SyntheticSpec)

    @field_validator('version')
    @classmethod
    def _check_version(cls, value):
        if value != CONFIG_VERSION:
            raise ValueError(f"Unsupported config version {value}; expected {CONFIG_VERSION}")
        return value


def subsample_table(subsamples) -> List[Dict]:
    """Normalise subsample definitions into plain dicts"""
    return [s.model_dump() if isinstance(s, BaseModel) else dict(s) for s in subsamples]
