"""
Synthetic Panel Generator
Factor-driven monthly panel with a sparse, factor-loaded target
"""

import numpy as np
import pandas as pd

from .config import SyntheticSpec
from .errors import ConfigError
from .panel import Panel, SeriesMeta

TARGET_ID = 'y'
N_BLOCKS = 5
BURN = 50


def generate_synthetic_panel(seed, T, p, r_true, target_spec=None) -> Panel:
    return generate_synthetic_with_truth(seed, T, p, r_true, target_spec)[0]


def generate_synthetic_with_truth(seed, T, p, r_true, target_spec=None):
    """
    Generate a reproducible factor panel

    Predictors are x_t = Lambda f_t + e_t with r_true AR(1) factors of unit
    variance. The target loads on last month's factors and on a few
    predictors: y_t = g'f_{t-1} + b'x_{S,t-1} + noise.

    Args:
        seed (int): RNG seed
        T (int): Months (>= 60)
        p (int): Predictors (>= 1)
        r_true (int): Latent factors (0 gives independent white-noise predictors)
        target_spec (SyntheticSpec | dict): Remaining generator parameters

    Returns:
        (Panel, dict): panel with predictors x001..xNNN (code 1) and target
        'y', plus the generating factors, loadings and sparse ids
    """
    if isinstance(target_spec, SyntheticSpec):
        spec = target_spec.model_copy(update={'seed': seed, 'T': T, 'p': p, 'r_true': r_true})
    else:
        try:
            spec = SyntheticSpec(seed=seed, T=T, p=p, r_true=r_true, **(target_spec or {}))
        except ValueError as exc:
            raise ConfigError(f"Invalid synthetic panel parameters: {exc}") from exc
    if spec.r_true > min(spec.T, spec.p):
        raise ConfigError("r_true cannot exceed min(T, p)")
    if spec.n_sparse > spec.p:
        raise ConfigError("n_sparse cannot exceed p")

    rng = np.random.default_rng(spec.seed)
    total = spec.T + BURN
    r = spec.r_true

    factors = np.zeros((total, r))
    if r:
        shock_sd = np.sqrt(1.0 - spec.factor_rho ** 2)
        shocks = rng.standard_normal((total, r)) * shock_sd
        factors[0] = rng.standard_normal(r)
        for t in range(1, total):
            factors[t] = spec.factor_rho * factors[t - 1] + shocks[t]

    loadings = spec.loading_scale * rng.standard_normal((spec.p, r))
    idio = spec.idio_sd * rng.standard_normal((total, spec.p))
    X = factors @ loadings.T + idio

    gamma = spec.target_factor_scale * rng.choice([-1.0, 1.0], size=r)
    sparse_idx = np.sort(rng.choice(spec.p, size=spec.n_sparse, replace=False))
    sparse_coef = spec.sparse_coef * rng.choice([-1.0, 1.0], size=spec.n_sparse)
    noise = spec.target_noise_sd * rng.standard_normal(total)

    y = np.empty(total)
    y[0] = noise[0]
    y[1:] = factors[:-1] @ gamma + X[:-1, sparse_idx] @ sparse_coef + noise[1:]

    dates = pd.date_range(pd.Timestamp(spec.start_date), periods=spec.T, freq='MS')
    ids = [f"x{j + 1:03d}" for j in range(spec.p)]
    frame = pd.DataFrame(X[BURN:], index=dates, columns=ids)
    frame[TARGET_ID] = y[BURN:]

    metas = {
        pid: SeriesMeta(id=pid, name=f"Synthetic predictor {j + 1}", transform_code=1,
                        source_tag=f"block{j % N_BLOCKS + 1}")
        for j, pid in enumerate(ids)
    }
    metas[TARGET_ID] = SeriesMeta(id=TARGET_ID, name='Synthetic target', transform_code=1,
                                  source_tag='target')
    truth = {
        'factors': factors[BURN:],
        'loadings': loadings,
        'gamma': gamma,
        'sparse_ids': [ids[j] for j in sparse_idx],
        'sparse_coef': sparse_coef,
    }
    return Panel(frame=frame, metas=metas, target_id=TARGET_ID), truth

