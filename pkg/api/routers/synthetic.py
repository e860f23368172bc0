"""
Synthetic Panel Router
"""

import os
from datetime import datetime

from fastapi import APIRouter, HTTPException

from forecast_lab.config import SyntheticSpec
from forecast_lab.errors import ConfigError
from forecast_lab.panel import write_catalog_csv, write_panel_csv
from forecast_lab.synthetic import generate_synthetic_panel

from api.routers import reports_dir

router = APIRouter()


@router.post("/synthetic")
async def synthetic_panel(spec: SyntheticSpec):
    """
    Generate a synthetic factor panel

    Returns download paths of the panel and catalog CSVs.
    """
    try:
        panel = generate_synthetic_panel(spec.seed, spec.T, spec.p, spec.r_true, target_spec=spec)
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc))

    stamp = f"{datetime.now():%Y%m%d_%H%M%S}_{spec.seed}"
    panel_name = f"synthetic_panel_{stamp}.csv"
    catalog_name = f"synthetic_catalog_{stamp}.csv"
    write_panel_csv(panel, os.path.join(reports_dir(), panel_name))
    write_catalog_csv(panel.metas, os.path.join(reports_dir(), catalog_name))

    return {
        "status": "success",
        "n_months": len(panel),
        "n_predictors": len(panel.predictor_ids),
        "target_id": panel.target_id,
        "panel_csv": f"/reports/{panel_name}",
        "catalog_csv": f"/reports/{catalog_name}",
    }
