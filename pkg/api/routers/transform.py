"""
Panel Transform Router
Applies catalog transform codes to an uploaded panel
"""

import os
import tempfile
from datetime import datetime

from fastapi import APIRouter, File, HTTPException, UploadFile

from forecast_lab.errors import ConfigError, DataError
from forecast_lab.panel import load_catalog_csv, load_panel_csv, transform_panel, transform_report, write_panel_csv
from forecast_lab.utils import convert_to_json_serializable

from api.routers import reports_dir

router = APIRouter()


@router.post("/transform")
async def transform_upload(
    panel: UploadFile = File(...),
    catalog: UploadFile = File(...),
):
    """
    Transform an uploaded panel

    - **panel**: CSV with a leading `date` column and one column per series
    - **catalog**: CSV with columns id,name,transform_code,source_tag

    Returns:
        - Per-column transform report
        - Download path of the transformed CSV
    """
    for upload in (panel, catalog):
        if not upload.filename.endswith('.csv'):
            raise HTTPException(status_code=400, detail="Only CSV files are supported")

    with tempfile.TemporaryDirectory() as workdir:
        panel_path = os.path.join(workdir, 'panel.csv')
        catalog_path = os.path.join(workdir, 'catalog.csv')
        with open(panel_path, 'wb') as fh:
            fh.write(await panel.read())
        with open(catalog_path, 'wb') as fh:
            fh.write(await catalog.read())

        try:
            loaded = load_panel_csv(panel_path, load_catalog_csv(catalog_path))
            transformed = transform_panel(loaded)
            report = transform_report(loaded, transformed)
        except (DataError, ConfigError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except Exception as exc:
            raise HTTPException(status_code=500, detail=f"Transform failed: {exc}")

    timestamp = datetime.now().strftime('%Y%m%d_%H%M%S')
    name = f"transformed_{timestamp}.csv"
    write_panel_csv(loaded, os.path.join(reports_dir(), name), frame=transformed)

    return convert_to_json_serializable({
        "status": "success",
        "target_id": loaded.target_id,
        "n_months": len(loaded),
        "n_series": transformed.shape[1],
        "dropped": report.dropped(),
        "report": report.rows.to_dict(orient='records'),
        "transformed_csv": f"/reports/{name}",
    })
