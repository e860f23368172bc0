"""
Scoring Router
Evaluates an uploaded forecast store against the AR baseline
"""

import os
import tempfile
from typing import Optional

from fastapi import APIRouter, File, Form, HTTPException, UploadFile

from forecast_lab.errors import ConfigError, DataError, StoreIOError
from forecast_lab.harness import evaluate
from forecast_lab.report_generator import ReportGenerator, add_ranks
from forecast_lab.store import load_store
from forecast_lab.utils import convert_to_json_serializable

router = APIRouter()


@router.post("/scores")
async def score_store(
    store: UploadFile = File(...),
    metric: Optional[str] = Form(None),
):
    """
    Score a stored run

    - **store**: .npz archive written by `forecast-lab run`
    - **metric**: Optional metric filter (e.g. CRPS)

    Returns:
        - Score rows with level, relative skill, DM/HLN p-values, rank and stars
        - Coverage rows and key findings
    """
    if not store.filename.endswith('.npz'):
        raise HTTPException(status_code=400, detail="Upload a .npz forecast store")

    with tempfile.TemporaryDirectory() as workdir:
        path = os.path.join(workdir, 'store.npz')
        with open(path, 'wb') as fh:
            fh.write(await store.read())
        try:
            loaded = load_store(path)
            tables = evaluate(loaded)
        except (DataError, ConfigError, StoreIOError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except Exception as exc:
            raise HTTPException(status_code=500, detail=f"Scoring failed: {exc}")

    scores = add_ranks(tables.scores)
    if metric:
        scores = scores[scores['metric'] == metric.upper()]
    report = ReportGenerator(tables, manifest=loaded.manifest, failures=loaded.failures()).generate_report()

    return convert_to_json_serializable({
        "status": "success",
        "n_records": len(loaded),
        "scores": scores.to_dict(orient='records'),
        "coverage": tables.coverage.to_dict(orient='records'),
        "key_findings": report['key_findings'],
    })
