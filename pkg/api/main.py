"""
FastAPI Backend for the Forecast Lab
Panel transforms, synthetic panels and score tables over HTTP
"""

import os

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles

from api.routers import reports_dir, scores, synthetic, transform
from forecast_lab import __version__

app = FastAPI(
    title="Forecast Lab API",
    description="Bayesian macro forecasting: panel transforms, synthetic data and forecast scoring",
    version=__version__,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=[
        "http://localhost:3000",
        "http://127.0.0.1:3000",
    ],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Generated CSVs are served from here
app.mount("/reports", StaticFiles(directory=reports_dir()), name="reports")

app.include_router(transform.router, prefix="/api", tags=["Panel"])
app.include_router(synthetic.router, prefix="/api", tags=["Panel"])
app.include_router(scores.router, prefix="/api", tags=["Scoring"])


@app.get("/")
async def root():
    """Service summary"""
    return {
        "status": "online",
        "service": "Forecast Lab API",
        "version": __version__,
        "endpoints": {
            "transform": "/api/transform",
            "synthetic": "/api/synthetic",
            "scores": "/api/scores",
            "docs": "/docs",
        },
    }


@app.get("/health")
async def health_check():
    import numpy
    import scipy

    return {
        "status": "healthy",
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "cpu_count": os.cpu_count(),
    }
