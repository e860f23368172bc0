"""
Start the Forecast Lab API server
Run: python start_api.py [--host 0.0.0.0] [--port 8000] [--no-reload]
"""

import os

import typer
import uvicorn

from forecast_lab.utils import console


def serve(
    host: str = typer.Option(os.environ.get('FORECAST_LAB_HOST', '0.0.0.0'), help="Bind address"),
    port: int = typer.Option(int(os.environ.get('FORECAST_LAB_PORT', 8000)), help="Bind port"),
    reload: bool = typer.Option(True, '--reload/--no-reload', help="Restart on code changes"),
):
    console.print("🚀 Starting Forecast Lab API Server...")
    console.print(f"📍 API at http://{host}:{port}  (docs: /docs, generated CSVs: /reports)")
    console.print("\nPress CTRL+C to stop\n")
    uvicorn.run("api.main:app", host=host, port=port, reload=reload, log_level="info")


if __name__ == "__main__":
    typer.run(serve)
