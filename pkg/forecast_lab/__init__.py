"""
Forecast Lab - Bayesian macro forecasting with horseshoe, factor and AR benchmarks
"""

from .config import CliConfig, ExperimentConfig, FactorGrid, HsChainConfig, SyntheticSpec
from .diagnostics import aggregate_drivers, export_driver_artifacts, summaries_from_store
from .errors import ForecastLabError
from .harness import ScoreTables, enumerate_origins, evaluate, run_rolling
from .panel import Panel, SeriesMeta, load_catalog_csv, load_panel_csv
from .report_generator import ReportGenerator
from .store import ForecastRecordStore, load_store, persist_store
from .synthetic import generate_synthetic_panel

__version__ = '1.0.0'

__all__ = [
    'CliConfig',
    'ExperimentConfig',
    'FactorGrid',
    'HsChainConfig',
    'SyntheticSpec',
    'Panel',
    'SeriesMeta',
    'ForecastRecordStore',
    'ScoreTables',
    'ReportGenerator',
    'ForecastLabError',
    'ForecastLab',
    'enumerate_origins',
    'evaluate',
    'run_rolling',
    'generate_synthetic_panel',
]


class ForecastLab:
    """
    Main interface for a forecasting experiment

    Example:
        >>> lab = ForecastLab(ExperimentConfig(first_eval_date='2012-01'))
        >>> lab.load('panel.csv', 'catalog.csv')
        >>> tables = lab.run().score()
        >>> tables.scores.query("metric == 'CRPS'")
    """

    def __init__(self, config: ExperimentConfig, threads: int = 1):
        self.config = config
        self.threads = threads
        self.panel = None
        self.store = None
        self.tables = None

    def load(self, panel_path, catalog_path, target_id=None):
        """
        Load a panel and catalog from CSV

        Args:
            panel_path (str): Panel CSV (date column first)
            catalog_path (str): Catalog CSV
            target_id (str): Target column, if not tagged in the catalog

        Returns:
            Panel
        """
        self.panel = load_panel_csv(panel_path, load_catalog_csv(catalog_path), target_id=target_id)
        return self.panel

    def use_panel(self, panel: Panel):
        self.panel = panel
        return self

    def run(self):
        """Run every configured model over every horizon and origin"""
        if self.panel is None:
            raise ValueError("Load a panel before running")
        self.store = run_rolling(self.panel, self.config, threads=self.threads)
        return self

    def score(self) -> ScoreTables:
        if self.store is None:
            raise ValueError("Nothing to score; call run() or open() first")
        self.tables = evaluate(self.store, self.config)
        return self.tables

    def drivers(self, horizon: int, K=None):
        """Cross-origin horseshoe driver ledger for one horizon"""
        if self.store is None:
            raise ValueError("Nothing to diagnose; call run() or open() first")
        return aggregate_drivers(summaries_from_store(self.store, horizon), K or self.config.top_k)

    def save(self, path):
        persist_store(self.store, path)
        return path

    def open(self, path):
        self.store = load_store(path, expected_config=self.config)
        return self.store

    def save_report(self, output_dir):
        """
        Write score tables and the JSON report

        Returns:
            dict: artifact name -> path
        """
        tables = self.tables or self.score()
        generator = ReportGenerator(tables, manifest=self.store.manifest, failures=self.store.failures())
        return generator.write(output_dir)
