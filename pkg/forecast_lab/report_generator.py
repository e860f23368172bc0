"""
Report Generator Module
Score-table CSVs with ranks and significance stars, plus a JSON run report
"""

import os
from datetime import datetime
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from .config import BASELINE_TAG, FULL_SAMPLE_LABEL, REPORTED_METRICS, is_higher_better
from .scoring import significance_stars
from .utils import dump_json


def add_ranks(scores: pd.DataFrame) -> pd.DataFrame:
    """
    Rank models within each (horizon, subsample, metric) column

    Rank 1 is the best level; LOGSCORE ranks descending, every loss ascending.
    Empty cells get no rank.
    """
    out = scores.copy()
    if out.empty:
        out['rank'] = pd.Series(dtype=float)
        out['stars'] = pd.Series(dtype=str)
        return out
    signed = np.where(out['metric'].map(is_higher_better), -out['level'], out['level'])
    out['_signed'] = signed
    out['rank'] = out.groupby(['horizon', 'subsample', 'metric'])['_signed'].rank(method='min')
    out = out.drop(columns='_signed')
    out['stars'] = out['dm_hln_p'].map(significance_stars)
    return out


def metric_table(scores: pd.DataFrame, metric: str, subsample: str = FULL_SAMPLE_LABEL) -> pd.DataFrame:
    """Wide table for one metric: a row per model, column groups per horizon"""
    ranked = scores if 'rank' in scores.columns else add_ranks(scores)
    cut = ranked[(ranked['metric'] == metric) & (ranked['subsample'] == subsample)]
    if cut.empty:
        return pd.DataFrame()
    wide = cut.pivot(index='model', columns='horizon',
                     values=['level', 'relative_skill', 'dm_hln_p', 'stars', 'rank'])
    wide = wide.swaplevel(axis=1).sort_index(axis=1, level=0, sort_remaining=False)
    wide.columns = [f"h{h}_{field}" for h, field in wide.columns]
    return wide.reset_index()


class ReportGenerator:
    """Turn evaluated score tables into report files"""

    def __init__(self, tables, manifest: Optional[Dict] = None, failures: Optional[List] = None):
        self.tables = tables
        self.manifest = dict(manifest or {})
        self.failures = list(failures or [])
        self.scores = add_ranks(tables.scores)

    def generate_report(self):
        """Generate the JSON run report"""
        return {
            'metadata': self._generate_metadata(),
            'summary': self._generate_summary(),
            'key_findings': self._extract_key_findings(),
            'failures': [
                {'model': rec.model, 'horizon': rec.horizon, 'origin': f"{rec.origin:%Y-%m}",
                 'message': rec.message}
                for rec in self.failures
            ],
        }

    def _generate_metadata(self):
        return {
            'report_id': f"ForecastLab_{datetime.now().strftime('%Y%m%d_%H%M%S')}",
            'generated_at': datetime.now().isoformat(),
            'config_hash': self.manifest.get('config_hash'),
            'content_hash': self.manifest.get('content_hash'),
            'seed': self.manifest.get('seed'),
            'target_id': self.manifest.get('target_id'),
            'models': sorted(self.scores['model'].unique().tolist()) if not self.scores.empty else [],
            'horizons': sorted(int(h) for h in self.scores['horizon'].unique()) if not self.scores.empty else [],
        }

    def _generate_summary(self):
        """Best model per horizon and metric over the full sample"""
        summary = {}
        full = self.scores[self.scores['subsample'] == FULL_SAMPLE_LABEL]
        for (h, metric), group in full.groupby(['horizon', 'metric']):
            best = group[group['rank'] == 1]
            if best.empty:
                continue
            row = best.iloc[0]
            summary.setdefault(f"h{int(h)}", {})[metric] = {
                'model': row['model'],
                'level': row['level'],
                'relative_skill': row['relative_skill'],
                'n_obs': int(row['n_obs']),
            }
        return summary

    def _extract_key_findings(self):
        findings = []
        full = self.scores[(self.scores['subsample'] == FULL_SAMPLE_LABEL)
                           & (self.scores['model'] != BASELINE_TAG)]
        for metric in ('RMSE', 'CRPS'):
            cut = full[full['metric'] == metric]
            for h, group in cut.groupby('horizon'):
                beats = group[(group['relative_skill'] > 0) & (group['dm_hln_p'] < 0.05)]
                if beats.empty:
                    findings.append(f"⚠ h={int(h)}: no model beats {BASELINE_TAG} on {metric} at 5%")
                else:
                    names = ', '.join(sorted(beats['model']))
                    findings.append(f"✓ h={int(h)}: {names} beat {BASELINE_TAG} on {metric} at 5%")
        if self.failures:
            findings.append(f"⚠ {len(self.failures)} cells failed and were excluded from scoring")
        return findings

    def write(self, output_dir, metrics=REPORTED_METRICS) -> Dict[str, str]:
        """
        Write scores.csv, coverage.csv, one CSV per metric and subsample, and report.json

        Returns:
            dict: artifact name -> path
        """
        os.makedirs(output_dir, exist_ok=True)
        paths = {}

        paths['scores'] = os.path.join(output_dir, 'scores.csv')
        self.scores.to_csv(paths['scores'], index=False)
        paths['coverage'] = os.path.join(output_dir, 'coverage.csv')
        self.tables.coverage.to_csv(paths['coverage'], index=False)

        subsamples = self.scores['subsample'].unique().tolist() if not self.scores.empty else []
        for metric in metrics:
            for sub in subsamples:
                wide = metric_table(self.scores, metric, sub)
                if wide.empty:
                    continue
                name = f"{metric.lower()}_{sub}"
                paths[name] = os.path.join(output_dir, f"table_{name}.csv")
                wide.to_csv(paths[name], index=False)

        paths['report'] = dump_json(self.generate_report(), os.path.join(output_dir, 'report.json'))
        return paths
