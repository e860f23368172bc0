"""
Forecast Record Store
Predictive draws and realizations keyed by (model, horizon, origin),
persisted as a single .npz archive with an embedded JSON manifest
"""

import hashlib
import json
import threading
import warnings
import zipfile
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .config import STORE_FORMAT_VERSION, ExperimentConfig
from .errors import ConfigHashMismatchWarning, CorruptStoreError, StoreIOError, StoreVersionError
from .utils import NumpyEncoder, convert_to_json_serializable

STATUS_OK = 'ok'
STATUS_FAILED = 'failed'

RecordKey = Tuple[str, int, pd.Timestamp]


@dataclass(eq=False)
class ForecastRecord:
    model: str
    horizon: int
    origin: pd.Timestamp
    target_date: pd.Timestamp
    realized: float = float('nan')
    draws: Optional[np.ndarray] = field(default=None, repr=False)
    status: str = STATUS_OK
    message: str = ''
    info: Dict = field(default_factory=dict, repr=False)

    @property
    def key(self) -> RecordKey:
        return (self.model, int(self.horizon), pd.Timestamp(self.origin))

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK and self.draws is not None

    @property
    def mean(self) -> float:
        return float(np.mean(self.draws)) if self.ok else float('nan')


class ForecastRecordStore:
    """Thread-safe record container; disjoint keys may be inserted concurrently"""

    def __init__(self, manifest: Optional[Dict] = None):
        self.records: Dict[RecordKey, ForecastRecord] = {}
        self.manifest: Dict = dict(manifest or {})
        self.config_mismatch = False
        self._lock = threading.Lock()

    def __len__(self):
        return len(self.records)

    def add(self, record: ForecastRecord):
        with self._lock:
            if record.key in self.records:
                raise ValueError(f"Duplicate record {record.key}")
            self.records[record.key] = record

    def get(self, model, horizon, origin) -> ForecastRecord:
        return self.records[(model, int(horizon), pd.Timestamp(origin))]

    def models(self) -> List[str]:
        return sorted({k[0] for k in self.records})

    def horizons(self) -> List[int]:
        return sorted({k[1] for k in self.records})

    def origins(self, horizon, model=None, ok_only=False) -> List[pd.Timestamp]:
        found = {
            k[2] for k, rec in self.records.items()
            if k[1] == horizon and (model is None or k[0] == model) and (rec.ok or not ok_only)
        }
        return sorted(found)

    def failures(self) -> List[ForecastRecord]:
        return [rec for rec in self.records.values() if not rec.ok]

    def sorted_keys(self) -> List[RecordKey]:
        return sorted(self.records, key=lambda k: (k[1], k[2], k[0]))

    def experiment_config(self) -> Optional[ExperimentConfig]:
        echo = self.manifest.get('config')
        return ExperimentConfig(**echo) if echo else None

    def content_hash(self) -> str:
        """Hash of every record's key, status, realization and draws"""
        digest = hashlib.sha256()
        for key in self.sorted_keys():
            rec = self.records[key]
            digest.update(f"{key[0]}|{key[1]}|{key[2]:%Y-%m}|{rec.status}|".encode('utf-8'))
            digest.update(np.float64(rec.realized).tobytes())
            if rec.draws is not None:
                digest.update(np.ascontiguousarray(rec.draws, dtype=np.float64).tobytes())
        return digest.hexdigest()


def persist_store(store: ForecastRecordStore, path):
    """Write the store losslessly to a single .npz file"""
    keys = store.sorted_keys()
    n_draws = max((store.records[k].draws.size for k in keys if store.records[k].ok), default=0)
    draws = np.full((len(keys), n_draws), np.nan)
    realized = np.empty(len(keys))
    table, info = [], []
    for i, key in enumerate(keys):
        rec = store.records[key]
        if rec.ok:
            draws[i] = rec.draws
        realized[i] = rec.realized
        table.append([rec.model, rec.horizon, f"{rec.origin:%Y-%m-%d}", f"{rec.target_date:%Y-%m-%d}",
                      rec.status, rec.message])
        info.append(convert_to_json_serializable(rec.info))

    manifest = dict(store.manifest)
    manifest['format_version'] = STORE_FORMAT_VERSION
    manifest['content_hash'] = store.content_hash()
    manifest['n_records'] = len(keys)

    try:
        with open(path, 'wb') as fh:
            np.savez_compressed(
                fh,
                manifest=np.array(json.dumps(convert_to_json_serializable(manifest), cls=NumpyEncoder)),
                keys=np.array(json.dumps(table)),
                info=np.array(json.dumps(info, cls=NumpyEncoder)),
                realized=realized,
                draws=draws,
            )
    except OSError as exc:
        raise StoreIOError(f"Could not write store to {path}: {exc}") from exc


def load_store(path, expected_config: Optional[ExperimentConfig] = None) -> ForecastRecordStore:
    """
    Read a persisted store

    Raises CorruptStoreError for unreadable archives and StoreVersionError for
    unknown formats. A config-hash mismatch only warns and sets config_mismatch.
    """
    try:
        with np.load(path, allow_pickle=False) as archive:
            manifest = json.loads(str(archive['manifest']))
            table = json.loads(str(archive['keys']))
            info = json.loads(str(archive['info']))
            realized = archive['realized']
            draws = archive['draws']
    except FileNotFoundError as exc:
        raise StoreIOError(f"Store not found: {path}") from exc
    except (zipfile.BadZipFile, ValueError, KeyError, EOFError, OSError, json.JSONDecodeError) as exc:
        raise CorruptStoreError(f"Store {path} is unreadable: {exc}") from exc

    version = manifest.get('format_version')
    if version != STORE_FORMAT_VERSION:
        raise StoreVersionError(f"Store format {version} is not supported (expected {STORE_FORMAT_VERSION})")
    if len(table) != realized.size or len(table) != draws.shape[0] or len(info) != len(table):
        raise CorruptStoreError("Store arrays disagree in length")

    store = ForecastRecordStore(manifest=manifest)
    for i, (model, horizon, origin, target, status, message) in enumerate(table):
        ok = status == STATUS_OK
        store.add(ForecastRecord(
            model=model, horizon=int(horizon), origin=pd.Timestamp(origin),
            target_date=pd.Timestamp(target), realized=float(realized[i]),
            draws=draws[i].copy() if ok else None, status=status, message=message, info=info[i],
        ))

    if manifest.get('content_hash') and manifest['content_hash'] != store.content_hash():
        raise CorruptStoreError("Store contents do not match the manifest hash")

    if expected_config is not None and manifest.get('config_hash') != expected_config.config_hash():
        warnings.warn("Store was produced with a different configuration",
                      ConfigHashMismatchWarning, stacklevel=2)
        store.config_mismatch = True
    return store
