"""
Shared helpers: console output, JSON conversion, file hashing
"""

import hashlib
import json

import numpy as np
import pandas as pd
from rich.console import Console

console = Console(stderr=True, highlight=False)

_VERBOSITY = {'level': 1}


def set_verbosity(level):
    _VERBOSITY['level'] = int(level)


def say(message, level=1):
    """Print a progress line if the current verbosity allows it"""
    if _VERBOSITY['level'] >= level:
        console.print(message)


def banner(title, level=1):
    say("\n" + "=" * 70, level)
    say(title, level)
    say("=" * 70, level)


class NumpyEncoder(json.JSONEncoder):
    """Custom JSON encoder for numpy and pandas types"""
    def default(self, obj):
        if isinstance(obj, np.integer):
            return int(obj)
        elif isinstance(obj, np.floating):
            return float(obj)
        elif isinstance(obj, np.ndarray):
            return obj.tolist()
        elif isinstance(obj, np.bool_):
            return bool(obj)
        elif isinstance(obj, pd.Timestamp):
            return obj.strftime('%Y-%m-%d')
        return super().default(obj)


def convert_to_json_serializable(obj):
    """Recursively convert numpy/pandas values into plain Python types"""
    if isinstance(obj, dict):
        return {str(key): convert_to_json_serializable(value) for key, value in obj.items()}
    elif isinstance(obj, (list, tuple)):
        return [convert_to_json_serializable(item) for item in obj]
    elif isinstance(obj, np.ndarray):
        return convert_to_json_serializable(obj.tolist())
    elif isinstance(obj, np.integer):
        return int(obj)
    elif isinstance(obj, np.floating):
        return convert_to_json_serializable(float(obj))
    elif isinstance(obj, np.bool_):
        return bool(obj)
    elif isinstance(obj, pd.Timestamp):
        return obj.strftime('%Y-%m-%d')
    elif isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ('inf' if obj > 0 else '-inf')
    return obj


def dump_json(payload, path):
    with open(path, 'w', encoding='utf-8') as fh:
        json.dump(convert_to_json_serializable(payload), fh, indent=2, cls=NumpyEncoder)
    return path


def file_sha256(path, chunk_size=1 << 20):
    digest = hashlib.sha256()
    with open(path, 'rb') as fh:
        for chunk in iter(lambda: fh.read(chunk_size), b''):
            digest.update(chunk)
    return digest.hexdigest()


def month_stamp(value):
    """Normalise a date-like value to a first-of-month Timestamp"""
    ts = pd.Timestamp(value)
    return pd.Timestamp(year=ts.year, month=ts.month, day=1)
