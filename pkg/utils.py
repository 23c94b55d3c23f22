# utils.py
import hashlib
import json
import math
import time

import numpy as np


class NumericalError(ArithmeticError):
    """A computation could not produce a finite, meaningful number."""


def to_db(value):
    """Convert a variance ratio to decibels (10·log10); non-positive values give nan."""
    value = np.asarray(value, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        out = np.where(value > 0, 10.0 * np.log10(np.where(value > 0, value, 1.0)), np.nan)
    return float(out) if out.ndim == 0 else out


def db_error(value, error):
    """Propagate a linear-scale standard error into dB"""
    if value <= 0 or not math.isfinite(value):
        return math.nan
    return 10.0 / math.log(10.0) * error / value


def canonical_json(data):
    """Serialize ``data`` with sorted keys and no whitespace variance"""
    return json.dumps(data, sort_keys=True, separators=(',', ':'), default=_json_default)


def stable_hash(data, length=12):
    """Short SHA-256 digest of the canonical JSON form of ``data``"""
    return hashlib.sha256(canonical_json(data).encode('utf-8')).hexdigest()[:length]


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def format_seconds(seconds):
    """Format seconds into HH:MM:SS or MM:SS"""
    hours = int(seconds // 3600)
    minutes = int((seconds % 3600) // 60)
    seconds = int(seconds % 60)

    if hours > 0:
        return f"{hours:02d}:{minutes:02d}:{seconds:02d}"
    return f"{minutes:02d}:{seconds:02d}"


class Timer:
    """Wall-clock timer used for run provenance"""
    def __init__(self):
        self.start_time = None

    def start(self):
        """Start timer"""
        self.start_time = time.perf_counter()

    def stop(self):
        """Stop timer and return elapsed time"""
        if self.start_time is None:
            return 0

        elapsed = time.perf_counter() - self.start_time
        self.start_time = None
        return elapsed

    def get_elapsed(self):
        """Get elapsed time without stopping timer"""
        if self.start_time is None:
            return 0

        return time.perf_counter() - self.start_time
