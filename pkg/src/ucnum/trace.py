"""Run traces: typed column tables plus run metadata.

A trace is what every engine returns: named columns of equal length
(ints or floats), and a metadata dict holding the echoed config, its
hash, the seed, wall time, and algorithm-specific aggregates.

CSV bodies are a pure function of the run's random streams and config;
wall-clock time lives only in the JSON summary so that two runs with
identical configuration produce byte-identical CSV files.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__version__ = "0.1.0"


def config_hash(config: dict) -> str:
    """Stable short hash of a canonical JSON rendering of the config."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _format_cell(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if v != v:
        return "nan"
    return repr(v)


@dataclass
class RunTrace:
    """Columnar record of one run."""

    algo: str
    columns: tuple[str, ...]
    data: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(self.data[c]) for c in self.columns}
        if len(lengths) > 1:
            raise ValueError(f"ragged trace columns: {lengths}")

    def __len__(self) -> int:
        return len(self.data[self.columns[0]]) if self.columns else 0

    def column(self, name: str) -> np.ndarray:
        return self.data[name]

    def to_csv(self, path) -> Path:
        """Write the trace body; deterministic for a fixed config+seed."""
        path = Path(path)
        rows = [",".join(self.columns)]
        cols = [self.data[c] for c in self.columns]
        for r in range(len(self)):
            rows.append(",".join(_format_cell(col[r]) for col in cols))
        path.write_text("\n".join(rows) + "\n")
        return path

    def summary(self) -> dict:
        return {
            "algo": self.algo,
            "version": __version__,
            "rows": len(self),
            **self.meta,
        }

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True, default=_jsonable) + "\n")
        return path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"not JSON-serializable: {type(obj)}")


class Stopwatch:
    """Tiny context helper so engines report wall time uniformly."""

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        return False
