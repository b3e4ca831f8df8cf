"""CSV tables, profile files and the JSON provenance sidecar.

Numbers are written with ``repr`` so repeated runs of the same
configuration produce identical bytes. Wall-clock timings are only
written when requested, since they differ between runs.
"""
from __future__ import annotations

import csv
import json
import platform
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import __version__
from .config import ExperimentConfig

DETERMINISM_NOTE = ("no random numbers are drawn; identical configurations give identical "
                    "outputs apart from wall-clock fields")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def write_table(path: str | Path, rows: Iterable[Mapping]) -> Path:
    rows = list(rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        raise ValueError(f"no rows to write to {path}")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})
    return path


def write_profile(path: str | Path, x, mean, sd=None) -> Path:
    """Columns x, mean, sd (sd omitted when not given)."""
    x, mean = np.asarray(x), np.asarray(mean)
    cols = {"x": x, "mean": mean}
    if sd is not None:
        cols["sd"] = np.asarray(sd)
    rows = ({k: v[i] for k, v in cols.items()} for i in range(x.size))
    return write_table(path, rows)


def provenance(cfg: ExperimentConfig, command: str, files: Iterable[str | Path] = (),
               timings: Mapping[str, float] | None = None, extra: Mapping | None = None) -> dict:
    d = {
        "command": command,
        "config": cfg.to_dict(),
        "config_digest": cfg.digest(),
        "package_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "determinism": DETERMINISM_NOTE,
        "files": sorted(Path(f).name for f in files),
    }
    if timings is not None and "timing" in cfg.outputs:
        d["timings_s"] = {k: float(v) for k, v in sorted(timings.items())}
    if extra:
        d.update(extra)
    return d


def write_provenance(path: str | Path, prov: Mapping) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(prov, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
