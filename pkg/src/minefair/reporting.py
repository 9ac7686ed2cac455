"""Tabular outputs, plot-data files and the per-run manifest."""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import FitError
from .theory import fit_line, predict_mpr

MANIFEST = "manifest.json"


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def _json_value(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_table(rows: list[dict], path: Path, fmt: str = "csv") -> Path:
    """Write rows as CSV (header from the first row's keys) or a JSON list."""
    path = Path(path).with_suffix("." + fmt)
    if fmt == "json":
        text = json.dumps([{k: _json_value(v) for k, v in r.items()} for r in rows], indent=2) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if rows:
            w.writerow(list(rows[0]))
            for r in rows:
                w.writerow([_cell(v) for v in r.values()])
        text = buf.getvalue()
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def emit_plot_data(series: dict, out_dir) -> list[Path]:
    """One ``<label>.dat`` per series: two whitespace-separated columns sorted by x."""
    if not series:
        raise ValueError("no series to write")
    out_dir = Path(out_dir)
    written = []
    for label, (x, y) in series.items():
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.size == 0 or x.shape != y.shape:
            raise ValueError(f"series {label!r} is empty or ragged")
        order = np.argsort(x, kind="stable")
        path = out_dir / f"{label}.dat"
        lines = [f"# x y ({label})"] + [f"{float(x[i])!r} {float(y[i])!r}" for i in order]
        try:
            path.write_text("\n".join(lines) + "\n")
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        written.append(path)
    return written


def theory_row(alpha, mpr, d: float, T: float) -> dict:
    """One slope-table line comparing the fitted MPR line to ``2f``."""
    alpha = np.asarray(alpha, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pred = predict_mpr(alpha, d, T)
    flag = ""
    try:
        fit = fit_line(alpha, mpr)
        slope, corr = fit.slope, fit.correlation
        zero = fit.zero_point if slope != 0 else float("nan")
    except FitError:
        slope = zero = corr = float("nan")
        flag = "degenerate"
    if d == 0 or slope == 0:
        flag = "degenerate"
    elif d / T > 0.1:
        flag = "outside_validated_range"
    return {
        "d_over_T": d / T,
        "slope_theory": pred.slope_2f,
        "slope_numeric": slope,
        "zero_point_numeric": zero,
        "sum_alpha_sq": pred.zero_point_sum_sq,
        "correlation": corr,
        "flag": flag,
    }


@dataclass
class RunManifest:
    tool_version: str
    command: str
    scenario_fingerprint: str
    seeds: dict = field(default_factory=dict)
    started: str = ""
    finished: str = ""
    command_line: list = field(default_factory=list)
    outputs: list = field(default_factory=list)

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / MANIFEST
        path.write_text(json.dumps(asdict(self), indent=2) + "\n")
        return path


def now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def new_manifest(version: str, command: str, fingerprint: str, seeds: dict) -> RunManifest:
    return RunManifest(version, command, fingerprint, seeds, started=now(), command_line=list(sys.argv))
