"""Trajectory persistence: frozen-column CSV and canonical JSON."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from ..lyapunov import SmoothnessEstimate
from ..metrics import MechanismSummary
from ..optimizers import StepRecord, TrajectoryLog

CSV_COLUMNS = ("step", "eta", "lambda", "d_norm", "V", "cos_phi", "conflict", "J_team", "regime")
LOG_SCHEMA_VERSION = 1


def fmt_float(x) -> str:
    """Shortest string that round-trips the double exactly (at most 17 digits)."""
    if x is None:
        return "nan"
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def csv_text(log: TrajectoryLog, log_every: int = 1) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in log.records:
        if r.k % log_every:
            continue
        w.writerow([
            r.k,
            fmt_float(r.eta),
            fmt_float(r.lambda_star),
            fmt_float(r.d_norm),
            fmt_float(r.V),
            fmt_float(r.cos_phi),
            int(r.conflict),
            fmt_float(r.J_team),
            r.regime,
        ])
    return buf.getvalue()


def read_csv(path) -> dict[str, list]:
    """Columns of a trajectory CSV as lists (numeric columns as floats)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError(f"{path}: header does not match {','.join(CSV_COLUMNS)}")
    cols: dict[str, list] = {c: [] for c in CSV_COLUMNS}
    for row in rows[1:]:
        for c, v in zip(CSV_COLUMNS, row):
            cols[c].append(v if c == "regime" else float(v))
    return cols


def log_to_dict(log: TrajectoryLog) -> dict:
    return {
        "schema_version": LOG_SCHEMA_VERSION,
        "fingerprint": log.fingerprint,
        "records": [
            {
                "k": r.k,
                "eta": r.eta,
                "lambda_star": r.lambda_star,
                "d_norm": r.d_norm,
                "V": r.V,
                "cos_phi": r.cos_phi,
                "conflict": r.conflict,
                "J_team": r.J_team,
                "regime": r.regime,
            }
            for r in log.records
        ],
        "summary": None if log.summary is None else log.summary.to_dict(),
        "final_theta": [float(x) for x in log.final_theta],
        "final_V": log.final_V,
        "sup_d_norm": log.sup_d_norm,
        "smoothness": None if log.smoothness is None else {
            "L": log.smoothness.L,
            "method": log.smoothness.method,
            "sample_count": log.smoothness.sample_count,
            "degenerate": log.smoothness.degenerate,
        },
        "field_evals": log.field_evals,
        "error": log.error,
    }


def log_from_dict(d: dict) -> TrajectoryLog:
    if d.get("schema_version") != LOG_SCHEMA_VERSION:
        raise ValueError(f"unsupported log schema version {d.get('schema_version')!r}")
    sm = d.get("smoothness")
    summary = d.get("summary")
    return TrajectoryLog(
        records=[StepRecord(**r) for r in d["records"]],
        final_theta=np.asarray(d["final_theta"], dtype=float),
        final_V=d["final_V"],
        sup_d_norm=d["sup_d_norm"],
        smoothness=None if sm is None else SmoothnessEstimate(**sm),
        field_evals=d["field_evals"],
        error=d["error"],
        fingerprint=d["fingerprint"],
        summary=None if summary is None else MechanismSummary(**summary),
    )


def json_text(log: TrajectoryLog) -> str:
    return json.dumps(log_to_dict(log), indent=1, sort_keys=True) + "\n"


def persist_log(log: TrajectoryLog, fmt: str, path, log_every: int = 1) -> Path:
    """Write ``log`` as CSV or JSON. I/O failures surface as OSError naming the path."""
    if fmt == "csv":
        text = csv_text(log, log_every)
    elif fmt == "json":
        text = json_text(log)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def load_log(path) -> TrajectoryLog:
    return log_from_dict(json.loads(Path(path).read_text()))
