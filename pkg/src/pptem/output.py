"""CSV and plot-data writers.

Every file starts with ``#`` comment lines holding run metadata (including a
timestamp); the body below is a plain CSV whose numbers use ``%.17g`` so
that reading it back recovers every float bit for bit.
"""

from __future__ import annotations

import csv
import io
import math
import os
from datetime import datetime, timezone
from pathlib import Path

from .experiments import ErrorRow, ErrorTable, PositivityReport, build_error_table

OUTPUT_DIR_ENV = "PPTEM_OUTPUT_DIR"


def fmt(x) -> str:
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    return "%.17g" % x


def output_dir(explicit: str | os.PathLike | None = None) -> Path:
    path = Path(explicit or os.environ.get(OUTPUT_DIR_ENV) or ".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def header_lines(metadata: dict, timestamp: str | None = None) -> list[str]:
    from . import __version__

    stamp = timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds")
    lines = [f"# tool=pptem {__version__}", f"# timestamp={stamp}"]
    for key, value in metadata.items():
        if isinstance(value, dict):
            value = ";".join(f"{k}={fmt(v) if isinstance(v, (int, float)) else v}" for k, v in value.items())
        elif isinstance(value, float):
            value = fmt(value)
        lines.append(f"# {key}={value}")
    return lines


def error_table_body(table: ErrorTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta", "rms_error", "diverged_count"])
    for r in table.rows:
        w.writerow([fmt(r.delta), fmt(r.rms_error), r.diverged_count])
    w.writerow(["fitted_order", fmt(table.fitted_order), fmt(table.fit_intercept)])
    return buf.getvalue()


def positivity_body(report: PositivityReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scheme", "delta", "percent_nonpositive", "percent_post_clamp", "percent_diverged"])
    for r in report.rows:
        w.writerow([r.scheme, fmt(r.delta), fmt(r.percent_nonpositive), fmt(r.percent_post_clamp),
                    fmt(r.percent_diverged)])
    return buf.getvalue()


def plot_body(table: ErrorTable) -> str:
    """``log2(delta), log2(error)`` pairs plus a slope-1/2 line through the first finite point."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["log2_delta", "log2_error", "log2_reference_half"])
    finite = [r for r in table.rows if math.isfinite(r.rms_error) and r.rms_error > 0]
    anchor = finite[0] if finite else None
    for r in table.rows:
        ld = math.log2(r.delta)
        le = math.log2(r.rms_error) if r in finite else math.nan
        ref = math.log2(anchor.rms_error) + 0.5 * (ld - math.log2(anchor.delta)) if anchor else math.nan
        w.writerow([fmt(ld), fmt(le), fmt(ref)])
    return buf.getvalue()


def write_file(path: Path, body: str, metadata: dict, timestamp: str | None = None) -> Path:
    text = "\n".join(header_lines(metadata, timestamp)) + "\n" + body
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return Path(path)


def split_body(text: str) -> str:
    """Strip the comment header, returning the CSV body."""
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


def read_metadata(path) -> dict:
    meta = {}
    for line in Path(path).read_text().splitlines():
        if line.startswith("# ") and "=" in line:
            key, _, value = line[2:].partition("=")
            meta[key] = value
    return meta


def read_error_table(path) -> ErrorTable:
    rows = list(csv.reader(io.StringIO(split_body(Path(path).read_text()))))
    if not rows or rows[0] != ["delta", "rms_error", "diverged_count"]:
        raise ValueError(f"{path} is not an error-table CSV")
    body, trailer = rows[1:-1], rows[-1]
    if trailer[0] != "fitted_order":
        raise ValueError(f"{path} has no fitted_order trailer")
    table = build_error_table(
        [float(r[0]) for r in body], [float(r[1]) for r in body], [int(r[2]) for r in body]
    )
    # keep the stored fit even if refitting would round differently
    table.fitted_order = float(trailer[1])
    table.fit_intercept = float(trailer[2])
    return table


def read_positivity(path) -> list[dict]:
    reader = csv.DictReader(io.StringIO(split_body(Path(path).read_text())))
    return [{k: (v if k == "scheme" else float(v)) for k, v in row.items()} for row in reader]


__all__ = [
    "ErrorRow",
    "OUTPUT_DIR_ENV",
    "error_table_body",
    "fmt",
    "header_lines",
    "output_dir",
    "plot_body",
    "positivity_body",
    "read_error_table",
    "read_metadata",
    "read_positivity",
    "split_body",
    "write_file",
]
