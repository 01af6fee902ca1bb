"""Trace, scan, table and results files.

Trace files are line-oriented text: a block of ``# key: value`` metadata
lines (values JSON-encoded, nested keys dotted), a column header line, then
comma-separated rows. Floats are written with 17 significant digits so a file
round-trips exactly and identical runs give identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np
import yaml

from .traces import FrequencyScan, TransmissionTrace

FORMAT_NAME = "nanocavity-trace"
FORMAT_VERSION = 1
TRACE_COLUMNS = ("time_s", "transmission")
SCAN_COLUMNS = ("scan_coordinate", "transmission")


class TraceFormatError(ValueError):
    pass


def atomic_write(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _flatten(d, prefix=""):
    out = {}
    for key, value in d.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


def _unflatten(flat):
    out = {}
    for name, value in flat.items():
        node = out
        *parents, leaf = name.split(".")
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = value
    return out


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, (tuple, list)):
        return [_jsonable(v) for v in value]
    return value


def _format_rows(columns, a, b) -> str:
    lines = [",".join(columns)]
    lines += [f"{x:.17g},{y:.17g}" for x, y in zip(a, b)]
    return "\n".join(lines) + "\n"


def _header(kind, metadata) -> str:
    flat = {"format": FORMAT_NAME, "format_version": FORMAT_VERSION, "kind": kind}
    flat.update({k: v for k, v in _flatten(metadata).items() if k != "kind"})
    return "".join(f"# {k}: {json.dumps(_jsonable(v))}\n" for k, v in flat.items())


def format_trace(trace: TransmissionTrace) -> str:
    return _header("transit", trace.metadata) + _format_rows(TRACE_COLUMNS, trace.time,
                                                           trace.transmission)


def write_trace(path, trace: TransmissionTrace) -> None:
    atomic_write(path, format_trace(trace))


def write_scan(path, scan: FrequencyScan) -> None:
    meta = dict(scan.metadata, sideband_spacing_hz=scan.sideband_spacing)
    atomic_write(path, _header("scan", meta) + _format_rows(SCAN_COLUMNS, scan.coordinate,
                                                           scan.transmission))


def read_data_file(path) -> TransmissionTrace | FrequencyScan:
    """Read a trace or scan file, dispatching on its ``kind`` header."""
    try:
        text = Path(path).read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise TraceFormatError(f"{path}: cannot read: {exc}") from exc
    meta, body = {}, []
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.startswith("#"):
            key, sep, value = line[1:].partition(":")
            if not sep:
                raise TraceFormatError(f"{path}:{lineno}: malformed header line")
            try:
                meta[key.strip()] = json.loads(value)
            except json.JSONDecodeError as exc:
                raise TraceFormatError(f"{path}:{lineno}: bad header value: {exc}") from exc
        elif line.strip():
            body.append((lineno, line))
    if meta.get("format") != FORMAT_NAME:
        raise TraceFormatError(f"{path}: not a {FORMAT_NAME} file")
    if meta.get("format_version") != FORMAT_VERSION:
        raise TraceFormatError(f"{path}: unsupported format_version {meta.get('format_version')!r}")
    kind = meta.get("kind", "transit")
    columns = SCAN_COLUMNS if kind == "scan" else TRACE_COLUMNS
    if not body or tuple(c.strip() for c in body[0][1].split(",")) != columns:
        raise TraceFormatError(f"{path}: expected column header {','.join(columns)}")
    try:
        data = np.array([[float(v) for v in line.split(",")] for _, line in body[1:]],
                        dtype=float).reshape(-1, 2)
    except ValueError as exc:
        raise TraceFormatError(f"{path}: bad data row: {exc}") from exc
    metadata = _unflatten({k: v for k, v in meta.items()
                           if k not in ("format", "format_version")})
    try:
        if kind == "scan":
            spacing = metadata.pop("sideband_spacing_hz", None)
            if spacing is None:
                raise TraceFormatError(f"{path}: scan file lacks sideband_spacing_hz")
            return FrequencyScan(data[:, 0], data[:, 1], spacing, metadata)
        return TransmissionTrace(data[:, 0], data[:, 1], metadata)
    except ValueError as exc:
        if isinstance(exc, TraceFormatError):
            raise
        raise TraceFormatError(f"{path}: {exc}") from exc


def read_trace(path) -> TransmissionTrace:
    data = read_data_file(path)
    if not isinstance(data, TransmissionTrace):
        raise TraceFormatError(f"{path}: not a transit trace")
    return data


def format_table(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def write_table(path, columns, rows) -> None:
    atomic_write(path, format_table(columns, rows))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def dump_results(record: dict) -> str:
    return yaml.safe_dump(_plain(record), sort_keys=False, default_flow_style=False)


def write_results(path, record: dict) -> None:
    atomic_write(path, dump_results(record))


def read_results(path) -> dict:
    return yaml.safe_load(Path(path).read_text())
