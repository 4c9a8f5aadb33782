"""Trace and field-map file formats, and atomic writers for run artefacts.

Trace files are comma-separated with an optional header row and '#'
comments.  Recognised header names are ``freq``, ``re``, ``im``, ``mag_dB``,
``mag_linear`` and ``phase_deg``; a unit suffix on the frequency column
(``freq_GHz``) is converted to Hz at parse time.  Without a header the
column count decides: two columns are ``freq_Hz, mag_dB`` and three are
``freq_Hz, re, im``.
"""

import csv
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .cavity import ComplexTrace
from .exceptions import DomainError, ParseError
from .sweep import FieldSweepMap

FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
FIELD_UNITS = {"t": 1.0, "mt": 1e-3, "ut": 1e-6, "g": 1e-4}
TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}
TRACE_FORMATS = ("auto", "re_im", "mag_db", "mag_phase")


@dataclass
class TraceFile:
    trace: ComplexTrace
    path: str
    columns: dict
    units: dict
    skipped_rows: int = 0
    comment_lines: int = 0

    @property
    def magnitude_only(self):
        return self.trace.magnitude_only


def _split_unit(name, table, default_unit):
    """``'freq_GHz' -> ('freq', scale)``; names without a known suffix use ``default_unit``."""
    base, _, suffix = name.strip().rpartition("_")
    if base and suffix.lower() in table:
        return base.lower(), table[suffix.lower()], suffix
    return name.strip().lower(), table[default_unit.lower()], default_unit


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def _read_rows(path):
    """Yield ``(line_number, cells)`` for non-blank, non-comment lines; count comments."""
    rows, comments = [], 0
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc.strerror}") from exc
    with handle:
        for lineno, cells in enumerate(csv.reader(handle), start=1):
            if not cells or not "".join(cells).strip():
                continue
            if cells[0].lstrip().startswith("#"):
                comments += 1
                continue
            rows.append((lineno, [c.strip() for c in cells]))
    return rows, comments


def _check_increasing(values, lines, what, path):
    bad = np.nonzero(np.diff(values) <= 0)[0]
    if bad.size:
        i = int(bad[0]) + 1
        kind = "duplicate" if values[i] == values[i - 1] else "decreasing"
        raise ParseError(f"{path}: line {lines[i]}: {kind} {what} {float(values[i])!r} "
                         f"(previous value on line {lines[i - 1]})")


def _trace_columns(header, n_cols, fmt):
    """Map a header (or column count) and format hint to column roles."""
    if header is None:
        if fmt == "auto":
            fmt = {2: "mag_db", 3: "re_im"}.get(n_cols)
            if fmt is None:
                raise ParseError(f"cannot infer trace format from {n_cols} columns; give a header")
        roles = {"re_im": ["freq", "re", "im"], "mag_db": ["freq", "mag_db"],
                 "mag_phase": ["freq", "mag_linear", "phase_deg"]}[fmt]
        return {r: i for i, r in enumerate(roles)}, FREQ_UNITS["hz"], "Hz", fmt
    names = {}
    scale, unit = 1.0, "Hz"
    for i, raw in enumerate(header):
        low = raw.strip().lower()
        if low.startswith("freq") or low.startswith("f_") or low == "f":
            _, scale, unit = _split_unit(raw, FREQ_UNITS, "Hz")
            names["freq"] = i
        elif low in ("re", "real", "re_s11", "s11_re"):
            names["re"] = i
        elif low in ("im", "imag", "im_s11", "s11_im"):
            names["im"] = i
        elif low in ("mag_db", "db", "s11_db"):
            names["mag_db"] = i
        elif low in ("mag_linear", "mag", "abs"):
            names["mag_linear"] = i
        elif low in ("phase_deg", "phase"):
            names["phase_deg"] = i
    if "freq" not in names:
        raise ParseError(f"header {header} has no frequency column")
    detected = ("re_im" if {"re", "im"} <= names.keys() else
                "mag_phase" if {"mag_linear", "phase_deg"} <= names.keys() else
                "mag_db" if "mag_db" in names else None)
    if fmt == "auto":
        fmt = detected
    if fmt is None or fmt != detected and not _has_roles(names, fmt):
        raise ParseError(f"header {header} does not provide columns for format {fmt!r}")
    return names, scale, unit, fmt


def _has_roles(names, fmt):
    need = {"re_im": {"re", "im"}, "mag_db": {"mag_db"}, "mag_phase": {"mag_linear", "phase_deg"}}[fmt]
    return need <= names.keys()


def load_trace(path, fmt="auto"):
    """Read a reflection trace.

    Parameters
    ----------
    path : str or path-like
    fmt : {"auto", "re_im", "mag_db", "mag_phase"}
        ``mag_db`` values are converted with 10**(dB/20) and give a
        magnitude-only trace.

    Returns
    -------
    TraceFile

    Raises
    ------
    ParseError
        Unsorted or duplicate frequencies (naming the first offending line),
        an unusable header, or fewer than two numeric rows.
    """
    if fmt not in TRACE_FORMATS:
        raise DomainError(f"format must be one of {TRACE_FORMATS}, got {fmt!r}")
    path = os.fspath(path)
    rows, comments = _read_rows(path)
    header = None
    if rows and not all(_is_number(c) for c in rows[0][1] if c):
        header = rows[0][1]
        rows = rows[1:]
    n_cols = max((len(c) for _, c in rows), default=0)
    columns, scale, unit, fmt = _trace_columns(header, n_cols, fmt)
    needed = max(columns.values()) + 1
    lines, data, skipped = [], [], 0
    for lineno, cells in rows:
        try:
            values = [float(cells[i]) for i in range(needed)]
        except (ValueError, IndexError):
            skipped += 1
            continue
        if not all(np.isfinite(values)):
            skipped += 1
            continue
        lines.append(lineno)
        data.append(values)
    if len(data) < 2:
        raise ParseError(f"{path}: need at least 2 numeric rows, found {len(data)}")
    data = np.array(data)
    freq = data[:, columns["freq"]] * scale
    _check_increasing(freq, lines, "frequency", path)
    if fmt == "re_im":
        s11 = data[:, columns["re"]] + 1j * data[:, columns["im"]]
        mag_only = False
    elif fmt == "mag_phase":
        s11 = data[:, columns["mag_linear"]] * np.exp(1j * np.deg2rad(data[:, columns["phase_deg"]]))
        mag_only = False
    else:
        s11 = 10.0 ** (data[:, columns["mag_db"]] / 20.0)
        mag_only = True
    meta = {"source": path, "format": fmt, "skipped_rows": skipped}
    trace = ComplexTrace(freq, s11, meta, magnitude_only=mag_only)
    return TraceFile(trace, path, columns, {"frequency": unit}, skipped, comments)


def load_table(path, columns=2, units=TIME_UNITS, default_unit="s"):
    """Read a numeric ``x, y`` table with optional header; the x unit suffix is converted.

    Returns ``(x, y, skipped_rows)`` with ``x`` strictly increasing.
    """
    path = os.fspath(path)
    rows, _ = _read_rows(path)
    scale = units[default_unit]
    if rows and not all(_is_number(c) for c in rows[0][1] if c):
        _, scale, _ = _split_unit(rows[0][1][0], units, default_unit)
        rows = rows[1:]
    lines, data, skipped = [], [], 0
    for lineno, cells in rows:
        try:
            data.append([float(cells[i]) for i in range(columns)])
            lines.append(lineno)
        except (ValueError, IndexError):
            skipped += 1
    if len(data) < 2:
        raise ParseError(f"{path}: need at least 2 numeric rows, found {len(data)}")
    data = np.array(data)
    data[:, 0] *= scale
    _check_increasing(data[:, 0], lines, "abscissa", path)
    return data[:, 0], data[:, 1], skipped


def load_field_map(path, scale="dB"):
    """Read a field-sweep grid.

    The first row holds the frequencies (Hz) after one leading cell, which may
    be blank or a field-unit label such as ``B_mT``; every further row is
    ``field, value, value, ...``.
    """
    path = os.fspath(path)
    rows, _ = _read_rows(path)
    if len(rows) < 2:
        raise ParseError(f"{path}: a field map needs a header row and at least one data row")
    head_line, head = rows[0]
    field_scale = 1.0
    if head[0]:
        _, field_scale, _ = _split_unit(head[0], FIELD_UNITS, "T")
    try:
        freqs = np.array([float(c) for c in head[1:]])
    except ValueError as exc:
        raise ParseError(f"{path}: line {head_line}: non-numeric frequency header ({exc})") from exc
    if freqs.size < 2:
        raise ParseError(f"{path}: line {head_line}: need at least 2 frequencies")
    _check_increasing(freqs, [head_line] * freqs.size, "frequency", path)
    fields, body, lines = [], [], []
    for lineno, cells in rows[1:]:
        if len(cells) != freqs.size + 1:
            raise ParseError(f"{path}: line {lineno}: ragged row with {len(cells) - 1} values, "
                             f"expected {freqs.size}")
        try:
            values = [float(c) for c in cells]
        except ValueError as exc:
            raise ParseError(f"{path}: line {lineno}: {exc}") from exc
        fields.append(values[0] * field_scale)
        body.append(values[1:])
        lines.append(lineno)
    fields = np.array(fields)
    _check_increasing(fields, lines, "field", path)
    meta = {"source": path}
    return FieldSweepMap(fields, freqs, np.array(body), scale, meta)


# -- writers -------------------------------------------------------------------


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def write_json(path, obj):
    atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _fmt(v):
    return repr(float(v)) if np.isfinite(v) else "nan"


def write_columns(path, columns):
    """Write named 1-D arrays of equal length as CSV (``columns`` is an ordered dict)."""
    names = list(columns)
    arrays = [np.asarray(columns[n], dtype=float) for n in names]
    lines = [",".join(names)]
    lines += [",".join(_fmt(v) for v in row) for row in zip(*arrays)]
    atomic_write(path, "\n".join(lines) + "\n")


def write_trace(path, trace):
    if trace.magnitude_only:
        write_columns(path, {"freq_Hz": trace.frequencies, "mag_dB": 20 * np.log10(trace.magnitude)})
    else:
        write_columns(path, {"freq_Hz": trace.frequencies, "re": trace.s11.real, "im": trace.s11.imag})


def write_field_map(path, sweep_map):
    """Write a map in the grid convention read by :func:`load_field_map` (dB values)."""
    lines = ["," + ",".join(_fmt(f) for f in sweep_map.frequencies)]
    db = sweep_map.to_db()
    for b, row in zip(sweep_map.fields, db):
        lines.append(_fmt(b) + "," + ",".join(_fmt(v) for v in row))
    atomic_write(path, "\n".join(lines) + "\n")


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
