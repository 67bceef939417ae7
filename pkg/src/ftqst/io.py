"""Plain-text data files.

Every file is a versioned, whitespace-separated table::

    # ftqst-scan v1
    # n_qubits: 1
    # value_kind: counts
    # ...
    # columns: angle_rad value
    0.00000000000e+00 1189.0
    ...

Header values are strings on disk; the readers below turn them into typed
objects. Floats are written with ``repr`` so write -> read -> write is
byte-stable; angles are stored to 12 significant digits and snapped back to
the exact pi/N grid on reading.
"""

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import FTQSTError, ScanFormatError
from .forward import AngleScan, WaveplateConfig, angle_grid
from .reconstruct import ProjectiveData

FORMAT_VERSION = 1


@dataclass
class Table:
    kind: str
    header: dict
    columns: list
    rows: list  # list of (line_number, [fields])
    path: str | None = None
    header_lines: dict = field(default_factory=dict)  # key -> line number

    def column(self, name, conv=float):
        try:
            j = self.columns.index(name)
        except ValueError:
            raise ScanFormatError(f"missing column '{name}'", self.path) from None
        out = []
        for line, fields in self.rows:
            try:
                out.append(conv(fields[j]))
            except (ValueError, IndexError):
                raise ScanFormatError(f"bad value in column '{name}'", self.path, line) from None
        return out


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (list, tuple)):
        return " ".join(fmt(v) for v in x)
    return str(x)


def render_table(kind, header, columns, rows):
    lines = [f"# ftqst-{kind} v{FORMAT_VERSION}"]
    for k, v in header.items():
        if v is None:
            continue
        lines.append(f"# {k}: {fmt(v)}")
    lines.append("# columns: " + " ".join(columns))
    for row in rows:
        lines.append(" ".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def atomic_write(path, text):
    """Write via a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(path, kind, header, columns, rows):
    atomic_write(path, render_table(kind, header, columns, rows))


def parse_table(text, path=None, kind=None):
    lines = text.splitlines()
    if not lines:
        raise ScanFormatError("empty file", path, 1)
    first = lines[0].strip()
    parts = first.lstrip("#").split()
    if not first.startswith("#") or len(parts) != 2 or not parts[0].startswith("ftqst-"):
        raise ScanFormatError("first line must be '# ftqst-<kind> v<version>'", path, 1)
    file_kind = parts[0][len("ftqst-") :]
    if parts[1] != f"v{FORMAT_VERSION}":
        raise ScanFormatError(f"unsupported format version {parts[1]!r}", path, 1)
    if kind is not None and file_kind != kind:
        raise ScanFormatError(f"expected a '{kind}' file, found '{file_kind}'", path, 1)
    header, where, columns, rows = {}, {}, None, []
    for no, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if columns is not None:
                raise ScanFormatError("header line after the data section started", path, no)
            body = line[1:].strip()
            if ":" not in body:
                raise ScanFormatError("header lines must read '# key: value'", path, no)
            key, value = (s.strip() for s in body.split(":", 1))
            if key == "columns":
                columns = value.split()
                if not columns:
                    raise ScanFormatError("empty column list", path, no)
            else:
                header[key] = value
            where[key] = no
            continue
        if columns is None:
            raise ScanFormatError("data row before the '# columns:' line", path, no)
        fields = line.split()
        if len(fields) != len(columns):
            raise ScanFormatError(f"expected {len(columns)} fields, found {len(fields)}", path, no)
        rows.append((no, fields))
    if columns is None:
        raise ScanFormatError("missing '# columns:' line", path, len(lines))
    return Table(file_kind, header, columns, rows, None if path is None else os.fspath(path), where)


def read_table(path, kind=None):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScanFormatError(f"cannot read file: {exc.strerror}", path) from None
    return parse_table(text, path, kind)


def header_value(table, key, conv, default=None, required=True):
    if key not in table.header:
        if required:
            raise ScanFormatError(f"missing header field '{key}'", table.path, 1)
        return default
    raw = table.header[key]
    try:
        return conv(raw)
    except (ValueError, TypeError):
        raise ScanFormatError(f"bad value for '{key}': {raw!r}", table.path, table.header_lines.get(key)) from None


def floats(s):
    return [float(v) for v in s.split()]


def ints(s):
    return [int(v) for v in s.split()]


def boolean(s):
    if s.lower() in ("true", "1", "yes"):
        return True
    if s.lower() in ("false", "0", "no"):
        return False
    raise ValueError(s)


# -- scans -------------------------------------------------------------------


def scan_text(scan):
    header = {
        "n_qubits": scan.n_qubits,
        "value_kind": scan.value_kind,
        "multipliers": [w.multiplier for w in scan.waveplates],
        "retardances": [float(w.retardance) for w in scan.waveplates],
        "offsets": [float(w.offset) for w in scan.waveplates],
        "time_ps": None if scan.time_ps is None else float(scan.time_ps),
    }
    rows = [(f"{t:.11e}", fmt(float(v))) for t, v in zip(scan.theta, scan.values)]
    return render_table("scan", header, ["angle_rad", "value"], rows)


def write_scan(path, scan):
    atomic_write(path, scan_text(scan))


def _snap(theta):
    start = 0.0 if abs(theta[0]) < 1e-10 else theta[0]
    grid = start + angle_grid(theta.size)
    return grid if np.max(np.abs(grid - theta)) < 1e-10 else theta


def scan_from_table(t):
    n = header_value(t, "n_qubits", int)
    kind = header_value(t, "value_kind", str)
    mult = header_value(t, "multipliers", ints)
    ret = header_value(t, "retardances", floats, [np.pi / 2] * n, required=False)
    off = header_value(t, "offsets", floats, [0.0] * n, required=False)
    time_ps = header_value(t, "time_ps", float, None, required=False)
    if not (len(mult) == len(ret) == len(off) == n):
        raise ScanFormatError("n_qubits, multipliers, retardances and offsets disagree", t.path, t.header_lines.get("multipliers"))
    theta = np.array(t.column("angle_rad"))
    values = np.array(t.column("value"))
    if theta.size == 0:
        raise ScanFormatError("scan has no data rows", t.path)
    try:
        wps = tuple(WaveplateConfig(r, m, o) for r, m, o in zip(ret, mult, off))
        return AngleScan(_snap(theta), values, kind, wps, time_ps)
    except FTQSTError:
        raise
    except ValueError as exc:
        raise ScanFormatError(str(exc), t.path) from None


def read_scan(path):
    return scan_from_table(read_table(path, "scan"))


def projective_text(data):
    header = {
        "n_qubits": data.n_qubits,
        "value_kind": data.value_kind,
        "time_ps": None if data.time_ps is None else float(data.time_ps),
    }
    rows = [(lab, fmt(float(v))) for lab, v in zip(data.labels, data.values)]
    return render_table("projective", header, ["basis", "value"], rows)


def write_projective(path, data):
    atomic_write(path, projective_text(data))


def projective_from_table(t):
    kind = header_value(t, "value_kind", str)
    time_ps = header_value(t, "time_ps", float, None, required=False)
    labels = t.column("basis", str)
    values = t.column("value")
    try:
        return ProjectiveData(tuple(labels), values, kind, time_ps)
    except ValueError as exc:
        raise ScanFormatError(str(exc), t.path) from None


def read_data(path):
    """Scan or projective dataset, by the file's kind line."""
    t = read_table(path)
    if t.kind == "scan":
        return scan_from_table(t)
    if t.kind == "projective":
        return projective_from_table(t)
    raise ScanFormatError(f"expected a scan or projective file, found '{t.kind}'", path, 1)


# -- matrices ----------------------------------------------------------------


def matrix_rows(m):
    m = np.asarray(m, dtype=complex)
    return [(i, j, fmt(float(m[i, j].real)), fmt(float(m[i, j].imag))) for i in range(m.shape[0]) for j in range(m.shape[1])]


def matrix_from_table(t, real="real", imag="imag"):
    r = t.column("row", int)
    c = t.column("col", int)
    re = t.column(real)
    im = t.column(imag)
    d = int(round(np.sqrt(len(r))))
    if d * d != len(r) or not r:
        raise ScanFormatError("matrix table must have d*d rows", t.path)
    m = np.zeros((d, d), dtype=complex)
    for i, j, a, b in zip(r, c, re, im):
        if not (0 <= i < d and 0 <= j < d):
            raise ScanFormatError(f"matrix index ({i}, {j}) out of range", t.path)
        m[i, j] = a + 1j * b
    return m


def write_json(path, obj):
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")
