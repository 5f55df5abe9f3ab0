"""CSV reading and writing for traces, detections, estimates and reports.

All files are UTF-8, comma separated, with a mandatory header row.
Writes go to a temporary file that is renamed into place.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .detection import DetectionResult
from .errors import ParameterError, ParseError
from .sensor import NodeId, SensorGrid, Trace

# relative variation of the time step tolerated on ingest
RATE_TOLERANCE = 0.01


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> Path:
    return atomic_write(path, to_csv(header, rows))


def read_csv(path, header=None) -> tuple[list[str], list[tuple[int, list[str]]]]:
    """Rows as ``(line number, fields)``; checks the header and row widths."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read: {e.strerror}", str(path)) from None
    except UnicodeDecodeError:
        raise ParseError("file is not valid UTF-8", str(path)) from None
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ParseError("missing header row", str(path), 1)
    head = [h.strip() for h in next(csv.reader([lines[0]]))]
    if header is not None and head != list(header):
        raise ParseError(f"expected header {','.join(header)!r}, got {lines[0]!r}", str(path), 1)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = [f.strip() for f in next(csv.reader([line]))]
        if len(fields) != len(head):
            raise ParseError(f"ragged row: {len(fields)} fields, header has {len(head)}", str(path), lineno)
        rows.append((lineno, fields))
    return head, rows


def _float(text, path, lineno, what):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"{what}: not a number: {text!r}", str(path), lineno) from None


# --- traces -----------------------------------------------------------------

def trace_header(nodes) -> list[str]:
    return ["time_s"] + [n.label for n in nodes]


def traces_to_csv(traces) -> str:
    items = sorted(traces.values() if isinstance(traces, dict) else traces, key=lambda tr: tr.node)
    if not items:
        raise ParameterError("no traces to write")
    n = len(items[0])
    rate = items[0].sample_rate
    if any(len(tr) != n or tr.sample_rate != rate for tr in items):
        raise ParameterError("traces must share length and sample rate")
    t = items[0].times()
    data = np.column_stack([t] + [tr.samples for tr in items])
    # %.9g keeps well over 6 significant digits
    rows = (",".join(f"{v:.9g}" for v in row) for row in data)
    return ",".join(trace_header(tr.node for tr in items)) + "\n" + "".join(r + "\n" for r in rows)


def write_traces(path, traces) -> Path:
    return atomic_write(path, traces_to_csv(traces))


def read_traces(path, grid: SensorGrid | None = None) -> dict[NodeId, Trace]:
    """Ingest a trace CSV; the sample rate comes from the time column."""
    head, rows = read_csv(path)
    if head[0] != "time_s":
        raise ParseError(f"first column must be 'time_s', got {head[0]!r}", str(path), 1)
    if len(head) < 2:
        raise ParseError("no node columns", str(path), 1)
    nodes = []
    for label in head[1:]:
        try:
            node = NodeId.parse(label)
        except ParameterError:
            raise ParseError(f"bad node column {label!r}", str(path), 1) from None
        if node in nodes:
            raise ParseError(f"duplicate node column {label!r}", str(path), 1)
        nodes.append(node)
    g = grid or SensorGrid()
    center = ((g.rows + 1) // 2, (g.cols + 1) // 2)
    for node in nodes:
        if (node.i, node.j) == center:
            raise ParseError(f"geometry mismatch: {node.label} is the transmitter position, not a sensor",
                             str(path), 1)
        if node not in g.occupied:
            raise ParseError(f"geometry mismatch: {node.label} is not a node of the grid", str(path), 1)
    if len(rows) < 2:
        raise ParseError("need at least two samples to infer the sample rate", str(path))

    data = np.array([[_float(v, path, ln, head[k]) for k, v in enumerate(f)] for ln, f in rows])
    t = data[:, 0]
    steps = np.diff(t)
    bad = np.flatnonzero(steps <= 0)
    if bad.size:
        raise ParseError("time column is not strictly increasing", str(path), rows[bad[0] + 1][0])
    dt = float(np.median(steps))
    off = np.flatnonzero(np.abs(steps - dt) > RATE_TOLERANCE * dt)
    if off.size:
        raise ParseError(f"non-uniform sample rate: step {steps[off[0]]:.6g} s vs median {dt:.6g} s",
                         str(path), rows[off[0] + 1][0])
    rate = 1.0 / dt
    return {node: Trace(node, data[:, k + 1], rate) for k, node in enumerate(nodes)}


# --- detections -------------------------------------------------------------

DETECTION_HEADER = ["node", "detected", "t_s", "gamma_v", "rho_o_v"]


def detection_rows(detections):
    items = detections.values() if isinstance(detections, dict) else detections
    return [[d.node.label, d.detected, d.t, d.gamma, d.rho_o] for d in sorted(items, key=lambda d: d.node)]


def write_detections(path, detections) -> Path:
    return write_csv(path, DETECTION_HEADER, detection_rows(detections))


def read_detections(path) -> dict[NodeId, DetectionResult]:
    _, rows = read_csv(path, DETECTION_HEADER)
    out = {}
    for ln, (label, det, t, g, rho) in rows:
        try:
            node = NodeId.parse(label)
        except ParameterError:
            raise ParseError(f"bad node {label!r}", str(path), ln) from None
        if det not in ("0", "1"):
            raise ParseError(f"detected must be 0 or 1, got {det!r}", str(path), ln)
        out[node] = DetectionResult(
            node, det == "1", _float(t, path, ln, "t_s"), _float(g, path, ln, "gamma_v"),
            _float(rho, path, ln, "rho_o_v"),
        )
    return out


# --- estimates and wind -------------------------------------------------------

ESTIMATE_HEADER = ["measurement", "cluster", "pair", "x_hat_m", "y_hat_m", "root2_x_m", "root2_y_m"]
WIND_HEADER = ["measurement", "ux", "uy", "u", "Qe", "mT"]
FIT_HEADER = ["family", "param1", "param2", "mse"]


def read_estimates(path) -> dict[int, list[tuple[int, int, float, float]]]:
    """Estimates grouped by measurement as ``(cluster, pair, x, y)``."""
    _, rows = read_csv(path, ESTIMATE_HEADER)
    out: dict[int, list] = {}
    for ln, f in rows:
        try:
            m, c, p = int(f[0]), int(f[1]), int(f[2])
        except ValueError:
            raise ParseError("measurement, cluster and pair must be integers", str(path), ln) from None
        out.setdefault(m, []).append((c, p, _float(f[3], path, ln, "x_hat_m"), _float(f[4], path, ln, "y_hat_m")))
    return out


def write_taps(path, taps) -> Path:
    return atomic_write(path, "".join(f"{float(v):.17g}\n" for v in taps))
