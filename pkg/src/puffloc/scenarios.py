"""Noise-free detection sets generated straight from the puff model.

Sampled threshold crossings cannot reproduce the wind exactly, so these
helpers place detection times so that every downwind pair's time
difference equals spacing / wind speed, and give each node the voltage
the puff model predicts at that time.  Feeding them to ``sncla`` must
return the true source.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from .detection import DetectionResult
from .estimation import DIRECTIONS, cluster_pairs
from .plume import PlumeParams, sensor_concentration
from .sensor import NodeId, SensitivityParams, SensorGrid


def divider_voltage(C, sp: SensitivityParams = SensitivityParams()):
    """Circuit output for ``C`` with the response curve extended past its scope."""
    C = np.asarray(C, dtype=float)
    rs = sp.R_o * (sp.a1 * C**sp.b1 + sp.d1)
    v = sp.V_in * sp.R_l / (sp.R_l + rs)
    return v if v.ndim else float(v)


def downwind_clusters(wind) -> tuple[int, int]:
    ux, uy = wind
    cx = DIRECTIONS["x-" if ux < 0 else "x+"][0]
    cy = DIRECTIONS["y+" if uy >= 0 else "y-"][0]
    return tuple(sorted((cx, cy)))


def consistent_arrival_times(grid: SensorGrid, plume: PlumeParams, clusters=None) -> dict[NodeId, float]:
    """Detection times for the nodes of ``clusters`` (default: the downwind pair).

    Pairs sharing nodes form connected groups; each group gets one time
    shift, chosen to keep the puff center as close as possible to the
    group's nodes at their detection times.
    """
    ux, uy = plume.wind
    if ux == 0 or uy == 0:
        raise ValueError("both wind components must be non-zero")
    clusters = clusters or downwind_clusters(plume.wind)
    # edges: (upwind, downwind, required time difference)
    edges = []
    for c in clusters:
        axis = DIRECTIONS[next(d for d, v in DIRECTIONS.items() if v[0] == c)][1]
        speed = abs(ux) if axis == "x" else abs(uy)
        for _, up, down in cluster_pairs(c, grid):
            edges.append((up, down, grid.spacing / speed))

    adj = defaultdict(list)
    for up, down, dt in edges:
        adj[up].append((down, dt))
        adj[down].append((up, -dt))

    times: dict[NodeId, float] = {}
    seen = set()
    u = np.array(plume.wind)
    src = np.array(plume.source[:2])
    for start in sorted(adj):
        if start in seen:
            continue
        offsets = {start: 0.0}
        stack = [start]
        while stack:
            a = stack.pop()
            for b, dt in adj[a]:
                if b not in offsets:
                    offsets[b] = offsets[a] + dt
                    stack.append(b)
        seen.update(offsets)
        nodes = sorted(offsets)
        # least-squares shift of |d_k - u (tau + o_k)|^2
        resid = [np.array(grid.position(n)) - src - u * offsets[n] for n in nodes]
        tau = float(np.mean([r @ u for r in resid]) / (u @ u))
        tau = max(tau, 1.0 - min(offsets.values()))
        for n in nodes:
            times[n] = tau + offsets[n]
    return times


def exact_detections(grid: SensorGrid, plume: PlumeParams, sp: SensitivityParams = SensitivityParams(),
                     times=None, min_concentration: float = 1e-200) -> dict[NodeId, DetectionResult]:
    """Detection set with each node's voltage taken from the model at its time.

    Nodes without a time, or whose concentration is below
    ``min_concentration`` (where double precision runs out), are reported
    as not detected.
    """
    times = consistent_arrival_times(grid, plume) if times is None else times
    out = {}
    for node in grid.nodes:
        c = sensor_concentration(plume, grid.position(node), times[node]) if node in times else 0.0
        if c >= min_concentration:
            out[node] = DetectionResult(node, True, times[node], divider_voltage(c, sp), 0.0)
        else:
            out[node] = DetectionResult(node, False, rho_o=0.0)
    return out
