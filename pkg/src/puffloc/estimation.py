"""Clustered localization: wind, evaporated mass, and per-pair source fixes.

The grid is split into four clusters of adjacent node pairs on its
edges.  Cluster 1 (columns 1-2) and cluster 3 (columns 4-5) time the
puff along x; cluster 4 (rows 1-2) and cluster 2 (rows 4-5) along y.
Two clusters downwind of the source are chosen from the wind estimate
and every valid pair in them yields one position fix.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .detection import DetectionResult
from .errors import DegenerateGeometryError, DomainError, EstimationError, ParameterError
from .numerics import ComplexRootPair, Conic, solve_ellipse_pair
from .plume import DEFAULT_SIGMA
from .sensor import NodeId, SensitivityParams, SensorGrid, concentration_from_voltage

H1_ETHANOL = 4e-3
EVAPORATION_EXPONENT = 0.54

# direction key -> (cluster id, axis, sign of wind along the axis)
DIRECTIONS = {
    "x-": (1, "x", -1),
    "y+": (2, "y", +1),
    "x+": (3, "x", +1),
    "y-": (4, "y", -1),
}
CLUSTER_DIRECTION = {c: d for d, (c, _, _) in DIRECTIONS.items()}


def cluster_pairs(cluster: int, grid: SensorGrid) -> list[tuple[int, NodeId, NodeId]]:
    """``(pair index, upwind node, downwind node)`` for one cluster.

    The upwind node is the one a puff travelling in the cluster's
    direction reaches first.  Pairs touching an unoccupied cell are dropped.
    """
    R, M = grid.rows, grid.cols
    if cluster == 1:
        pairs = [(i, NodeId(i, 2), NodeId(i, 1)) for i in range(1, R + 1)]
    elif cluster == 3:
        pairs = [(i, NodeId(i, M - 1), NodeId(i, M)) for i in range(1, R + 1)]
    elif cluster == 2:
        pairs = [(j, NodeId(R - 1, j), NodeId(R, j)) for j in range(1, M + 1)]
    elif cluster == 4:
        pairs = [(j, NodeId(2, j), NodeId(1, j)) for j in range(1, M + 1)]
    else:
        raise ParameterError(f"cluster id must be 1..4, got {cluster}")
    return [p for p in pairs if p[1] in grid.occupied and p[2] in grid.occupied]


def pairwise_wind(pos1, pos2, t1, t2, axis: str = "x") -> tuple[float, bool]:
    """Apparent wind speed between two nodes from their detection times.

    ``pos1``/``t1`` belong to the node expected first.  A non-positive
    time difference or a missing (NaN) time marks the pair invalid.
    """
    k = 0 if axis == "x" else 1
    dt = t2 - t1
    if not (np.isfinite(t1) and np.isfinite(t2)) or dt <= 0:
        return float("nan"), False
    return abs(pos2[k] - pos1[k]) / dt, True


@dataclass(frozen=True)
class PairVelocity:
    cluster: int
    pair: int
    u: float
    valid: bool


@dataclass(frozen=True)
class WindEstimate:
    means: dict[str, float]
    counts: dict[str, int]
    u_x: float
    u_y: float
    x_direction: str
    y_direction: str
    pairs: tuple[PairVelocity, ...] = ()

    @property
    def velocity(self) -> tuple[float, float]:
        """Signed wind vector implied by the winning directions."""
        return (DIRECTIONS[self.x_direction][2] * self.u_x, DIRECTIONS[self.y_direction][2] * self.u_y)

    @property
    def selected_clusters(self) -> tuple[int, int]:
        return tuple(sorted((DIRECTIONS[self.x_direction][0], DIRECTIONS[self.y_direction][0])))

    def pair_valid(self, cluster: int, pair: int) -> bool:
        return any(pv.valid for pv in self.pairs if pv.cluster == cluster and pv.pair == pair)


def _detected(det: DetectionResult | None) -> bool:
    return det is not None and det.detected and np.isfinite(det.t)


def cluster_wind(detections, grid: SensorGrid) -> WindEstimate:
    """Directional mean wind speeds and the dominant x and y components.

    Each direction averages its valid pairs only.  A direction with no
    valid pair has mean 0; ties go to ``x-`` and ``y+``.
    """
    dets = _as_mapping(detections)
    means, counts, pvs = {}, {}, []
    for direction, (cluster, axis, _) in DIRECTIONS.items():
        speeds = []
        for idx, up, down in cluster_pairs(cluster, grid):
            a, b = dets.get(up), dets.get(down)
            if _detected(a) and _detected(b):
                u, ok = pairwise_wind(grid.position(up), grid.position(down), a.t, b.t, axis)
            else:
                u, ok = float("nan"), False
            pvs.append(PairVelocity(cluster, idx, u, ok))
            if ok:
                speeds.append(u)
        counts[direction] = len(speeds)
        means[direction] = float(np.mean(speeds)) if speeds else 0.0
    if not any(counts.values()):
        raise EstimationError("no valid node pair in any direction; wind cannot be estimated")

    x_dir = "x-" if means["x-"] >= means["x+"] else "x+"
    y_dir = "y+" if means["y+"] >= means["y-"] else "y-"
    return WindEstimate(
        means, counts, means[x_dir], means[y_dir], x_dir, y_dir, tuple(pvs)
    )


@dataclass(frozen=True)
class MassEstimate:
    u: float
    Q_e: float
    Q: float
    m_T: float
    A: float
    T_e: float
    h1: float = H1_ETHANOL

    @property
    def degenerate(self) -> bool:
        return self.u == 0.0


def transmitted_mass(u_x: float, u_y: float, A: float = 0.0024, T_e: float = 0.1,
                     h1: float = H1_ETHANOL) -> MassEstimate:
    """Mass evaporated from a dish of area ``A`` during ``T_e`` seconds."""
    if A <= 0 or T_e <= 0:
        raise ParameterError("A and T_e must be positive")
    u = math.hypot(u_x, u_y)
    q_e = h1 * u**EVAPORATION_EXPONENT
    q = q_e * A
    return MassEstimate(u, q_e, q, q * T_e, A, T_e, h1)


def residual_n(C, m_T: float, sigma=DEFAULT_SIGMA):
    """Log of the concentration relative to the puff-center peak (<= 0 on the model)."""
    C = np.asarray(C, dtype=float)
    if np.any(C <= 0) or m_T <= 0:
        raise DomainError("concentration and mass must be positive")
    sx, sy, sz = sigma
    n = np.log(math.sqrt(2) * math.pi**1.5 * sx * sy * sz * C / m_T)
    return n if n.ndim else float(n)


@dataclass(frozen=True)
class PairNode:
    pos: tuple[float, float]
    t: float
    n: float


@dataclass(frozen=True)
class LocationEstimate:
    cluster: int
    pair: int
    x: float
    y: float
    alt_x: float
    alt_y: float
    roots: ComplexRootPair | None = None

    @property
    def is_complex(self) -> bool:
        return self.roots is not None and not self.roots.is_real


def node_equation(node: PairNode, wind, sigma=DEFAULT_SIGMA) -> Conic:
    """The node's constraint on the source position as a conic in (x_T, y_T)."""
    sx, sy = sigma[0], sigma[1]
    cx = node.pos[0] - wind[0] * node.t
    cy = node.pos[1] - wind[1] * node.t
    return Conic.from_center(cx, cy, 1 / (2 * sx * sx), 1 / (2 * sy * sy), node.n)


def solve_pair(node_a: PairNode, node_b: PairNode, wind, sigma=DEFAULT_SIGMA,
               centroid=(0.3, 0.3), cluster: int = 0, pair: int = 0) -> LocationEstimate:
    """Source position from two nodes' equations.

    Real parts of both roots are kept; the root closer to ``centroid``
    is the estimate.
    """
    for nd in (node_a, node_b):
        if not (np.isfinite(nd.t) and np.isfinite(nd.n)):
            raise ParameterError("pair nodes need finite detection time and n")
    roots = solve_ellipse_pair(node_equation(node_a, wind, sigma), node_equation(node_b, wind, sigma))
    r1 = (roots.root1[0].real, roots.root1[1].real)
    r2 = (roots.root2[0].real, roots.root2[1].real)
    d1 = math.dist(r1, centroid)
    d2 = math.dist(r2, centroid)
    best, other = (r1, r2) if d1 <= d2 else (r2, r1)
    return LocationEstimate(cluster, pair, best[0], best[1], other[0], other[1], roots)


@dataclass(frozen=True)
class SnclaConfig:
    sigma: tuple[float, float, float] = DEFAULT_SIGMA
    A: float = 0.0024
    T_e: float = 0.1
    h1: float = H1_ETHANOL


@dataclass
class SnclaResult:
    estimates: list[LocationEstimate]
    wind: WindEstimate
    mass: MassEstimate
    clusters: tuple[int, int]
    concentrations: dict[NodeId, float] = field(default_factory=dict)
    skipped: list[tuple[int, int, str]] = field(default_factory=list)


def select_clusters(wind: WindEstimate) -> tuple[int, int]:
    """The two downwind clusters picked by the dominant directions."""
    return wind.selected_clusters


def _as_mapping(detections) -> dict[NodeId, DetectionResult]:
    if isinstance(detections, dict):
        return detections
    return {d.node: d for d in detections}


def sncla(detections, grid: SensorGrid, sp: SensitivityParams = SensitivityParams(),
          cfg: SnclaConfig = SnclaConfig()) -> SnclaResult:
    """Run the full localization from one measurement's detections."""
    dets = _as_mapping(detections)
    conc = {}
    for node, d in dets.items():
        if _detected(d):
            try:
                conc[node] = float(concentration_from_voltage(d.gamma, sp))
            except (ParameterError, DomainError):
                pass

    wind = cluster_wind(dets, grid)
    mass = transmitted_mass(wind.u_x, wind.u_y, cfg.A, cfg.T_e, cfg.h1)
    if mass.m_T <= 0:
        raise EstimationError("estimated wind speed is zero, so the transmitted mass is zero")
    velocity = wind.velocity
    clusters = select_clusters(wind)

    estimates, skipped = [], []
    for cluster in clusters:
        for idx, up, down in cluster_pairs(cluster, grid):
            if up not in conc or down not in conc:
                skipped.append((cluster, idx, "missing detection"))
                continue
            if not wind.pair_valid(cluster, idx):
                skipped.append((cluster, idx, "non-positive time difference"))
                continue
            nodes = [
                PairNode(grid.position(nd), dets[nd].t, residual_n(conc[nd], mass.m_T, cfg.sigma))
                for nd in (up, down)
            ]
            try:
                est = solve_pair(nodes[0], nodes[1], velocity, cfg.sigma, grid.centroid, cluster, idx)
            except DegenerateGeometryError:
                skipped.append((cluster, idx, "degenerate geometry"))
                continue
            estimates.append(est)
    if not estimates:
        raise EstimationError(f"no valid node pair in selected clusters {clusters}")
    estimates.sort(key=lambda e: (e.cluster, e.pair))
    return SnclaResult(estimates, wind, mass, clusters, conc, skipped)


def cluster_error(estimates_per_measurement, truth) -> dict[int, float]:
    """Two-level mean distance to ``truth``: over measurements, then over pairs."""
    runs = list(estimates_per_measurement)
    if not runs:
        raise ParameterError("need at least one measurement")
    dists = defaultdict(lambda: defaultdict(list))
    for ests in runs:
        for e in ests:
            dists[e.cluster][e.pair].append(math.dist((e.x, e.y), truth))
    return {
        c: float(np.mean([np.mean(v) for v in pairs.values()]))
        for c, pairs in sorted(dists.items())
    }
