"""Sensor grid, measurement circuit, and synthetic voltage traces."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DomainError, OutOfScopeError, ParameterError
from .numerics import LMProblem, lm_fit, sample_student_t
from .plume import PlumeParams, sensor_concentration

# detection scope of the MQ-3 response curve, kg/m^3
SCOPE = (5e-5, 1e-2)


@dataclass(frozen=True, order=True)
class NodeId:
    i: int
    j: int

    @property
    def label(self) -> str:
        return f"N{self.i}{self.j}"

    @classmethod
    def parse(cls, label: str) -> "NodeId":
        label = label.strip()
        if len(label) != 3 or label[0] != "N" or not label[1:].isdigit():
            raise ParameterError(f"bad node label {label!r}")
        return cls(int(label[1]), int(label[2]))

    def __str__(self):
        return self.label


def _default_occupied(rows, cols):
    center = ((rows + 1) // 2, (cols + 1) // 2)
    return frozenset(
        NodeId(i, j)
        for i in range(1, rows + 1)
        for j in range(1, cols + 1)
        if (i, j) != center
    )


@dataclass(frozen=True)
class SensorGrid:
    """Rectangular node layout; row ``i`` runs along +y, column ``j`` along +x."""

    rows: int = 5
    cols: int = 5
    spacing: float = 0.15
    origin: tuple[float, float] = (0.0, 0.0)
    occupied: frozenset = None

    def __post_init__(self):
        if self.spacing <= 0:
            raise ParameterError("spacing must be positive")
        if self.rows < 2 or self.cols < 2:
            raise ParameterError("grid needs at least 2 rows and 2 columns")
        if self.occupied is None:
            object.__setattr__(self, "occupied", _default_occupied(self.rows, self.cols))
        for n in self.occupied:
            if not (1 <= n.i <= self.rows and 1 <= n.j <= self.cols):
                raise ParameterError(f"{n} outside a {self.rows}x{self.cols} grid")

    @property
    def nodes(self) -> list[NodeId]:
        return sorted(self.occupied)

    def position(self, node: NodeId) -> tuple[float, float]:
        if node not in self.occupied:
            raise ParameterError(f"{node} is not an occupied node")
        return (
            self.origin[0] + (node.j - 1) * self.spacing,
            self.origin[1] + (node.i - 1) * self.spacing,
        )

    @property
    def centroid(self) -> tuple[float, float]:
        return (
            self.origin[0] + 0.5 * (self.cols - 1) * self.spacing,
            self.origin[1] + 0.5 * (self.rows - 1) * self.spacing,
        )

    def shifted(self, dx: float, dy: float) -> "SensorGrid":
        return SensorGrid(
            self.rows, self.cols, self.spacing, (self.origin[0] + dx, self.origin[1] + dy), self.occupied
        )


@dataclass(frozen=True)
class SensitivityParams:
    """Fitted response curve ``Rs/Ro = a1 * C**b1 + d1`` and divider values."""

    a1: float = 0.0116
    b1: float = -0.5855
    d1: float = -0.0743
    V_in: float = 5.0
    R_l: float = 1e3
    R_o: float = 24e3

    def __post_init__(self):
        if not self.a1 > 0:
            raise ParameterError("a1 must be positive")
        if not self.b1 < 0:
            raise ParameterError("b1 must be negative (decreasing response)")
        if min(self.V_in, self.R_l, self.R_o) <= 0:
            raise ParameterError("V_in, R_l, R_o must be positive")


def _check_scope(C):
    C = np.asarray(C, dtype=float)
    lo, hi = SCOPE
    # tolerate round-off at the edges
    if np.any(C < lo * (1 - 1e-12)) or np.any(C > hi * (1 + 1e-12)):
        raise OutOfScopeError(f"concentration outside detection scope [{lo}, {hi}] kg/m^3")
    return C


def _unwrap(x):
    return x if np.ndim(x) else float(x)


def sensitivity_forward(C, sp: SensitivityParams = SensitivityParams()):
    """Normalized sensor resistance ``Rs/Ro`` at concentration ``C``."""
    C = _check_scope(C)
    return _unwrap(sp.a1 * C**sp.b1 + sp.d1)


def voltage_from_concentration(C, sp: SensitivityParams = SensitivityParams()):
    """Divider output ``V_in R_l / (R_l + R_s)`` for concentration ``C``."""
    rs = sp.R_o * np.asarray(sensitivity_forward(C, sp))
    if np.any(rs <= 0):
        raise DomainError("response curve gives non-positive sensor resistance")
    return _unwrap(sp.V_in * sp.R_l / (sp.R_l + rs))


def concentration_from_voltage(gamma, sp: SensitivityParams = SensitivityParams()):
    """Invert the divider and response curve for a measured voltage."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g <= 0) or np.any(g >= sp.V_in):
        raise ParameterError(f"voltage must lie in (0, {sp.V_in}) V")
    base = (sp.V_in * sp.R_l - g * sp.R_l - sp.d1 * g * sp.R_o) / (g * sp.R_o * sp.a1)
    if np.any(base <= 0):
        raise DomainError("voltage inconsistent with the response curve (non-positive base)")
    return _unwrap(base ** (1.0 / sp.b1))


def sensed_voltage(C, sp: SensitivityParams = SensitivityParams()):
    """Voltage the sensor reports for any concentration.

    Above the scope the sensor saturates at the scope maximum; below it
    the response falls linearly to zero at ``C = 0``.
    """
    C = np.asarray(C, dtype=float)
    if np.any(C < 0):
        raise ParameterError("concentration must be non-negative")
    lo, hi = SCOPE
    inside = np.clip(C, lo, hi)
    v = np.asarray(voltage_from_concentration(inside, sp), dtype=float)
    v = np.where(C < lo, v * C / lo, v)
    return _unwrap(v)


def fit_sensitivity(points, base: SensitivityParams = SensitivityParams(), max_iterations=500):
    """LM fit of ``a1 * C**b1 + d1`` to ``(C, Rs/Ro)`` points.

    Returns ``(params, rmse)``; circuit values are copied from ``base``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 4:
        raise ParameterError("need at least 4 (C, Rs/Ro) points")
    C, y = pts[:, 0], pts[:, 1]
    if np.any(C <= 0):
        raise ParameterError("concentrations must be positive")

    # log-log line with d1 = 0 as the starting point
    pos = y > 0
    slope, icpt = np.polyfit(np.log(C[pos]), np.log(y[pos]), 1)
    x0 = np.array([math.exp(icpt), slope, 0.0])

    def residual(p):
        return p[0] * C ** p[1] + p[2] - y

    res = lm_fit(LMProblem(residual, x0, max_iterations=max_iterations, tolerance=1e-12))
    a1, b1, d1 = res.params
    fitted = SensitivityParams(a1, b1, d1, base.V_in, base.R_l, base.R_o)
    return fitted, res.rmse


@dataclass(frozen=True)
class Trace:
    node: NodeId
    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ParameterError("sample_rate must be positive")
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))

    def __len__(self):
        return self.samples.size

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def times(self) -> np.ndarray:
        """Sample instants; sample ``n`` (1-based) closes at ``n / sample_rate``."""
        return np.arange(1, self.samples.size + 1) / self.sample_rate

    def with_samples(self, samples) -> "Trace":
        return Trace(self.node, samples, self.sample_rate)


@dataclass(frozen=True)
class NoiseModel:
    nu: float = 1.43
    noise_scale: float = 0.005
    offset: float | Mapping[NodeId, float] = 0.1

    def __post_init__(self):
        if not self.nu > 0:
            raise ParameterError("nu must be positive")
        if self.noise_scale < 0:
            raise ParameterError("noise_scale must be non-negative")
        offsets = self.offset.values() if isinstance(self.offset, Mapping) else [self.offset]
        if any(o < 0 for o in offsets):
            raise ParameterError("offsets must be non-negative")

    def offset_for(self, node: NodeId) -> float:
        if isinstance(self.offset, Mapping):
            return float(self.offset[node])
        return float(self.offset)


def node_seed(seed, node: NodeId) -> np.random.SeedSequence:
    """Independent substream for one node of one measurement."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=(*seed.spawn_key, node.i, node.j))
    return np.random.SeedSequence(seed, spawn_key=(node.i, node.j))


def synthesize_traces(
    grid: SensorGrid,
    p: PlumeParams,
    nm: NoiseModel = NoiseModel(),
    sp: SensitivityParams = SensitivityParams(),
    sample_rate: float = 10.0,
    duration: float = 180.0,
    seed=None,
) -> dict[NodeId, Trace]:
    """Received voltage at every node: puff signal + offset + Student's t noise."""
    if sample_rate <= 0 or duration <= 0:
        raise ParameterError("sample_rate and duration must be positive")
    n = int(round(duration * sample_rate))
    t = np.arange(1, n + 1) / sample_rate
    traces = {}
    for node in grid.nodes:
        c = sensor_concentration(p, grid.position(node), t)
        v = np.asarray(sensed_voltage(c, sp)) + nm.offset_for(node)
        if nm.noise_scale > 0:
            v = v + sample_student_t(nm.nu, nm.noise_scale, n, node_seed(seed, node))
        traces[node] = Trace(node, np.clip(v, 0.0, sp.V_in), sample_rate)
    return traces
