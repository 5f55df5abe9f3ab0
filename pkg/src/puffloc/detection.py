"""Offset estimation and the amplitude and energy detectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .sensor import NodeId, Trace

# relative slack when comparing a cumulative sum against its threshold
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class DetectionConfig:
    scheme: str = "energy"
    A_T: float | None = None  # volts
    lam: float | None = 4.3e-3  # joules
    L: int = 7
    p: int = 50
    R_l: float = 1e3

    def __post_init__(self):
        if self.scheme not in ("amplitude", "energy"):
            raise ParameterError(f"unknown detection scheme {self.scheme!r}")
        if self.L < 1 or self.p < 1:
            raise ParameterError("L and p must be >= 1")
        if self.R_l <= 0:
            raise ParameterError("R_l must be positive")
        if self.scheme == "amplitude" and (self.A_T is None or self.A_T < 0):
            raise ParameterError("amplitude scheme needs a non-negative A_T")
        if self.scheme == "energy" and (self.lam is None or self.lam < 0):
            raise ParameterError("energy scheme needs a non-negative lambda")


@dataclass(frozen=True)
class DetectionResult:
    node: NodeId
    detected: bool
    t: float = float("nan")
    gamma: float = float("nan")
    rho_o: float = float("nan")


def estimate_offset(trace: Trace, p: int) -> float:
    """Mean of the first ``p`` samples."""
    if p < 1 or len(trace) < p:
        raise ParameterError(f"trace of {len(trace)} samples is shorter than p={p}")
    return float(np.mean(trace.samples[:p]))


def moving_average(x, L: int) -> np.ndarray:
    """Causal ``L``-sample mean; samples before the start repeat the first one."""
    x = np.asarray(getattr(x, "samples", x), dtype=float)
    if L < 1:
        raise ParameterError("L must be >= 1")
    if x.size == 0:
        return x.copy()
    padded = np.concatenate([np.full(L - 1, x[0]), x])
    return np.convolve(padded, np.ones(L), mode="valid") / L


def amplitude_detect(trace: Trace, cfg: DetectionConfig) -> DetectionResult:
    if cfg.scheme != "amplitude":
        raise ParameterError("configuration is not for the amplitude scheme")
    rho = estimate_offset(trace, cfg.p)
    gamma = rho + cfg.A_T
    y = moving_average(trace.samples, cfg.L)
    hits = np.flatnonzero(y >= gamma)
    if hits.size == 0:
        return DetectionResult(trace.node, False, rho_o=rho)
    n = hits[0]
    return DetectionResult(trace.node, True, (n + 1) / trace.sample_rate, gamma, rho)


def cumulative_energy(trace: Trace, rho_o: float, R_l: float) -> np.ndarray:
    """Energy (J) dissipated in the load up to each sample."""
    g = trace.samples - rho_o
    return np.cumsum(g * g) * (trace.dt / R_l)


def energy_detect(trace: Trace, cfg: DetectionConfig) -> DetectionResult:
    """First sample whose cumulative offset-free energy reaches ``lam``.

    ``gamma`` is the raw voltage at that sample.
    """
    if cfg.scheme != "energy":
        raise ParameterError("configuration is not for the energy scheme")
    rho = estimate_offset(trace, cfg.p)
    energy = cumulative_energy(trace, rho, cfg.R_l)
    hits = np.flatnonzero(energy >= cfg.lam * (1 - _TIE_RTOL))
    if hits.size == 0:
        return DetectionResult(trace.node, False, rho_o=rho)
    n = hits[0]
    return DetectionResult(trace.node, True, (n + 1) / trace.sample_rate, float(trace.samples[n]), rho)


def detect(trace: Trace, cfg: DetectionConfig) -> DetectionResult:
    if cfg.scheme == "amplitude":
        return amplitude_detect(trace, cfg)
    return energy_detect(trace, cfg)


def detect_all(traces, cfg: DetectionConfig) -> dict[NodeId, DetectionResult]:
    items = traces.values() if isinstance(traces, dict) else traces
    return {tr.node: detect(tr, cfg) for tr in items}
