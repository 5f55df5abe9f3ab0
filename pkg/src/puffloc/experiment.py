"""Seeded multi-measurement runs, threshold sweeps and their report tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import csvio
from .config import ExperimentConfig, dump_config
from .detection import DetectionConfig, DetectionResult, detect_all
from .errors import EstimationError
from .estimation import (
    LocationEstimate,
    MassEstimate,
    WindEstimate,
    cluster_error,
    sncla,
    transmitted_mass,
)
from .plume import PlumeParams
from .scenarios import exact_detections
from .sensor import NodeId, Trace, synthesize_traces

CLUSTERS = (1, 2, 3, 4)


def measurement_seed(seed: int, m: int) -> np.random.SeedSequence:
    """Noise substream root for measurement ``m`` (0-based)."""
    return np.random.SeedSequence(seed, spawn_key=(m,))


def simulate_measurement(cfg: ExperimentConfig, m: int) -> dict[NodeId, Trace]:
    return synthesize_traces(
        cfg.grid(), cfg.plume(), cfg.noise(), cfg.sensitivity(),
        cfg.sample_rate, cfg.duration, measurement_seed(cfg.seed, m),
    )


def oracle_plume(cfg: ExperimentConfig) -> PlumeParams:
    """Puff that matches the estimator's own model exactly."""
    m_T = transmitted_mass(cfg.wind_x, cfg.wind_y, cfg.area, cfg.t_e, cfg.h1).m_T
    return PlumeParams(m_T, (cfg.source_x, cfg.source_y, 0.0), (cfg.wind_x, cfg.wind_y), cfg.estimator_sigma)


@dataclass
class Measurement:
    index: int
    detections: dict[NodeId, DetectionResult]
    estimates: list[LocationEstimate] = field(default_factory=list)
    wind: WindEstimate | None = None
    mass: MassEstimate | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def estimate_measurement(m: int, dets, cfg: ExperimentConfig) -> Measurement:
    try:
        res = sncla(dets, cfg.grid(), cfg.sensitivity(), cfg.sncla())
    except EstimationError as e:
        return Measurement(m, dets, error=str(e))
    return Measurement(m, dets, res.estimates, res.wind, res.mass)


@dataclass
class RunReport:
    config: ExperimentConfig
    measurements: list[Measurement]

    @property
    def failures(self) -> int:
        return sum(not m.ok for m in self.measurements)

    def eps_c(self) -> dict[int, float]:
        ok = [m.estimates for m in self.measurements if m.ok]
        return cluster_error(ok, self.config.truth) if ok else {}

    def mean_detection_times(self) -> dict[NodeId, tuple[float, int]]:
        """Per node: mean detection time over measurements that detected, and how many did."""
        out = {}
        for node in self.config.grid().nodes:
            ts = [m.detections[node].t for m in self.measurements
                  if node in m.detections and m.detections[node].detected]
            out[node] = (float(np.mean(ts)) if ts else float("nan"), len(ts))
        return out

    # --- tables ---
    def estimate_rows(self):
        return [
            [m.index, e.cluster, e.pair, e.x, e.y, e.alt_x, e.alt_y]
            for m in self.measurements for e in m.estimates
        ]

    def wind_rows(self):
        rows = []
        for m in self.measurements:
            if m.ok:
                ux, uy = m.wind.velocity
                rows.append([m.index, ux, uy, m.mass.u, m.mass.Q_e, m.mass.m_T])
            else:
                rows.append([m.index] + [float("nan")] * 5)
        return rows

    def failure_rows(self):
        return [[m.index, m.error] for m in self.measurements if not m.ok]

    def eps_rows(self):
        eps = self.eps_c()
        return [[c, eps.get(c, float("nan"))] for c in CLUSTERS]

    def detection_time_rows(self):
        return [[n.label, n.i, n.j, t, k] for n, (t, k) in self.mean_detection_times().items()]

    def write(self, out) -> list[Path]:
        out = Path(out)
        paths = [
            csvio.atomic_write(out / "config.txt", dump_config(self.config)),
            csvio.write_csv(out / "estimates.csv", csvio.ESTIMATE_HEADER, self.estimate_rows()),
            csvio.write_csv(out / "wind.csv", csvio.WIND_HEADER, self.wind_rows()),
            csvio.write_csv(out / "eps_c.csv", EPS_HEADER, self.eps_rows()),
            csvio.write_csv(out / "detection_times.csv", DETECTION_TIME_HEADER, self.detection_time_rows()),
            csvio.write_csv(out / "failures.csv", ["measurement", "reason"], self.failure_rows()),
        ]
        for m in self.measurements:
            paths.append(csvio.write_detections(out / "detections" / f"m{m.index:03d}.csv", m.detections))
        return paths


EPS_HEADER = ["cluster", "eps_c_m"]
DETECTION_TIME_HEADER = ["node", "i", "j", "mean_t_s", "detections"]


def measurement_detections(cfg: ExperimentConfig, m: int, det: DetectionConfig | None = None):
    if cfg.oracle_detections:
        return exact_detections(cfg.grid(), oracle_plume(cfg), cfg.sensitivity())
    return detect_all(simulate_measurement(cfg, m), det or cfg.detection())


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """``cfg.measurements`` independent measurements through the whole pipeline.

    Estimation failures are recorded per measurement; they do not stop the run.
    """
    meas = [estimate_measurement(m, measurement_detections(cfg, m), cfg) for m in range(cfg.measurements)]
    return RunReport(cfg, meas)


# --- sweeps -------------------------------------------------------------------

DEFAULT_SWEEPS = {
    "energy": (0.0, 15e-3, 1e-3),
    "amplitude": (0.0, 0.15, 0.01),
}


def threshold_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive grid ``lo, lo+step, ..., hi``."""
    if step <= 0 or hi < lo:
        raise ValueError("sweep needs step > 0 and hi >= lo")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def per_measurement_eps(m: Measurement, truth) -> dict[int, float]:
    """Mean over pairs of the distance to the truth, per cluster."""
    d: dict[int, list[float]] = {}
    for e in m.estimates:
        d.setdefault(e.cluster, []).append(math.dist((e.x, e.y), truth))
    return {c: float(np.mean(v)) for c, v in d.items()}


def sweep_header() -> list[str]:
    cols = ["threshold", "successes", "failures"]
    for c in CLUSTERS:
        cols += [f"c{c}_n", f"c{c}_q25", f"c{c}_median", f"c{c}_q75"]
    return cols


@dataclass
class SweepReport:
    scheme: str
    thresholds: np.ndarray
    rows: list[list]

    def write(self, path) -> Path:
        return csvio.write_csv(path, sweep_header(), self.rows)


def run_sweep(cfg: ExperimentConfig, scheme: str | None = None, grid=None) -> SweepReport:
    """Detect and estimate at every threshold, reusing each measurement's traces.

    Each row holds per-cluster quartiles of the per-measurement cluster
    error (box-plot data).
    """
    scheme = scheme or cfg.scheme
    thresholds = threshold_grid(*(grid or DEFAULT_SWEEPS[scheme]))
    traces = [simulate_measurement(cfg, m) for m in range(cfg.measurements)]
    rows = []
    for th in thresholds:
        det = cfg.detection(scheme, float(th))
        meas = [estimate_measurement(m, detect_all(tr, det), cfg) for m, tr in enumerate(traces)]
        ok = [m for m in meas if m.ok]
        row = [float(th), len(ok), len(meas) - len(ok)]
        per = [per_measurement_eps(m, cfg.truth) for m in ok]
        for c in CLUSTERS:
            vals = [p[c] for p in per if c in p]
            if vals:
                q25, med, q75 = np.percentile(vals, [25, 50, 75])
                row += [len(vals), float(q25), float(med), float(q75)]
            else:
                row += [0, float("nan"), float("nan"), float("nan")]
        rows.append(row)
    return SweepReport(scheme, thresholds, rows)


def eps_from_estimates(grouped, truth) -> dict[int, float]:
    """Cluster errors from ``read_estimates`` output."""
    runs = [
        [LocationEstimate(c, p, x, y, float("nan"), float("nan")) for c, p, x, y in ests]
        for _, ests in sorted(grouped.items())
    ]
    return cluster_error(runs, truth)
