"""Experiment configuration and its flat ``key = value`` file format.

One key per line; ``#`` starts a comment; blank lines are ignored.
Every key is optional and defaults to the experimental setup values, so
an empty file describes the reference run.  See ``SCHEMA`` for the keys.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

from .detection import DetectionConfig
from .errors import ParameterError, ParseError
from .estimation import H1_ETHANOL, SnclaConfig
from .plume import DEFAULT_SIGMA, PlumeParams
from .sensor import SCOPE, NoiseModel, SensitivityParams, SensorGrid
from .sigproc import FilterSpec


@dataclass(frozen=True)
class ExperimentConfig:
    # grid
    rows: int = 5
    cols: int = 5
    spacing: float = 0.15
    # source and wind
    source_x: float = 0.3
    source_y: float = 0.3
    wind_x: float = -0.03
    wind_y: float = 0.02
    # dispersion widths assumed by the estimator
    sigma_x: float = DEFAULT_SIGMA[0]
    sigma_y: float = DEFAULT_SIGMA[1]
    sigma_z: float = DEFAULT_SIGMA[2]
    # simulated puff; the mass defaults to a puff-center peak at the scope maximum
    sim_sigma_x: float = 0.1
    sim_sigma_y: float = 0.1
    sim_sigma_z: float = 0.04
    sim_mass: float | None = None
    # evaporation
    area: float = 0.0024
    t_e: float = 0.1
    h1: float = H1_ETHANOL
    # sensor circuit
    a1: float = 0.0116
    b1: float = -0.5855
    d1: float = -0.0743
    v_in: float = 5.0
    r_l: float = 1e3
    r_o: float = 24e3
    # noise
    nu: float = 1.43
    noise_scale: float = 0.005
    offset: float = 0.1
    # acquisition
    sample_rate: float = 10.0
    duration: float = 180.0
    # detection
    scheme: str = "energy"
    amplitude_threshold: float = 0.05
    energy_threshold: float = 4.3e-3
    window: int = 7
    offset_samples: int = 50
    oracle_detections: bool = False
    # noise characterization filter
    passband_edge: float = 0.04
    stopband_edge: float = 0.09
    filter_order: int = 242
    # run
    measurements: int = 25
    seed: int = 0
    out: str = "out"

    def __post_init__(self):
        if self.measurements < 1:
            raise ParameterError("measurements must be >= 1")
        if self.seed < 0:
            raise ParameterError("seed must be non-negative")
        if self.sim_mass is not None and self.sim_mass < 0:
            raise ParameterError("sim_mass must be non-negative")
        # build every component once so invalid values fail early
        self.grid(), self.sensitivity(), self.noise(), self.detection(), self.sncla()
        self.filter_spec(), self.plume()

    def grid(self) -> SensorGrid:
        return SensorGrid(self.rows, self.cols, self.spacing)

    def sensitivity(self) -> SensitivityParams:
        return SensitivityParams(self.a1, self.b1, self.d1, self.v_in, self.r_l, self.r_o)

    def noise(self) -> NoiseModel:
        return NoiseModel(self.nu, self.noise_scale, self.offset)

    def detection(self, scheme: str | None = None, threshold: float | None = None) -> DetectionConfig:
        scheme = scheme or self.scheme
        if scheme == "amplitude":
            a_t = self.amplitude_threshold if threshold is None else threshold
            return DetectionConfig("amplitude", A_T=a_t, L=self.window, p=self.offset_samples, R_l=self.r_l)
        lam = self.energy_threshold if threshold is None else threshold
        return DetectionConfig(scheme, lam=lam, L=self.window, p=self.offset_samples, R_l=self.r_l)

    @property
    def estimator_sigma(self) -> tuple[float, float, float]:
        return (self.sigma_x, self.sigma_y, self.sigma_z)

    @property
    def sim_sigma(self) -> tuple[float, float, float]:
        return (self.sim_sigma_x, self.sim_sigma_y, self.sim_sigma_z)

    def sncla(self) -> SnclaConfig:
        return SnclaConfig(self.estimator_sigma, self.area, self.t_e, self.h1)

    def filter_spec(self) -> FilterSpec:
        return FilterSpec(self.passband_edge, self.stopband_edge, self.sample_rate, self.filter_order)

    def simulated_mass(self) -> float:
        if self.sim_mass is not None:
            return self.sim_mass
        sx, sy, sz = self.sim_sigma
        return SCOPE[1] * math.sqrt(2 * math.pi**3) * sx * sy * sz

    def plume(self) -> PlumeParams:
        return PlumeParams(
            self.simulated_mass(), (self.source_x, self.source_y, 0.0), (self.wind_x, self.wind_y), self.sim_sigma
        )

    @property
    def truth(self) -> tuple[float, float]:
        return (self.source_x, self.source_y)

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


SCHEMA = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(name: str, text: str):
    f = SCHEMA[name]
    typ = f.type if isinstance(f.type, str) else f.type.__name__
    if name == "sim_mass":
        return None if text.lower() in ("auto", "none", "") else float(text)
    if typ == "bool":
        low = text.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if typ == "int":
        return int(text)
    if typ == "float":
        v = float(text)
        if not math.isfinite(v):
            raise ValueError(f"expected a finite number, got {text!r}")
        return v
    return text


def parse_config(text: str, path: str | None = None, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse config text; errors name the offending line."""
    values = {}
    seen_at = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", path, lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ParseError(f"unknown key {key!r}", path, lineno)
        if key in seen_at:
            raise ParseError(f"duplicate key {key!r} (first set on line {seen_at[key]})", path, lineno)
        try:
            values[key] = _convert(key, val)
        except ValueError as e:
            raise ParseError(f"bad value for {key!r}: {e}", path, lineno) from None
        seen_at[key] = lineno
    try:
        return dataclasses.replace(base or ExperimentConfig(), **values)
    except ParameterError as e:
        raise ParseError(f"invalid configuration: {e}", path) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read config: {e.strerror}", str(path)) from None
    return parse_config(text, str(path))


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for name in SCHEMA:
        v = getattr(cfg, name)
        if v is None:
            v = "auto"
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{name} = {v}")
    return "\n".join(lines) + "\n"
