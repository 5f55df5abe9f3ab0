"""Noise characterization: equiripple low-pass, noise extraction, pdf fits."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import signal
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from .detection import estimate_offset
from .errors import ConvergenceError, ParameterError
from .numerics import LMProblem, lm_fit
from .sensor import Trace


@dataclass(frozen=True)
class FilterSpec:
    passband_edge: float = 0.04
    stopband_edge: float = 0.09
    sample_rate: float = 10.0
    order: int = 242
    passband_ripple: float | None = None  # dB, peak-to-peak
    stopband_attenuation: float | None = None  # dB

    def __post_init__(self):
        nyq = self.sample_rate / 2
        if not 0 < self.passband_edge < self.stopband_edge < nyq:
            raise ParameterError("need 0 < passband_edge < stopband_edge < sample_rate/2")
        if self.order < 0 or self.order % 2:
            raise ParameterError("order must be even and non-negative")

    def ripples(self) -> tuple[float, float] | None:
        """Linear passband and stopband deviations, when both are given in dB."""
        if self.passband_ripple is None or self.stopband_attenuation is None:
            return None
        rp = 10 ** (self.passband_ripple / 20)
        return (rp - 1) / (rp + 1), 10 ** (-self.stopband_attenuation / 20)


@dataclass(frozen=True)
class FirFilter:
    taps: np.ndarray
    sample_rate: float = 10.0
    passband_edge: float = 0.0
    stopband_edge: float = 0.0
    weights: tuple[float, float] = (1.0, 1.0)
    ripple: float = 0.0  # max weighted error over both bands
    passband_deviation: float = 0.0
    stopband_deviation: float = 0.0

    @property
    def order(self) -> int:
        return self.taps.size - 1

    def amplitude(self, freqs) -> np.ndarray:
        """Real zero-phase amplitude response at ``freqs`` Hz."""
        M = self.order // 2
        w = 2 * np.pi * np.atleast_1d(np.asarray(freqs, dtype=float)) / self.sample_rate
        if M == 0:
            return np.full(w.shape, self.taps[0])
        k = np.arange(1, M + 1)
        return self.taps[M] + 2 * np.cos(np.outer(w, k)) @ self.taps[M - k]

    def magnitude(self, freqs) -> np.ndarray:
        return np.abs(self.amplitude(freqs))


def estimate_order(passband_edge, stopband_edge, dp, ds, sample_rate) -> int:
    """Herrmann-Rabiner-Chan length estimate, returned as an even order."""
    df = (stopband_edge - passband_edge) / sample_rate
    lp, ls = math.log10(dp), math.log10(ds)
    a = (5.309e-3, 7.114e-2, -4.761e-1, -2.66e-3, -5.941e-1, -4.278e-1)
    dinf = ls * (a[0] * lp**2 + a[1] * lp + a[2]) + a[3] * lp**2 + a[4] * lp + a[5]
    f = 11.01217 + 0.51244 * (lp - ls)
    length = dinf / df - f * df + 1
    order = int(math.ceil(length)) - 1
    return order + (order % 2)


def _error_function(filt: FirFilter, freqs):
    """Weighted signed error on the approximation bands; NaN in the transition band."""
    freqs = np.asarray(freqs, dtype=float)
    amp = filt.amplitude(freqs)
    err = np.full(freqs.shape, np.nan)
    pb = freqs <= filt.passband_edge
    sb = freqs >= filt.stopband_edge
    err[pb] = filt.weights[0] * (1.0 - amp[pb])
    err[sb] = filt.weights[1] * (0.0 - amp[sb])
    return err


def band_extrema(filt: FirFilter, grid_points: int = 1 << 15) -> tuple[np.ndarray, np.ndarray]:
    """Frequencies and signed weighted errors at the local extrema of the error.

    Band edges count as extrema; interior extrema are refined by a
    bounded scalar search.
    """
    nyq = filt.sample_rate / 2
    freqs_out, errs_out = [], []
    for lo, hi in ((0.0, filt.passband_edge), (filt.stopband_edge, nyq)):
        f = np.linspace(lo, hi, max(64, int(grid_points * (hi - lo) / nyq)))
        e = _error_function(filt, f)
        a = np.abs(e)
        idx = [0]
        for k in range(1, f.size - 1):
            if a[k] >= a[k - 1] and a[k] > a[k + 1]:
                idx.append(k)
        idx.append(f.size - 1)
        for k in idx:
            if 0 < k < f.size - 1:
                sgn = np.sign(e[k])
                res = minimize_scalar(
                    lambda x: -sgn * _error_function(filt, [x])[0],
                    bounds=(f[k - 1], f[k + 1]),
                    method="bounded",
                    options={"xatol": 1e-12 * nyq},
                )
                fk = float(res.x)
                ek = float(_error_function(filt, [fk])[0])
                if abs(ek) < a[k]:
                    fk, ek = float(f[k]), float(e[k])
            else:
                fk, ek = float(f[k]), float(e[k])
            freqs_out.append(fk)
            errs_out.append(ek)
    return np.array(freqs_out), np.array(errs_out)


def alternation_count(filt: FirFilter, rel_tol: float = 0.01) -> int:
    """Alternation count: near-maximal extrema, merging neighbours of equal sign."""
    _, errs = band_extrema(filt)
    peak = np.max(np.abs(errs))
    keep = errs[np.abs(errs) >= (1 - rel_tol) * peak]
    if keep.size == 0:
        return 0
    count = 1
    for prev, cur in zip(keep[:-1], keep[1:]):
        if np.sign(cur) != np.sign(prev):
            count += 1
    return count


def design_fir(spec: FilterSpec = FilterSpec(), maxiter: int = 100, grid_density: int = 16) -> FirFilter:
    """Equiripple linear-phase low-pass designed by Remez exchange.

    Order 0 gives the single-tap unity filter.  The returned ``ripple``
    is the maximum weighted error over both bands, located by refining
    every local extremum of the error function.
    """
    if spec.order == 0:
        return FirFilter(np.ones(1), spec.sample_rate, spec.passband_edge, spec.stopband_edge)
    ripples = spec.ripples()
    weights = (1.0, ripples[0] / ripples[1]) if ripples else (1.0, 1.0)
    bands = [0.0, spec.passband_edge, spec.stopband_edge, spec.sample_rate / 2]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        try:
            taps = signal.remez(
                spec.order + 1, bands, [1.0, 0.0], weight=list(weights),
                fs=spec.sample_rate, maxiter=maxiter, grid_density=grid_density,
            )
        except (ValueError, RuntimeWarning, UserWarning) as exc:
            raise ConvergenceError(
                f"Remez exchange failed for order {spec.order}, edges "
                f"{spec.passband_edge}/{spec.stopband_edge} Hz at {spec.sample_rate} Hz: {exc}"
            ) from exc
    # enforce exact symmetry; remez output is symmetric to round-off
    taps = 0.5 * (taps + taps[::-1])
    filt = FirFilter(taps, spec.sample_rate, spec.passband_edge, spec.stopband_edge, weights)
    freqs, errs = band_extrema(filt)
    pb = freqs <= spec.passband_edge
    dev_p = float(np.max(np.abs(errs[pb]))) / weights[0]
    dev_s = float(np.max(np.abs(errs[~pb]))) / weights[1]
    return FirFilter(
        taps, spec.sample_rate, spec.passband_edge, spec.stopband_edge, weights,
        float(np.max(np.abs(errs))), dev_p, dev_s,
    )


def apply_fir(f: FirFilter, x) -> np.ndarray:
    """Zero-padded convolution, shifted by half the order so output aligns with input."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return x.copy()
    full = np.convolve(x, f.taps)
    shift = f.order // 2
    return full[shift: shift + x.size]


@dataclass(frozen=True)
class NoiseExtraction:
    rho_o: float
    g: np.ndarray
    x_f: np.ndarray
    w: np.ndarray


def extract_noise(trace: Trace, p: int, f: FirFilter) -> NoiseExtraction:
    """Split an offset-free trace into low-pass signal and residual noise."""
    if len(trace) <= f.order:
        raise ParameterError(f"trace of {len(trace)} samples is not longer than filter order {f.order}")
    rho = estimate_offset(trace, p)
    g = trace.samples - rho
    x_f = apply_fir(f, g)
    return NoiseExtraction(rho, g, x_f, g - x_f)


def first_half_window(trace: Trace, window: float = 90.0) -> Trace:
    """First ``window`` seconds of a trace (the reflection-free part)."""
    if trace.duration < window - 0.5 / trace.sample_rate:
        raise ParameterError(f"trace lasts {trace.duration} s, shorter than {window} s")
    n = int(round(window * trace.sample_rate))
    return trace.with_samples(trace.samples[:n])


# --- distribution fitting -------------------------------------------------

FAMILIES = ("student_t", "log_normal", "weibull", "inverse_gaussian")


def student_t_pdf(a, nu, scale=1.0):
    a = np.asarray(a, dtype=float) / scale
    logc = gammaln((nu + 1) / 2) - gammaln(nu / 2) - 0.5 * math.log(nu * math.pi)
    return np.exp(logc - (nu + 1) / 2 * np.log1p(a * a / nu)) / scale


def log_normal_pdf(a, mu_ln, sigma_ln):
    a = np.asarray(a, dtype=float)
    out = np.zeros_like(a)
    pos = a > 0
    la = np.log(a[pos])
    out[pos] = np.exp(-((la - mu_ln) ** 2) / (2 * sigma_ln**2)) / (a[pos] * sigma_ln * math.sqrt(2 * math.pi))
    return out


def weibull_pdf(a, eta, theta):
    a = np.asarray(a, dtype=float)
    out = np.zeros_like(a)
    pos = a > 0
    z = a[pos] / theta
    out[pos] = eta / theta * z ** (eta - 1) * np.exp(-(z**eta))
    return out


def inverse_gaussian_pdf(a, mu_ig, lam_ig):
    a = np.asarray(a, dtype=float)
    out = np.zeros_like(a)
    pos = a > 0
    x = a[pos]
    mu_ig, lam_ig = np.float64(mu_ig), np.float64(lam_ig)
    # log form keeps extreme trial parameters from overflowing
    logp = 0.5 * (np.log(lam_ig) - np.log(2 * math.pi) - 3 * np.log(x)) - lam_ig * (x / mu_ig - 1) ** 2 / (2 * x)
    out[pos] = np.exp(logp)
    return out


_PDFS = {
    "student_t": student_t_pdf,
    "log_normal": log_normal_pdf,
    "weibull": weibull_pdf,
    "inverse_gaussian": inverse_gaussian_pdf,
}
# parameters optimized on a log scale to stay positive
_LOG_PARAMS = {
    "student_t": (True, True),
    "log_normal": (False, True),
    "weibull": (True, True),
    "inverse_gaussian": (True, True),
}


@dataclass(frozen=True)
class Histogram:
    centers: np.ndarray
    density: np.ndarray
    edges: np.ndarray


@dataclass(frozen=True)
class DistributionFit:
    family: str
    params: tuple[float, float]
    mse: float

    def pdf(self, a):
        return _PDFS[self.family](a, *self.params)


def freedman_diaconis_bins(x, lo=None, hi=None, max_bins: int = 2000) -> int:
    x = np.asarray(x, dtype=float)
    q75, q25 = np.percentile(x, [75, 25])
    lo = x.min() if lo is None else lo
    hi = x.max() if hi is None else hi
    width = 2 * (q75 - q25) / x.size ** (1 / 3)
    if width <= 0:
        return 10
    return int(min(max(10, math.ceil((hi - lo) / width)), max_bins))


def density_histogram(samples, bins=None, range_quantiles=(0.005, 0.995)) -> Histogram:
    """Histogram over a central quantile range, normalized by the full sample count.

    Bin heights therefore estimate the pdf directly even though the
    extreme tails are left out.
    """
    x = np.asarray(samples, dtype=float)
    lo, hi = np.quantile(x, range_quantiles)
    if not hi > lo:
        raise ParameterError("samples have no spread; histogram support is empty")
    nbins = bins if bins is not None else freedman_diaconis_bins(x, lo, hi)
    counts, edges = np.histogram(x, bins=nbins, range=(lo, hi))
    width = edges[1] - edges[0]
    return Histogram(0.5 * (edges[:-1] + edges[1:]), counts / (x.size * width), edges)


def _initial_guess(family, x):
    if family == "student_t":
        q75, q25 = np.percentile(x, [75, 25])
        return [2.0, max((q75 - q25) / 1.63, 1e-12)]
    pos = x[x > 0]
    if pos.size < 2:
        raise ParameterError(f"{family} needs positive samples")
    lx = np.log(pos)
    if family == "log_normal":
        return [lx.mean(), max(lx.std(), 1e-6)]
    if family == "weibull":
        eta = 1.283 / max(lx.std(), 1e-6)
        return [eta, math.exp(lx.mean() + 0.5772 / eta)]
    med = np.median(pos)
    # lambda from the harmonic-mean identity E[1/X] = 1/mu + 1/lambda
    inv = np.mean(1 / pos) - 1 / med
    return [med, 1 / inv if inv > 0 else med]


def fit_distribution(samples, family: str, bins: int | None = None,
                     range_quantiles=(0.005, 0.995), hist: Histogram | None = None) -> DistributionFit:
    """LM fit of a family pdf to a density histogram; MSE is over the bins."""
    if family not in _PDFS:
        raise ParameterError(f"unknown family {family!r}; choose from {FAMILIES}")
    x = np.asarray(samples, dtype=float)
    if x.size < 100:
        raise ParameterError("need at least 100 samples")
    if bins is not None and bins < 10:
        raise ParameterError("need at least 10 bins")
    h = hist or density_histogram(x, bins, range_quantiles)
    pdf = _PDFS[family]
    logs = _LOG_PARAMS[family]
    x0 = np.array([math.log(v) if lg else v for v, lg in zip(_initial_guess(family, x), logs)])

    def unpack(q):
        with np.errstate(over="ignore"):
            return [np.exp(v) if lg else np.float64(v) for v, lg in zip(q, logs)]

    def residual(q):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore", under="ignore"):
            return pdf(h.centers, *unpack(q)) - h.density

    res = lm_fit(LMProblem(residual, x0, max_iterations=500, tolerance=1e-10))
    params = tuple(float(v) for v in unpack(res.params))
    mse = float(np.mean(residual(res.params) ** 2))
    return DistributionFit(family, params, mse)


def compare_families(samples, families=FAMILIES, bins=None, range_quantiles=(0.005, 0.995)):
    """Fit several families on one shared histogram; returns fits sorted by MSE."""
    x = np.asarray(samples, dtype=float)
    h = density_histogram(x, bins, range_quantiles)
    fits = [fit_distribution(x, fam, hist=h) for fam in families]
    return sorted(fits, key=lambda f: f.mse)
