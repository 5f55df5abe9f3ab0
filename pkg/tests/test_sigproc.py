import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from puffloc.errors import ParameterError
from puffloc.numerics import sample_lognormal, sample_student_t
from puffloc.sensor import NodeId, Trace
from puffloc.sigproc import (
    FAMILIES,
    FilterSpec,
    FirFilter,
    alternation_count,
    apply_fir,
    band_extrema,
    compare_families,
    density_histogram,
    design_fir,
    estimate_order,
    extract_noise,
    first_half_window,
    fit_distribution,
    inverse_gaussian_pdf,
    log_normal_pdf,
    student_t_pdf,
    weibull_pdf,
)

NODE = NodeId(1, 1)


@pytest.fixture(scope="module")
def lowpass():
    return design_fir(FilterSpec())


def test_spec_validation():
    with pytest.raises(ParameterError):
        FilterSpec(passband_edge=0.1, stopband_edge=0.09)
    with pytest.raises(ParameterError):
        FilterSpec(stopband_edge=6.0)
    with pytest.raises(ParameterError):
        FilterSpec(order=241)


def test_order_zero_unity():
    f = design_fir(FilterSpec(order=0))
    assert f.taps.tolist() == [1.0]
    x = np.random.default_rng(0).normal(size=50)
    np.testing.assert_array_equal(apply_fir(f, x), x)


def test_taps_symmetric(lowpass):
    assert lowpass.order == 242
    np.testing.assert_array_equal(lowpass.taps, lowpass.taps[::-1])


def test_dc_gain_within_ripple(lowpass):
    assert abs(lowpass.amplitude(0.0)[0] - 1.0) <= lowpass.ripple


def test_stopband_below_bound(lowpass):
    f = np.linspace(0, 5.0, 4096)
    mag = lowpass.magnitude(f[f >= 0.09])
    assert mag.max() <= lowpass.ripple


def test_equiripple_alternation(lowpass):
    assert alternation_count(lowpass) >= lowpass.order // 2 + 2
    _, errs = band_extrema(lowpass)
    top = np.sort(np.abs(errs))[-(lowpass.order // 2 + 2):]
    assert top.min() >= 0.99 * top.max()


def test_estimate_order_close_to_design(lowpass):
    n = estimate_order(0.04, 0.09, lowpass.ripple, lowpass.ripple, 10.0)
    assert n % 2 == 0
    assert abs(n - 242) <= 12


def test_dc_input_passes(lowpass):
    x = np.ones(2000)
    y = apply_fir(lowpass, x)
    mid = slice(lowpass.order, x.size - lowpass.order)
    assert np.max(np.abs(y[mid] - 1)) <= lowpass.ripple


def test_stopband_sinusoid_rejected(lowpass):
    t = np.arange(4000) / 10.0
    x = np.sin(2 * np.pi * 0.5 * t)
    y = apply_fir(lowpass, x)
    mid = slice(lowpass.order, x.size - lowpass.order)
    assert np.sqrt(np.mean(y[mid] ** 2)) <= lowpass.ripple * np.sqrt(np.mean(x[mid] ** 2))


def test_apply_fir_length_and_alignment():
    taps = np.array([0.25, 0.5, 0.25])
    f = FirFilter(taps, 10.0)
    x = np.zeros(9)
    x[4] = 1.0
    y = apply_fir(f, x)
    assert y.size == 9
    np.testing.assert_allclose(y[3:6], taps)


def test_extract_noise_constant_trace(lowpass):
    tr = Trace(NODE, np.full(900, 0.1), 10.0)
    ex = extract_noise(tr, 50, lowpass)
    assert np.max(np.abs(ex.w)) < 1e-12


def test_extract_noise_reconstruction(lowpass):
    x = 0.1 + sample_student_t(1.43, 0.005, 900, seed=1)
    tr = Trace(NODE, x, 10.0)
    ex = extract_noise(tr, 50, lowpass)
    np.testing.assert_allclose(ex.x_f + ex.w, ex.g, rtol=0, atol=1e-15)
    np.testing.assert_allclose(ex.x_f + ex.w + ex.rho_o, x, rtol=0, atol=1e-15)


def test_extract_noise_variance(lowpass):
    # noise much wider than the passband: the residual keeps nearly all of it
    noise = sample_student_t(5.0, 0.005, 1800, seed=3)
    tr = Trace(NODE, 0.1 + noise, 10.0)
    ex = extract_noise(tr, 50, lowpass)
    assert np.var(ex.w) == pytest.approx(np.var(noise), rel=0.10)


def test_extract_noise_short_trace(lowpass):
    with pytest.raises(ParameterError):
        extract_noise(Trace(NODE, np.zeros(100), 10.0), 50, lowpass)


def test_first_half_window():
    tr = Trace(NODE, np.zeros(1800), 10.0)
    assert len(first_half_window(tr)) == 900
    short = Trace(NODE, np.zeros(900), 10.0)
    assert len(first_half_window(short)) == 900
    with pytest.raises(ParameterError):
        first_half_window(Trace(NODE, np.zeros(600), 10.0))


@pytest.mark.parametrize(
    "pdf,params",
    [(student_t_pdf, (1.43, 0.01)), (log_normal_pdf, (-3.0554, 2.0888)),
     (weibull_pdf, (0.8, 0.05)), (inverse_gaussian_pdf, (0.05, 0.02))],
)
def test_pdfs_integrate_to_one(pdf, params):
    lo = -np.inf if pdf is student_t_pdf else 0.0
    total, _ = quad(lambda a: float(pdf(np.array([a]), *params)[0]), lo, np.inf, limit=500, points=None)
    assert total == pytest.approx(1.0, rel=1e-4)


def test_student_t_fit_recovers_nu():
    fit = fit_distribution(sample_student_t(1.43, 0.005, 100_000, seed=11), "student_t")
    assert fit.params[0] == pytest.approx(1.43, rel=0.10)
    assert fit.params[1] == pytest.approx(0.005, rel=0.10)


def test_lognormal_fit_and_ranking():
    x = sample_lognormal(-3.0554, 2.0888, 100_000, seed=12)
    fits = compare_families(x)
    assert fits[0].family == "log_normal"
    assert all(fits[0].mse < f.mse for f in fits[1:])
    mu, sig = fits[0].params
    assert mu == pytest.approx(-3.0554, rel=0.05) and sig == pytest.approx(2.0888, rel=0.05)


def test_fit_params_in_domain():
    x = sample_lognormal(-3.0554, 2.0888, 20_000, seed=13)
    for fam in FAMILIES:
        f = fit_distribution(x, fam)
        if fam != "log_normal":
            assert min(f.params) > 0
        else:
            assert f.params[1] > 0
        assert np.isfinite(f.mse) and f.mse >= 0


def test_fit_input_checks():
    with pytest.raises(ParameterError):
        fit_distribution(np.ones(50), "student_t")
    with pytest.raises(ParameterError):
        fit_distribution(np.ones(500), "student_t")
    with pytest.raises(ParameterError):
        fit_distribution(np.arange(500.0), "student_t", bins=5)
    with pytest.raises(ParameterError):
        fit_distribution(np.arange(500.0), "gamma")


def test_histogram_normalized_by_total():
    x = sample_student_t(1.43, 1.0, 50_000, seed=5)
    h = density_histogram(x)
    width = h.edges[1] - h.edges[0]
    assert np.sum(h.density) * width == pytest.approx(0.99, abs=1e-3)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 1000))
def test_fit_permutation_invariant(seed):
    x = sample_student_t(1.43, 0.01, 2000, seed=seed)
    perm = np.random.default_rng(seed).permutation(x)
    a = fit_distribution(x, "student_t")
    b = fit_distribution(perm, "student_t")
    assert a.mse == b.mse and a.params == b.params


def test_mse_shrinks_with_sample_count():
    def avg_mse(n):
        return np.mean([
            fit_distribution(sample_lognormal(-1.0, 0.5, n, seed=s), "log_normal", bins=40).mse
            for s in range(8)
        ])

    assert avg_mse(20_000) <= avg_mse(1_000)
