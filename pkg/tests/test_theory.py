import numpy as np
import pytest

from fiberppe.errors import ConfigError
from fiberppe.estimators import EstimationGrid
from fiberppe.fibersim import LinkSpec, Span, standard_link
from fiberppe.theory import (
    Autocorrelation,
    SrfCurve,
    dispersion_length,
    fwhm,
    gaussian_bandwidth,
    gaussian_sigma,
    numeric_sr,
    predict_cm,
    predict_mmse,
    sr_closed_form,
    srf_curve,
    srf_gaussian,
    srf_general,
    srf_uniform,
)

B2 = -20.55


@pytest.fixture(scope="module")
def rect128():
    return Autocorrelation.rectangular(128.0)


def test_srf_at_zero_is_one(rect128):
    curve = srf_curve(rect128, B2, [0.0])
    assert curve.values[0] == pytest.approx(1.0)
    assert srf_gaussian(0.0, B2, 0.5) == 1.0


def test_srf_hermitian_and_peaked(rect128):
    z = np.linspace(-5, 5, 41)
    g = srf_uniform(rect128, B2, z)
    assert np.allclose(g, g[::-1].conj(), atol=1e-12 * abs(g[20]))
    assert np.argmax(g.real) == 20


def test_fwhm_rectangular_128(rect128):
    assert numeric_sr(rect128, B2) == pytest.approx(1.5, rel=0.05)


@pytest.mark.parametrize("sigma", [0.3, 0.6])
def test_gaussian_numeric_matches_closed_form(sigma):
    acf = Autocorrelation.gaussian(sigma)
    zcd = dispersion_length(B2, sigma)
    z = np.linspace(-5 * zcd, 5 * zcd, 81)
    num = srf_uniform(acf, B2, z) / srf_uniform(acf, B2, 0.0)
    ref = srf_gaussian(z, B2, sigma)
    assert np.max(np.abs(num - ref)) < 5e-3


def test_gaussian_closed_form_fwhm():
    sigma = 0.4
    zcd = dispersion_length(B2, sigma)
    z = np.linspace(-3 * zcd, 3 * zcd, 6001)
    assert fwhm((z, srf_gaussian(z, B2, sigma))) == pytest.approx(1.76 * zcd, rel=5e-3)


def test_bandwidth_sigma_round_trip():
    assert gaussian_sigma(gaussian_bandwidth(0.37)) == pytest.approx(0.37)


def test_srf_general_reduces_to_uniform(rect128, link):
    z_k, z = 60.0, np.array([55.0, 60.0, 63.0])
    assert np.allclose(srf_general(rect128, link, z_k, z), srf_uniform(rect128, B2, z_k - z))
    assert srf_general(rect128, link, 30.0, 30.0) == pytest.approx(srf_uniform(rect128, B2, 0.0))


def test_srf_general_nzdsf_side_is_wider(rect128):
    link = LinkSpec([Span(50.0, beta2=-20.55), Span(50.0, beta2=-5.0)])
    offs = np.linspace(0, 10, 201)
    left = srf_general(rect128, link, 50.0, 50.0 - offs).real
    right = srf_general(rect128, link, 50.0, 50.0 + offs).real
    half = 0.5 * left[0]
    assert offs[np.argmax(right < half)] > 3 * offs[np.argmax(left < half)]


def test_non_hermitian_acf_rejected():
    with pytest.raises(ValueError):
        Autocorrelation(np.array([1.0, 0.5j, 0.2, 0.1j]), 1.0)


def test_scaling_law_and_format_ordering():
    srs = {bw: numeric_sr(Autocorrelation.rectangular(bw), B2) for bw in (64.0, 128.0)}
    assert srs[64.0] / srs[128.0] == pytest.approx(4.0, rel=0.03)
    gauss = Autocorrelation.gaussian(gaussian_sigma(128.0))
    assert numeric_sr(gauss, B2) < srs[128.0]


def test_sr_closed_form():
    assert sr_closed_form(B2, 128.0) == pytest.approx(0.507 / (20.55 * 0.128**2))
    assert sr_closed_form(B2, 128.0, "gaussian") == pytest.approx(0.248 / (20.55 * 0.128**2))
    with pytest.raises(ValueError):
        sr_closed_form(0.0, 128.0)


def test_srf_curve_csv_round_trip(tmp_path, rect128):
    curve = srf_curve(rect128, B2, np.linspace(-3, 3, 13))
    curve.to_csv(tmp_path / "srf.csv")
    back = SrfCurve.from_csv(tmp_path / "srf.csv")
    assert np.array_equal(back.values, curve.values)
    assert back.beta2 == B2 and back.kind == "rectangular"
    assert back.normalization == curve.normalization


def test_predict_cm_constant_profile(rect128):
    link = standard_link(anomalies=[])
    grid = EstimationGrid([75.0], 1.0)
    flat = predict_cm(lambda z: np.full(np.shape(z), 1e-3), link, grid, acf=rect128)
    # 2 x integral of Re g over the link as seen from its midpoint; the tail
    # decays slowly, so the limits must match the link
    offs = np.linspace(-75, 75, 30001)
    area = np.trapezoid(srf_uniform(rect128.normalized(), B2, offs).real, offs)
    assert flat.values[0] == pytest.approx(2e-3 * area, rel=1e-2)
    orig = predict_cm(lambda z: np.full(np.shape(z), 1e-3), link, grid, 0.01, "original", acf=rect128)
    assert orig.values[0] == pytest.approx(1.0 + 0.01 * flat.values[0], rel=1e-9)
    with pytest.raises(ValueError):
        predict_cm(None, link, grid, variant="other", acf=rect128)


def test_predict_mmse_recovers_smooth_profile():
    acf = Autocorrelation.rectangular(64.0)
    link = standard_link()
    # a coarse grid under-samples the kernel and biases the level, so use dz well below SR
    grid = EstimationGrid.uniform(150.0, 1.0)
    smooth = lambda z: 1e-3 * (1.0 + 0.2 * np.cos(2 * np.pi * np.asarray(z) / 150.0))
    pred = predict_mmse(smooth, link, grid, acf=acf)
    inner = (grid.positions > 20) & (grid.positions < 130)
    assert np.allclose(pred.values[inner], smooth(grid.positions[inner]), rtol=0.02)
    dm = LinkSpec([Span(50.0, beta2=-20.55), Span(50.0, beta2=-5.0)])
    with pytest.raises(ConfigError):
        predict_mmse(None, dm, grid, acf=acf)


def test_from_signal_bandwidth(small_tx):
    acf = Autocorrelation.from_signal(small_tx, n_bins=1024)
    # the periodogram peak is noisy, which pulls the half-maximum crossing inward
    assert acf.bandwidth_3db == pytest.approx(64.0, rel=0.1)
    assert Autocorrelation.raised_cosine(64.0, 0.1).bandwidth_3db == pytest.approx(64.0, rel=0.01)
    assert acf.normalized().power == pytest.approx(1.0)
