import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fiberppe.signalgen import (
    ComplexSignal,
    FormatKind,
    SymbolFormat,
    format_distribution,
    generate_symbols,
    make_waveform,
    normalize_power,
    pcs_distribution,
    rrc_frequency_response,
    shape_and_resample,
)

ALL_FORMATS = [
    SymbolFormat("Gaussian"),
    SymbolFormat("QPSK"),
    SymbolFormat("QAM16"),
    SymbolFormat("QAM64"),
    SymbolFormat("PCS64QAM", 4.347),
]


def _entropy(p):
    p = p[p > 0]
    return -np.sum(p * np.log2(p))


def test_qpsk_points_and_energy():
    s = generate_symbols("QPSK", 4, seed=3)
    ref = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)
    assert all(np.min(np.abs(ref - x)) < 1e-15 for x in s)
    assert np.allclose(np.abs(s) ** 2, 1.0)


def test_gaussian_fourth_moment():
    x = generate_symbols("Gaussian", 10**6, seed=5)
    p = np.abs(x) ** 2
    ratio = np.mean(p**2) / np.mean(p) ** 2
    # delta-method standard error of the ratio for a circular Gaussian
    se = np.sqrt(20.0) / np.sqrt(x.size)
    assert abs(ratio - 2.0) < 3 * se


@pytest.mark.parametrize("fmt", ALL_FORMATS[1:], ids=str)
def test_discrete_distributions_zero_mean_unit_energy(fmt):
    points, p = format_distribution(fmt)
    assert abs(np.sum(p * points)) < 1e-12
    assert np.sum(p * np.abs(points) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_pcs_entropy():
    points, p = pcs_distribution(4.347)
    assert _entropy(p) == pytest.approx(4.347, abs=1e-3)
    x = generate_symbols(SymbolFormat("PCS64QAM", 4.347), 10**6, seed=1)
    assert np.mean(np.abs(x) ** 2) == pytest.approx(1.0, abs=5e-3)


@pytest.mark.parametrize("h", [2.0, 6.0, 1.0, 7.5])
def test_pcs_entropy_out_of_range(h):
    with pytest.raises(ValueError):
        SymbolFormat("PCS64QAM", h)
    with pytest.raises(ValueError):
        pcs_distribution(h)


def test_unknown_format():
    with pytest.raises(ValueError):
        generate_symbols("8PSK", 10, 0)
    with pytest.raises(ValueError):
        FormatKind.parse("OOK")


def test_count_must_be_positive():
    with pytest.raises(ValueError):
        generate_symbols("QPSK", 0, 0)


def test_rolloff_zero_is_rectangular():
    sig = shape_and_resample(generate_symbols("Gaussian", 1024, 0), 8, 0.0, symbol_rate=32.0)
    spec = np.abs(np.fft.fft(sig.samples)) ** 2
    f = np.fft.fftfreq(len(sig), d=sig.sample_period) * 1e3
    assert np.all(spec[np.abs(f) > 16.0 + 1e-9] < 1e-20)
    assert np.all(spec[np.abs(f) < 16.0 - 1e-9] > 0)


def test_occupied_bandwidth_128gbd():
    sig = shape_and_resample(generate_symbols("QPSK", 512, 0), 20, 0.1, symbol_rate=128.0)
    spec = np.abs(np.fft.fft(sig.samples)) ** 2
    f = np.fft.fftfreq(len(sig), d=sig.sample_period) * 1e3
    occ = f[spec > 1e-20 * spec.max()]
    assert occ.max() - occ.min() == pytest.approx(140.8, abs=2 * (f[1] - f[0]))


def test_impulse_train_reproduces_filter():
    sym = np.zeros(256, complex)
    sym[0] = 1.0
    sig = shape_and_resample(sym, 4, 0.25, symbol_rate=10.0)
    freq = np.fft.fftfreq(len(sig), d=sig.sample_period) * 1e3
    assert np.allclose(np.fft.fft(sig.samples), rrc_frequency_response(freq, 10.0, 0.25), atol=1e-12)


def test_three_db_bandwidth_equals_symbol_rate():
    sig = make_waveform("Gaussian", 8192, 4, 64.0, 0.1, seed=2)
    # ensemble power response (RRC squared) crosses one half at Rs/2
    f = np.linspace(0, 64.0, 64001)
    resp = rrc_frequency_response(f, 64.0, 0.1) ** 2
    edge = f[np.argmin(np.abs(resp - 0.5))]
    assert 2 * edge == pytest.approx(64.0, rel=0.02)
    assert sig.meta["symbol_rate_gbd"] == 64.0


def test_sps_below_two_rejected():
    with pytest.raises(ValueError):
        shape_and_resample(np.ones(8), 1, 0.1, symbol_rate=1.0)
    with pytest.raises(ValueError):
        shape_and_resample(np.ones(8), 2, 1.5, symbol_rate=1.0)


def test_normalize_idempotent_and_scale_invariant():
    sig = make_waveform("QAM16", 1024, 2, 10.0, seed=4)
    again = normalize_power(sig)
    assert np.allclose(again.samples, sig.samples, rtol=1e-15)
    scaled = sig.replace(sig.samples * 3.0)
    assert np.allclose(normalize_power(scaled).samples, sig.samples, rtol=1e-13)


def test_normalize_large_block_exact():
    sig = make_waveform("Gaussian", 2**18, 4, 64.0, seed=9)
    assert len(sig) == 2**20
    assert abs(np.mean(np.abs(sig.samples) ** 2) - 1.0) < 1e-12
    assert sig.normalized


def test_normalize_zero_signal():
    with pytest.raises(ValueError):
        normalize_power(ComplexSignal(np.zeros(16), 1.0))


@pytest.mark.parametrize("fmt", ALL_FORMATS, ids=str)
def test_deterministic_and_unit_lag0(fmt):
    a = make_waveform(fmt, 2048, 4, 32.0, seed=77)
    b = make_waveform(fmt, 2048, 4, 32.0, seed=77)
    assert np.array_equal(a.samples, b.samples)
    assert np.vdot(a.samples, a.samples).real / len(a) == pytest.approx(1.0, abs=1e-12)
    assert a.meta["seed"] == 77 and a.meta["rng"]


def test_gaussian_waveform_circular():
    sig = make_waveform("Gaussian", 2**15, 4, 64.0, seed=8)
    x = sig.samples
    # samples are correlated over ~sps; use batch means for the standard error
    sq = (x**2).reshape(64, -1).mean(axis=1)
    se = np.std(sq, ddof=1) / np.sqrt(sq.size)
    assert abs(np.mean(x**2)) < 5 * se


@settings(max_examples=40, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False),
                min_size=2, max_size=64))
def test_normalize_property(values):
    arr = np.array(values)
    if np.mean(np.abs(arr) ** 2) < 1e-12:
        return
    out = normalize_power(ComplexSignal(arr, 1.0))
    assert np.mean(np.abs(out.samples) ** 2) == pytest.approx(1.0, rel=1e-12)
