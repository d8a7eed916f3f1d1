import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fiberppe.errors import WaveformFormatError
from fiberppe.io import HEADER, read_waveform, waveform_io, write_waveform
from fiberppe.signalgen import ComplexSignal, make_waveform


def test_round_trip(tmp_path, small_tx):
    path = tmp_path / "tx.ppe"
    write_waveform(path, small_tx)
    back = read_waveform(path)
    assert np.array_equal(back.samples, small_tx.samples)
    assert back.sample_period == small_tx.sample_period
    assert back.samples_per_symbol == 4
    assert back.meta["format"] == "Gaussian" and back.meta["seed"] == 11
    assert back.normalized
    assert path.stat().st_size == HEADER.size + 16 * len(small_tx)


def test_waveform_io_modes(tmp_path, small_tx):
    path = tmp_path / "w.ppe"
    assert waveform_io(path, "write", small_tx) is None
    assert len(waveform_io(path, "read")) == len(small_tx)
    with pytest.raises(ValueError):
        waveform_io(path, "write")
    with pytest.raises(ValueError):
        waveform_io(path, "append", small_tx)


def test_unknown_format_tag(tmp_path):
    sig = ComplexSignal(np.ones(8, complex), 1.0, meta={"format": "OOK"})
    write_waveform(tmp_path / "u.ppe", sig)
    back = read_waveform(tmp_path / "u.ppe")
    assert back.meta["format"] is None and back.meta["format_tag"] == 255


def test_bad_magic(tmp_path, small_tx):
    path = tmp_path / "bad.ppe"
    write_waveform(path, small_tx)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(raw)
    with pytest.raises(WaveformFormatError, match="bad magic"):
        read_waveform(path)


def test_unknown_version(tmp_path, small_tx):
    path = tmp_path / "v2.ppe"
    write_waveform(path, small_tx)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"PPE2"
    path.write_bytes(raw)
    with pytest.raises(WaveformFormatError, match="unsupported waveform version"):
        read_waveform(path)


def test_truncated_payload(tmp_path):
    sig = make_waveform("QPSK", 256, 4, 32.0, seed=1)
    path = tmp_path / "t.ppe"
    write_waveform(path, sig)
    raw = path.read_bytes()
    path.write_bytes(raw[:-160])
    with pytest.raises(WaveformFormatError, match="payload holds 1014 samples, header declares 1024"):
        read_waveform(path)
    path.write_bytes(raw[:20])
    with pytest.raises(WaveformFormatError, match="truncated header"):
        read_waveform(path)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.complex_numbers(allow_nan=False, allow_infinity=False, max_magnitude=1e12),
                min_size=1, max_size=50),
       st.floats(1e-3, 1e3), st.integers(1, 64), st.integers(0, 2**63))
def test_round_trip_property(tmp_path_factory, values, period, sps, seed):
    path = tmp_path_factory.mktemp("h") / "x.ppe"
    sig = ComplexSignal(np.array(values, complex), period, sps, meta={"seed": seed})
    write_waveform(path, sig)
    back = read_waveform(path)
    assert np.array_equal(back.samples, sig.samples)
    assert (back.sample_period, back.samples_per_symbol, back.meta["seed"]) == (period, sps, seed)
