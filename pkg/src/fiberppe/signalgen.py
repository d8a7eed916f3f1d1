"""Transmit symbol generation and Nyquist pulse shaping.

Every waveform is one period of a cyclic signal: shaping is done by
multiplication in the frequency domain, so the pulse wraps around the block
edges and all samples are statistically equivalent.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field

import numpy as np

RNG_NAME = "numpy.random.PCG64"


class FormatKind(enum.Enum):
    GAUSSIAN = "Gaussian"
    QPSK = "QPSK"
    QAM16 = "QAM16"
    QAM64 = "QAM64"
    PCS64QAM = "PCS64QAM"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).replace("-", "").replace("_", "").upper()
        for kind in cls:
            if kind.value.upper() == key:
                return kind
        raise ValueError(f"unknown symbol format {name!r}")


# numeric tags used by the waveform file header
FORMAT_TAGS = {
    FormatKind.GAUSSIAN: 0,
    FormatKind.QPSK: 1,
    FormatKind.QAM16: 2,
    FormatKind.QAM64: 3,
    FormatKind.PCS64QAM: 4,
}
UNKNOWN_FORMAT_TAG = 255


@dataclass(frozen=True)
class SymbolFormat:
    """Modulation format; ``entropy_bits`` is only used by PCS64QAM."""

    kind: FormatKind
    entropy_bits: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", FormatKind.parse(self.kind))
        if self.kind is FormatKind.PCS64QAM:
            if self.entropy_bits is None:
                raise ValueError("PCS64QAM requires entropy_bits")
            if not 2.0 < self.entropy_bits < 6.0:
                raise ValueError(
                    f"PCS64QAM entropy must lie in (2, 6) bits, got {self.entropy_bits}"
                )

    @classmethod
    def parse(cls, name, entropy_bits=None):
        return cls(FormatKind.parse(name), entropy_bits)

    def __str__(self):
        if self.kind is FormatKind.PCS64QAM:
            return f"PCS64QAM(H={self.entropy_bits:g})"
        return self.kind.value


@dataclass
class ComplexSignal:
    """Uniformly sampled complex baseband waveform.

    Attributes
    ----------
    samples : ndarray of complex128
        One period of the cyclic waveform.
    sample_period : float
        Sampling period in ps.
    samples_per_symbol : int
        Oversampling factor (1 for a bare symbol sequence).
    normalized : bool
        True when the mean sample power has been set to one.
    meta : dict
        Provenance record (format, seed, generator, symbol rate, roll-off).
    """

    samples: np.ndarray
    sample_period: float
    samples_per_symbol: int = 1
    normalized: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if self.sample_period <= 0:
            raise ValueError("sample_period must be positive")

    def __len__(self):
        return self.samples.size

    @property
    def power(self):
        return float(np.mean(np.abs(self.samples) ** 2))

    @property
    def sample_rate(self):
        """Sampling rate in THz (1/ps)."""
        return 1.0 / self.sample_period

    def replace(self, samples, **changes):
        return dataclasses.replace(self, samples=samples, meta=dict(self.meta), **changes)


# ----------------------------------------------------------------- alphabets
def qam_alphabet(order):
    """Square QAM points on the odd-integer grid (unnormalized)."""
    m = int(round(np.sqrt(order)))
    if m * m != order:
        raise ValueError("QAM order must be a perfect square")
    levels = np.arange(-(m - 1), m, 2, dtype=float)
    re, im = np.meshgrid(levels, levels)
    return (re + 1j * im).ravel()


def _entropy_bits(p):
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def _mb_probabilities(energies, nu):
    logits = -nu * energies
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


def pcs_distribution(entropy_bits, tol=1e-10):
    """Maxwell-Boltzmann prior over 64QAM with the requested entropy.

    Returns the unit-energy alphabet and its probabilities. The rate
    parameter is located by bisection on the (monotone) entropy curve.
    """
    if not 2.0 < entropy_bits < 6.0:
        raise ValueError(f"64QAM entropy must lie in (2, 6) bits, got {entropy_bits}")
    points = qam_alphabet(64)
    energies = np.abs(points) ** 2
    lo, hi = 0.0, 1.0
    while _entropy_bits(_mb_probabilities(energies, hi)) > entropy_bits:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _entropy_bits(_mb_probabilities(energies, mid)) > entropy_bits:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * max(hi, 1e-12):
            break
    p = _mb_probabilities(energies, 0.5 * (lo + hi))
    scale = np.sqrt(np.sum(p * energies))
    return points / scale, p


def format_distribution(fmt):
    """Alphabet and prior of a discrete format (None for Gaussian)."""
    kind = fmt.kind
    if kind is FormatKind.GAUSSIAN:
        return None
    if kind is FormatKind.PCS64QAM:
        return pcs_distribution(fmt.entropy_bits)
    order = {FormatKind.QPSK: 4, FormatKind.QAM16: 16, FormatKind.QAM64: 64}[kind]
    points = qam_alphabet(order)
    points = points / np.sqrt(np.mean(np.abs(points) ** 2))
    return points, np.full(order, 1.0 / order)


def generate_symbols(fmt, count, seed):
    """Draw ``count`` i.i.d. symbols of format ``fmt``.

    The alphabet is scaled so the *distribution* has unit mean energy;
    Gaussian symbols are circular with unit variance.
    """
    if not isinstance(fmt, SymbolFormat):
        fmt = SymbolFormat.parse(fmt)
    count = int(count)
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    if fmt.kind is FormatKind.GAUSSIAN:
        return (rng.standard_normal(count) + 1j * rng.standard_normal(count)) / np.sqrt(2.0)
    points, p = format_distribution(fmt)
    idx = rng.choice(points.size, size=count, p=p)
    return points[idx]


# ------------------------------------------------------------------ shaping
def rrc_frequency_response(freq, symbol_rate, rolloff):
    """Root-raised-cosine amplitude response at ``freq`` (same units as the rate).

    Unit gain in the passband; the power response crosses one half at
    ``|f| = symbol_rate / 2``.
    """
    f = np.abs(np.asarray(freq, dtype=float))
    half = symbol_rate / 2.0
    h = np.zeros_like(f)
    if rolloff == 0:
        h[f < half] = 1.0
        h[np.isclose(f, half, rtol=1e-12, atol=0)] = np.sqrt(0.5)
        return h
    f1 = (1.0 - rolloff) * half
    f2 = (1.0 + rolloff) * half
    h[f <= f1] = 1.0
    band = (f > f1) & (f <= f2)
    h[band] = np.sqrt(0.5 * (1.0 + np.cos(np.pi / (rolloff * symbol_rate) * (f[band] - f1))))
    return h


def shape_and_resample(symbols, samples_per_symbol, rolloff, *, symbol_rate, meta=None):
    """Upsample a symbol block and apply root-raised-cosine shaping.

    Parameters
    ----------
    symbols : array_like of complex
        One period of the symbol sequence.
    samples_per_symbol : int
        Oversampling factor, at least 2.
    rolloff : float
        Roll-off factor in [0, 1].
    symbol_rate : float
        Symbol rate in GBd; fixes the sample period of the result.

    Returns
    -------
    ComplexSignal
        The shaped waveform (not yet power-normalized).
    """
    sps = int(samples_per_symbol)
    if sps < 2:
        raise ValueError("samples_per_symbol must be >= 2 to hold the shaped spectrum")
    if not 0.0 <= rolloff <= 1.0:
        raise ValueError("rolloff must be within [0, 1]")
    if symbol_rate <= 0:
        raise ValueError("symbol_rate must be positive")
    symbols = np.asarray(symbols, dtype=np.complex128)
    n = symbols.size * sps
    # zero-stuffed upsampling replicates the symbol spectrum sps times
    spectrum = np.tile(np.fft.fft(symbols), sps)
    freq = np.fft.fftfreq(n, d=1.0 / sps)  # in units of the symbol rate
    spectrum *= rrc_frequency_response(freq, 1.0, rolloff)
    samples = np.fft.ifft(spectrum)
    info = dict(meta or {})
    info.update(symbol_rate_gbd=float(symbol_rate), rolloff=float(rolloff))
    return ComplexSignal(
        samples=samples,
        sample_period=1e3 / (symbol_rate * sps),
        samples_per_symbol=sps,
        normalized=False,
        meta=info,
    )


def normalize_power(signal):
    """Scale a waveform to unit mean power."""
    p = np.mean(np.abs(signal.samples) ** 2)
    if not p > 0:
        raise ValueError("cannot normalize a zero-energy signal")
    return signal.replace(signal.samples / np.sqrt(p), normalized=True)


def make_waveform(fmt, n_symbols, samples_per_symbol, symbol_rate, rolloff=0.1, seed=0):
    """Symbols -> shaped -> normalized waveform, with provenance in ``meta``."""
    if not isinstance(fmt, SymbolFormat):
        fmt = SymbolFormat.parse(fmt)
    symbols = generate_symbols(fmt, n_symbols, seed)
    meta = {
        "format": fmt.kind.value,
        "entropy_bits": fmt.entropy_bits,
        "seed": int(seed),
        "rng": RNG_NAME,
    }
    sig = shape_and_resample(symbols, samples_per_symbol, rolloff, symbol_rate=symbol_rate, meta=meta)
    return normalize_power(sig)
