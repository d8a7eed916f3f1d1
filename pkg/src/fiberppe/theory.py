"""Spatial response function, spatial resolution and predicted profiles.

For a stationary Gaussian input with autocorrelation ``rho_m`` the kernel
linking positions ``z_k`` and ``z`` is

    G(z_k, z) = [ D^-1 N D rho ]_{m=0},   N: x -> |x|^2 x,

with ``D`` the dispersion accumulated from ``z_k`` to ``z``. It only depends
on that accumulated dispersion, so it is evaluated as a function of
``(B2, B3)`` and tabulated when many positions are needed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError, DispersionManagedError
from .fibersim import accumulated_dispersion, angular_frequency, gamma_prime_at
from .estimators import EstimationGrid, PowerProfile

GAUSSIAN_SR_COEFF = 0.248
RECTANGULAR_SR_COEFF = 0.507


# ------------------------------------------------------------ spectra
@dataclass
class Autocorrelation:
    """Sampled autocorrelation of a stationary input, stored via its spectrum.

    ``density`` holds the power per FFT bin (FFT ordering), so that
    ``rho_0 = density.sum()`` and ``rho_m = n * ifft(density)[m]``.
    """

    density: np.ndarray
    sample_period: float  # ps
    kind: str = "measured"
    bandwidth_3db: float | None = None  # GHz

    def __post_init__(self):
        d = np.asarray(self.density)
        if np.iscomplexobj(d):
            if np.max(np.abs(d.imag)) > 1e-9 * max(np.max(np.abs(d.real)), 1e-300):
                raise ValueError("autocorrelation is not Hermitian (complex power spectrum)")
            d = d.real
        if np.any(d < -1e-12 * np.max(np.abs(d))):
            raise ValueError("power spectrum must be non-negative")
        self.density = np.clip(d.astype(float), 0.0, None)
        if self.bandwidth_3db is None:
            self.bandwidth_3db = self._measure_bandwidth()

    @property
    def n(self):
        return self.density.size

    @property
    def power(self):
        return float(self.density.sum())

    @property
    def values(self):
        """``rho_m`` in FFT lag ordering."""
        return self.n * np.fft.ifft(self.density)

    def freq(self):
        """Bin frequencies in GHz."""
        return np.fft.fftfreq(self.n, d=self.sample_period) * 1e3

    def _measure_bandwidth(self):
        f = self.freq()
        above = self.density >= 0.5 * self.density.max()
        return float(f[above].max() - f[above].min() + (f[1] - f[0]))

    def normalized(self):
        return Autocorrelation(self.density / self.power, self.sample_period, self.kind,
                               self.bandwidth_3db)

    @classmethod
    def from_values(cls, rho, sample_period, kind="measured"):
        rho = np.asarray(rho, dtype=complex)
        n = rho.size
        if not np.allclose(rho[1:][::-1], np.conj(rho[1:]), atol=1e-9 * abs(rho[0])):
            raise ValueError("autocorrelation is not Hermitian")
        return cls(np.fft.fft(rho) / n, sample_period, kind)

    @classmethod
    def rectangular(cls, bandwidth_ghz, n=8192, oversample=8):
        """Flat spectrum of width ``bandwidth_ghz`` (the Nyquist-limit shape)."""
        dt = 1e3 / (oversample * bandwidth_ghz)
        f = np.fft.fftfreq(n, d=dt) * 1e3
        half = bandwidth_ghz / 2.0
        d = np.where(np.abs(f) < half, 1.0, 0.0)
        d[np.isclose(np.abs(f), half, rtol=1e-12)] = 0.5
        return cls(d / d.sum(), dt, "rectangular", float(bandwidth_ghz))

    @classmethod
    def gaussian(cls, sigma, n=8192, span=16.0):
        """Spectrum ``exp(-w^2 / (2 sigma^2))``, ``sigma`` in rad/ps."""
        bw = gaussian_bandwidth(sigma)
        dt = 2.0 * np.pi / (span * sigma)  # grid covers +-span/2 sigma
        w = angular_frequency(n, dt)
        d = np.exp(-(w**2) / (2.0 * sigma**2))
        return cls(d / d.sum(), dt, "gaussian", bw)

    @classmethod
    def raised_cosine(cls, symbol_rate_gbd, rolloff, n=8192, oversample=8):
        """Ensemble spectrum of i.i.d. symbols after root-raised-cosine shaping."""
        from .signalgen import rrc_frequency_response

        dt = 1e3 / (oversample * symbol_rate_gbd)
        f = np.fft.fftfreq(n, d=dt) * 1e3
        d = rrc_frequency_response(f, symbol_rate_gbd, rolloff) ** 2
        return cls(d / d.sum(), dt, "raised-cosine", float(symbol_rate_gbd))

    @classmethod
    def from_signal(cls, signal, n_bins=8192):
        """Periodogram of a waveform, averaged down to ``n_bins`` bins.

        The frequency range is widened with empty bins when needed so that
        the cubed field (three times the occupied band) is not aliased.
        """
        x = signal.samples
        n = x.size
        dens = np.abs(np.fft.fft(x)) ** 2 / n**2
        dt = signal.sample_period
        if n > n_bins:
            if n % n_bins:
                raise ValueError("n_bins must divide the signal length")
            group = n // n_bins
            # coarser frequency resolution over the same range; groups centred on DC
            shifted = np.roll(np.fft.fftshift(dens), group // 2)
            dens = np.fft.ifftshift(shifted.reshape(n_bins, group).sum(axis=1))
            n = n_bins
        acf = cls(dens, dt, "measured")
        f = np.abs(acf.freq())
        occupied = f[dens > 1e-10 * dens.max()].max()
        fs = 1e3 / dt
        pad = 1
        while pad * fs < 6.0 * occupied:
            pad *= 2
        if pad > 1:
            acf = acf.padded(pad)
        acf.bandwidth_3db = acf._measure_bandwidth()
        return acf

    def padded(self, factor):
        """Same spectrum on a ``factor`` times wider frequency range."""
        shifted = np.fft.fftshift(self.density)
        extra = self.n * (factor - 1)
        wide = np.pad(shifted, (extra // 2, extra - extra // 2))
        return Autocorrelation(np.fft.ifftshift(wide), self.sample_period / factor, self.kind,
                               self.bandwidth_3db)


def gaussian_bandwidth(sigma):
    """3-dB bandwidth (GHz) of the spectrum ``exp(-w^2/(2 sigma^2))``."""
    return math.sqrt(2.0 * math.log(2.0)) * sigma / math.pi * 1e3


def gaussian_sigma(bandwidth_ghz):
    return bandwidth_ghz * 1e-3 * math.pi / math.sqrt(2.0 * math.log(2.0))


# -------------------------------------------------------------- kernels
def _kernel(acf, b2, b3=0.0, chunk=32):
    """``[D^-1 N D rho]_{m=0}`` for arrays of accumulated dispersion."""
    b2 = np.atleast_1d(np.asarray(b2, dtype=float))
    b3 = np.broadcast_to(np.asarray(b3, dtype=float), b2.shape)
    w = angular_frequency(acf.n, acf.sample_period)
    out = np.empty(b2.shape, dtype=complex)
    n = acf.n
    flat_b2, flat_b3, flat_out = b2.ravel(), b3.ravel(), out.reshape(-1)
    for s in range(0, flat_b2.size, chunk):
        phase = 0.5 * np.outer(flat_b2[s:s + chunk], w**2)
        if np.any(flat_b3[s:s + chunk]):
            phase += np.outer(flat_b3[s:s + chunk], w**3) / 6.0
        d = np.exp(-1j * phase)
        r = n * np.fft.ifft(acf.density * d, axis=1)
        y = np.fft.fft((r.real**2 + r.imag**2) * r, axis=1)
        flat_out[s:s + chunk] = np.sum(y * d.conj(), axis=1) / n
    return out


def srf_uniform(acf, beta2, z):
    """Spatial response ``g(z)`` for constant ``beta2`` (ps^2/km).

    ``g(z_k - z) = G(z_k, z)``; raw scale, ``g(0) = rho_0^3``.
    """
    if not isinstance(acf, Autocorrelation):
        raise TypeError("acf must be an Autocorrelation")
    z = np.asarray(z, dtype=float)
    out = _kernel(acf, -beta2 * z)
    return complex(out[0]) if z.ndim == 0 else out.reshape(z.shape)


def srf_general(acf, link, z_k, z):
    """Kernel ``G(z_k, z)`` for an arbitrary dispersion map."""
    b2, b3 = accumulated_dispersion(link, z_k, z)
    out = _kernel(acf, b2, b3)
    return complex(out[0]) if np.ndim(b2) == 0 else out.reshape(np.shape(b2))


def srf_gaussian(z, beta2, sigma):
    """Closed-form kernel for a Gaussian spectrum: the inverse square root of
    a complex Lorentzian, ``1/sqrt(1 + 2j s + 3 s^2)`` with ``s = z / z_CD``.

    ``s`` carries the sign of ``beta2``, so for anomalous dispersion the
    imaginary part is odd with the sign matching :func:`srf_uniform`.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    z_cd = 1.0 / (abs(beta2) * sigma**2)
    s = np.sign(beta2) * np.asarray(z, dtype=float) / z_cd
    out = 1.0 / np.sqrt(1.0 + 2j * s + 3.0 * s**2)
    return complex(out) if np.ndim(out) == 0 else out


def dispersion_length(beta2, sigma):
    return 1.0 / (abs(beta2) * sigma**2)


# --------------------------------------------------------- curves, FWHM
@dataclass
class SrfCurve:
    offsets: np.ndarray  # km
    values: np.ndarray  # complex, normalized to g(0) = 1
    kind: str = "measured"
    bandwidth_3db: float | None = None  # GHz
    beta2: float | None = None  # ps^2/km
    normalization: complex = 1.0  # g(0) before normalization
    meta: dict = field(default_factory=dict)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(f"# spectrum_kind: {self.kind}\n")
            fh.write(f"# bandwidth_3db_ghz: {self.bandwidth_3db!r}\n")
            fh.write(f"# beta2_ps2_per_km: {self.beta2!r}\n")
            fh.write(f"# normalization: {complex(self.normalization)!r}\n")
            writer = csv.writer(fh)
            writer.writerow(["z_km", "re_g", "im_g"])
            for z, g in zip(self.offsets, self.values):
                writer.writerow([repr(float(z)), repr(float(g.real)), repr(float(g.imag))])

    @classmethod
    def from_csv(cls, path):
        header, rows = {}, []
        with open(path) as fh:
            lines = fh.read().splitlines()
        body = []
        for line in lines:
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                header[key.strip()] = val.strip()
            else:
                body.append(line)
        for r in csv.DictReader(body):
            rows.append((float(r["z_km"]), complex(float(r["re_g"]), float(r["im_g"]))))
        z, g = zip(*rows)

        def num(key, cast=float):
            v = header.get(key, "None")
            return None if v == "None" else cast(v)

        return cls(np.array(z), np.array(g), header.get("spectrum_kind", "measured"),
                   num("bandwidth_3db_ghz"), num("beta2_ps2_per_km"), num("normalization", complex))


def srf_curve(acf, beta2, offsets):
    """Sample ``g`` on ``offsets`` (km) and normalize to ``g(0) = 1``."""
    offsets = np.asarray(offsets, dtype=float)
    g0 = srf_uniform(acf, beta2, 0.0)
    values = srf_uniform(acf, beta2, offsets) / g0
    return SrfCurve(offsets, values, acf.kind, acf.bandwidth_3db, beta2, g0)


def fwhm(curve):
    """Full width at half maximum of ``Re g`` (linear interpolation).

    Accepts an :class:`SrfCurve` or an ``(offsets, values)`` pair.
    """
    if isinstance(curve, SrfCurve):
        z, g = curve.offsets, np.real(curve.values)
    else:
        z, g = np.asarray(curve[0], dtype=float), np.real(np.asarray(curve[1]))
    order = np.argsort(z)
    z, g = z[order], g[order]
    i0 = int(np.argmin(np.abs(z)))
    half = 0.5 * g[i0]

    def crossing(indices):
        prev = i0
        for i in indices:
            if g[i] < half:
                t = (g[prev] - half) / (g[prev] - g[i])
                return z[prev] + t * (z[i] - z[prev])
            prev = i
        raise ValueError("half maximum not reached within the sampled range")

    right = crossing(range(i0 + 1, z.size))
    left = crossing(range(i0 - 1, -1, -1))
    return float(right - left)


def sr_closed_form(beta2, bw_3db, kind="rectangular"):
    """Closed-form spatial resolution (km) for ``bw_3db`` in GHz."""
    if beta2 == 0:
        raise ValueError("beta2 = 0: no dispersion, the resolution is unbounded")
    if not bw_3db > 0:
        raise ValueError("bandwidth must be positive")
    coeff = {"gaussian": GAUSSIAN_SR_COEFF, "rectangular": RECTANGULAR_SR_COEFF}[kind]
    return coeff / (abs(beta2) * (bw_3db * 1e-3) ** 2)


def numeric_sr(acf, beta2, resolution=100):
    """FWHM of ``Re g`` for ``acf``, sampled at ``SR/resolution`` or finer."""
    guess = sr_closed_form(beta2, acf.bandwidth_3db, "rectangular")
    for _ in range(8):
        step = 0.95 * guess / resolution
        offsets = step * np.arange(-2 * resolution, 2 * resolution + 1)
        try:
            sr = fwhm(srf_curve(acf, beta2, offsets))
        except ValueError:
            guess *= 2.0
            continue
        if step <= sr / resolution:
            return sr
        guess = sr
    raise ValueError("could not bracket the half maximum")


# ------------------------------------------------------------ predictions
class KernelTable:
    """``G`` tabulated against accumulated ``B2`` (``beta3 = 0`` links)."""

    def __init__(self, acf, b2_max, step=None):
        bw = acf.bandwidth_3db * 1e-3  # THz
        step = step or 0.02 / bw**2
        count = int(math.ceil(b2_max / step)) + 2
        grid = step * np.arange(-count, count + 1)
        vals = _kernel(acf, grid)
        self._re = CubicSpline(grid, vals.real)
        self._im = CubicSpline(grid, vals.imag)
        self.b2_max = grid[-1]

    def __call__(self, b2):
        return self._re(b2) + 1j * self._im(b2)

    def real(self, b2):
        return self._re(b2)


def quadrature_nodes(link, step):
    """Composite-midpoint nodes and weights with breakpoints as cell edges."""
    pts = link.breakpoints()
    nodes, weights = [], []
    for a, b in zip(pts[:-1], pts[1:]):
        m = max(1, math.ceil((b - a) / step - 1e-9))
        h = (b - a) / m
        nodes.append(a + h * (np.arange(m) + 0.5))
        weights.append(np.full(m, h))
    return np.concatenate(nodes), np.concatenate(weights)


def _gamma_fn(gamma_true, link):
    if gamma_true is None:
        return lambda z: gamma_prime_at(link, z)
    return gamma_true


def _quad_step(acf, link, step):
    if step is not None:
        return step
    b2 = max(abs(s.beta2) for s in link.spans)
    sr = sr_closed_form(b2, acf.bandwidth_3db, "rectangular") if b2 else 1.0
    return min(0.1, sr / 20.0)


def kernel_convolution(gamma_true, link, positions, *, acf, step=None):
    """``integral_0^L gamma'(z) Re G(z_k, z) dz`` for every ``z_k`` in ``positions``.

    Positions may lie outside the link when the dispersion is uniform (the
    kernel then depends on ``z_k - z`` only).
    """
    if link.dispersion_managed:
        raise DispersionManagedError("dispersion-managed link")
    acf = acf.normalized()
    gamma = _gamma_fn(gamma_true, link)
    h = _quad_step(acf, link, step)
    zq, wq = quadrature_nodes(link, h)
    weight = np.asarray(gamma(zq), dtype=float) * wq
    positions = np.asarray(positions, dtype=float)
    if link.uniform_dispersion:
        s = link.spans[0]
        b2 = s.beta2 * (zq[None, :] - positions[:, None])
        b3 = s.beta3 * (zq[None, :] - positions[:, None])
    else:
        b2, b3 = accumulated_dispersion(link, positions[:, None], zq[None, :])
    if np.any(b3):
        kern = _kernel(acf, b2, b3).real
    else:
        table = KernelTable(acf, float(np.max(np.abs(b2))))
        kern = table.real(b2)
    return kern @ weight


def predict_cm(gamma_true, link, grid, epsilon=0.01, variant="modified", *, acf, step=None):
    """Predicted correlation-method profile.

    ``modified``: ``2 (gamma' * Re G)(z_k)``; ``original``: the same scaled
    by ``epsilon`` on top of the unit signal power.
    """
    if variant not in ("original", "modified"):
        raise ValueError(f"unknown variant {variant!r}")
    conv = kernel_convolution(gamma_true, link, grid.positions, acf=acf, step=step)
    if variant == "modified":
        values = 2.0 * conv
        eps = None
    else:
        values = 1.0 + 2.0 * epsilon * conv
        eps = epsilon
    return PowerProfile(grid, values, "PREDICTED", epsilon=eps, meta={"variant": variant})


def predict_mmse(gamma_true, link, grid, reg=1e-6, *, acf, step=None, pad_sr=10.0):
    """Predicted least-squares profile by regularized Fourier deconvolution.

    The continuous convolution ``b = gamma' * Re g`` is evaluated on the grid
    extended by ``pad_sr`` spatial resolutions on both sides, then divided by
    the DFT of the sampled kernel (Tikhonov-damped with
    ``reg * max|G|^2``) and scaled by ``1/dz``.
    """
    if not link.uniform_dispersion:
        raise ConfigError("Fourier deconvolution needs a uniform dispersion map; use mmse_profile")
    if link.dispersion_managed:
        raise DispersionManagedError("dispersion-managed link")
    acf = acf.normalized()
    beta2 = link.spans[0].beta2
    dz = grid.delta_z
    sr = numeric_sr(acf, beta2)
    pad = int(math.ceil(pad_sr * sr / dz))
    k = len(grid)
    total = k + 2 * pad
    z_ext = grid.positions[0] + dz * np.arange(-pad, k + pad)
    b = kernel_convolution(gamma_true, link, z_ext, acf=acf, step=step)
    lags = dz * np.fft.fftfreq(total, d=1.0 / total)  # circular offsets
    table = KernelTable(acf, abs(beta2) * np.max(np.abs(lags)))
    g = np.fft.fft(table.real(-beta2 * lags))
    lam = reg * np.max(np.abs(g) ** 2)
    x = np.fft.ifft(np.fft.fft(b) * g.conj() / (np.abs(g) ** 2 + lam)).real / dz
    return PowerProfile(
        grid, x[pad:pad + k], "PREDICTED", reg=reg,
        meta={"variant": "mmse", "sr_km": sr, "pad_nodes": pad},
    )
