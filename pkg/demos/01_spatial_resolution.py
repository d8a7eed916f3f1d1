"""How sharply can a correlation estimate locate a loss event?

The smoothing kernel depends only on the signal spectrum and the fiber
dispersion. Its width shrinks with the square of the bandwidth.
"""
import numpy as np

from fiberppe.theory import (
    Autocorrelation,
    dispersion_length,
    fwhm,
    gaussian_bandwidth,
    numeric_sr,
    sr_closed_form,
    srf_curve,
    srf_gaussian,
)

beta2 = -20.55  # standard single-mode fiber, ps^2/km

# rectangular spectra: numeric width against the closed form
print("bandwidth  numeric SR  closed form")
for bw in (32.0, 64.0, 128.0, 256.0):
    sr = numeric_sr(Autocorrelation.rectangular(bw), beta2)
    print(f"{bw:6.0f} GHz  {sr:8.3f} km  {sr_closed_form(beta2, bw):8.3f} km")

# Gaussian spectrum: the kernel has a closed form in units of z_CD
sigma = 0.5
zcd = dispersion_length(beta2, sigma)
z = np.linspace(-3 * zcd, 3 * zcd, 6001)
w = fwhm((z, srf_gaussian(z, beta2, sigma)))
print(f"\nGaussian sigma={sigma}: FWHM = {w / zcd:.3f} z_CD, "
      f"BW = {gaussian_bandwidth(sigma):.1f} GHz")

# shape of the rectangular kernel at 128 GHz
curve = srf_curve(Autocorrelation.rectangular(128.0), beta2, np.linspace(-3, 3, 13))
for off, g in zip(curve.offsets, curve.values):
    print(f"{off:5.1f} km  Re g = {g.real:+.3f}  Im g = {g.imag:+.3f}")
