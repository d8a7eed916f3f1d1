"""First-order enhanced regular perturbation (eRP1) model of a link.

The received field is approximated by a linear path plus a continuum of
partial nonlinear paths,

    A[L] ~ U[L] + integral gamma'(z) du_z[L] dz,
    du_z[L] = -j D(z->L) [(|U_z|^2 - 2 P_A) U_z],   U_z = D(0->z) A[0],

where D is the dispersion operator and the ``-2 P_A`` term removes the mean
Kerr phase.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .fibersim import _check_positions, accumulated_dispersion, angular_frequency, gamma_prime_at


@dataclass
class PerturbationPaths:
    linear: object  # ComplexSignal, U[L]
    partials: dict  # z (km) -> ComplexSignal, du_z[L]
    grid: object  # EstimationGrid


class PerturbationModel:
    """Linear and partial nonlinear paths of ``tx`` through ``link``.

    Partial paths are kept as FFT spectra (numpy ordering, unnormalized) and
    cached per position, since every estimator correlates against the same
    set. Insertion into the cache is guarded by a lock.
    """

    def __init__(self, tx, link):
        self.tx = tx
        self.link = link
        self.n = tx.samples.size
        self._w = angular_frequency(self.n, tx.sample_period)
        self._tx_spec = np.fft.fft(tx.samples)
        self._cache = {}
        self._lock = threading.Lock()
        self._b_total = accumulated_dispersion(link, 0.0, link.length)

    def _cd(self, b2, b3):
        phase = 0.5 * b2 * self._w**2
        if b3:
            phase = phase + b3 * self._w**3 / 6.0
        return np.exp(-1j * phase)

    def dispersed(self, z):
        """Time-domain ``U_z = D(0->z) A[0]``."""
        b2, b3 = accumulated_dispersion(self.link, 0.0, z)
        return np.fft.ifft(self._tx_spec * self._cd(b2, b3))

    def linear_spectrum(self):
        return self._tx_spec * self._cd(*self._b_total)

    def linear(self):
        return self.tx.replace(np.fft.ifft(self.linear_spectrum()))

    def _compute_partial(self, z):
        u = self.dispersed(z)
        p = u.real**2 + u.imag**2
        p_a = p.mean()
        spec = np.fft.fft((p - 2.0 * p_a) * u)
        b2, b3 = accumulated_dispersion(self.link, z, self.link.length)
        spec *= -1j * self._cd(b2, b3)
        return spec

    def partial_spectrum(self, z):
        key = round(float(z), 9)
        spec = self._cache.get(key)
        if spec is None:
            _check_positions(self.link, z)
            spec = self._compute_partial(key)
            with self._lock:
                spec = self._cache.setdefault(key, spec)
        return spec

    def partial(self, z):
        return self.tx.replace(np.fft.ifft(self.partial_spectrum(z)))

    def partial_matrix(self, positions):
        """Stack partial spectra row-wise.

        Cached rows are moved into the stacked array and the cache then
        references its rows, so memory is not duplicated.
        """
        positions = np.asarray(positions, dtype=float)
        out = np.empty((positions.size, self.n), dtype=np.complex128)
        for i, z in enumerate(positions):
            out[i] = self.partial_spectrum(z)
            with self._lock:
                self._cache[round(float(z), 9)] = out[i]
        return out

    def clear(self):
        with self._lock:
            self._cache.clear()

    def paths(self, grid):
        return PerturbationPaths(
            linear=self.linear(),
            partials={float(z): self.partial(z) for z in grid.positions},
            grid=grid,
        )


def linear_path(tx, link):
    """``U[L] = D(0->L) A[0]``."""
    return PerturbationModel(tx, link).linear()


def nonlinear_path(tx, link, z):
    """Partial nonlinear path ``du_z[L]`` for a unit nonlinear weight at ``z``."""
    return PerturbationModel(tx, link).partial(z)


def quadrature_weights(positions, length, rule="rectangle"):
    """Node weights discretizing an integral over [0, length].

    ``rectangle``: node k owns ``[z_k, z_{k+1})`` (the last node owns up to
    ``length``). ``trapezoid``: half-cells at the ends.
    """
    z = np.asarray(positions, dtype=float)
    if z.size == 0:
        raise ValueError("empty grid")
    if z.size == 1:
        return np.array([float(length)])
    upper = np.append(z[1:], length)
    if rule == "rectangle":
        return np.clip(upper - z, 0.0, None)
    if rule == "trapezoid":
        w = np.empty_like(z)
        w[1:-1] = 0.5 * (z[2:] - z[:-2])
        w[0] = 0.5 * (z[1] - z[0]) + z[0]
        w[-1] = 0.5 * (z[-1] - z[-2]) + (length - z[-1])
        return w
    raise ValueError(f"unknown quadrature rule {rule!r}")


def erp1_receive(tx, link, grid, *, weights=None, rule="rectangle", model=None):
    """First-order received field ``U + sum_k w_k du_{z_k}``.

    By default ``w_k = gamma'(z_k) * (quadrature weight)``; explicit
    ``weights`` replace the whole product (e.g. ``[eps]`` on a single-point
    grid gives the reference ``U + eps du_z``).
    """
    positions = np.asarray(grid.positions, dtype=float)
    if positions.size == 0:
        raise ValueError("empty grid")
    model = model or PerturbationModel(tx, link)
    if weights is None:
        weights = gamma_prime_at(link, positions) * quadrature_weights(positions, link.length, rule)
    weights = np.broadcast_to(np.asarray(weights, dtype=float), positions.shape)
    spec = model.linear_spectrum()
    for z, w in zip(positions, weights):
        if w:
            spec = spec + w * model.partial_spectrum(z)
    return tx.replace(np.fft.ifft(spec))
