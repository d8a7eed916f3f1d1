"""Monte-Carlo oracles for circular-Gaussian moment and LTI correlation identities.

Both checks are seeded and self-contained; they validate the statistical
steps the kernel derivations rely on, independently of the simulator.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

MAX_ORDER = 4


@dataclass
class MomentCheckReport:
    """Monte-Carlo moment against its pairing-sum prediction."""

    k: int
    lhs: complex
    rhs: complex
    n_samples: int
    std_error: float

    @property
    def deviation(self):
        return abs(self.lhs - self.rhs)

    @property
    def passed(self):
        return self.deviation <= 4.0 * self.std_error

    def as_dict(self):
        return {
            "k": self.k,
            "lhs_re": self.lhs.real,
            "lhs_im": self.lhs.imag,
            "rhs_re": self.rhs.real,
            "rhs_im": self.rhs.imag,
            "n_samples": self.n_samples,
            "std_error": self.std_error,
            "passed": self.passed,
        }


def _check_covariance(cov, k):
    cov = np.asarray(cov, dtype=complex)
    if cov.shape != (2 * k, 2 * k):
        raise ValueError(f"covariance must be {2 * k}x{2 * k} for k={k}, got {cov.shape}")
    if not np.allclose(cov, cov.conj().T, atol=1e-12 * max(1.0, np.abs(cov).max())):
        raise ValueError("covariance is not Hermitian")
    evals, evecs = np.linalg.eigh(cov)
    if evals.min() < -1e-10 * max(evals.max(), 1e-300):
        raise ValueError("covariance is not positive semi-definite")
    return cov, evecs * np.sqrt(np.clip(evals, 0.0, None))


def covariance_spec(kind, k, rho=0.5):
    """Covariance of ``(U_1..U_k, V_1..V_k)`` for a few named cases.

    ``identical``: every variable is the same unit-variance U (rank one).
    ``independent``: U's and V's independent unit variables.
    ``correlated``: all pairs share correlation ``rho``.
    """
    m = 2 * k
    if kind == "identical":
        return np.ones((m, m), dtype=complex)
    if kind == "independent":
        return np.eye(m, dtype=complex)
    if kind == "correlated":
        c = np.full((m, m), rho, dtype=complex)
        np.fill_diagonal(c, 1.0)
        return c
    raise ValueError(f"unknown covariance kind {kind!r}")


def random_covariance(k, seed, rank=None):
    """Random unit-diagonal Hermitian PSD covariance of size ``2k``."""
    rng = np.random.default_rng(seed)
    m = 2 * k
    r = m if rank is None else int(rank)
    g = rng.standard_normal((m, r)) + 1j * rng.standard_normal((m, r))
    c = g @ g.conj().T
    d = 1.0 / np.sqrt(np.real(np.diag(c)))
    return c * d[:, None] * d[None, :]


def pairing_sum(cov, k):
    """``sum_pi prod_i E[U_i V_pi(i)^*]`` over all permutations ``pi``."""
    cov = np.asarray(cov, dtype=complex)
    total = 0j
    for perm in itertools.permutations(range(k)):
        term = 1.0 + 0j
        for i, j in enumerate(perm):
            term *= cov[i, k + j]
        total += term
    return complex(total)


def gaussian_moment_identity(k, cov_spec, n, seed):
    """Compare ``E[U_1..U_k V_1^*..V_k^*]`` with its pairing sum.

    Parameters
    ----------
    k : int
        Moment order, 1 to 4.
    cov_spec : array_like or str
        ``2k x 2k`` covariance of the jointly circular vector
        ``(U_1..U_k, V_1..V_k)``, or a name accepted by `covariance_spec`.
    n : int
        Number of Monte-Carlo draws.
    seed : int

    Returns
    -------
    MomentCheckReport
    """
    k = int(k)
    if not 1 <= k <= MAX_ORDER:
        raise ValueError(f"moment order must be in 1..{MAX_ORDER}, got {k}")
    if isinstance(cov_spec, str):
        cov_spec = covariance_spec(cov_spec, k)
    cov, factor = _check_covariance(cov_spec, k)
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((2 * k, n)) + 1j * rng.standard_normal((2 * k, n))) / math.sqrt(2.0)
    x = factor @ z
    prod = np.prod(x[:k], axis=0) * np.prod(x[k:].conj(), axis=0)
    lhs = complex(prod.mean())
    spread = np.sqrt(np.mean(np.abs(prod - lhs) ** 2))
    return MomentCheckReport(k, lhs, pairing_sum(cov, k), int(n), float(spread / math.sqrt(n)))


# ------------------------------------------------------------------- LTI
def gaussian_pair(spectrum, seed, coherence=1.0):
    """Stationary circular Gaussian pair on the circle.

    Both signals have power per bin ``|spectrum|``; their cross-spectrum is
    ``coherence * spectrum``. Returns time-domain arrays with
    ``rho_m = n * ifft(density)[m]``.
    """
    s = np.asarray(spectrum, dtype=complex)
    if s.size == 0:
        raise ValueError("empty spectrum")
    if not 0.0 <= abs(coherence) <= 1.0:
        raise ValueError("|coherence| must not exceed one")
    n = s.size
    mag = np.abs(s)
    phase = np.where(mag > 0, s / np.where(mag > 0, mag, 1.0), 1.0)
    rng = np.random.default_rng(seed)
    z1 = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2.0)
    z2 = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2.0)
    c = complex(coherence)
    amp = np.sqrt(mag)
    a_spec = amp * z1
    b_spec = amp * (np.conj(c * phase) * z1 + math.sqrt(1.0 - abs(c) ** 2) * z2)
    return n * np.fft.ifft(a_spec), n * np.fft.ifft(b_spec)


def sample_xcorr(a, b):
    """Circular ``rho_m[a, b] = mean_n a[n+m] b^*[n]`` for every lag."""
    return np.fft.ifft(np.fft.fft(a) * np.conj(np.fft.fft(b))) / a.size


def xcorr_floor(spectrum):
    """Four standard deviations of one sample cross-correlation lag."""
    mag = np.abs(np.asarray(spectrum))
    return 4.0 * float(np.sqrt(np.sum(mag**2)))


def lti_xcorr_identity(spectrum, filter_h, filter_g, n=None, seed=0, *, coherence=1.0):
    """Largest deviation of a filtered sample cross-correlation from its prediction.

    A pair (A, B) with cross-spectrum ``coherence * spectrum`` is drawn, A is
    filtered by ``filter_h`` and B by ``filter_g`` (frequency responses, FFT
    ordering), and the sample ``rho_m[hA, gB]`` is compared at every lag with
    ``n * ifft(h conj(g) S_AB)``.
    """
    s = np.asarray(spectrum, dtype=complex)
    if s.size == 0:
        raise ValueError("empty spectrum")
    if n is not None and int(n) != s.size:
        raise ValueError(f"spectrum has {s.size} bins but n={n}")
    h = np.broadcast_to(np.asarray(filter_h, dtype=complex), s.shape)
    g = np.broadcast_to(np.asarray(filter_g, dtype=complex), s.shape)
    a, b = gaussian_pair(s, seed, coherence)
    fa = np.fft.ifft(np.fft.fft(a) * h)
    fb = np.fft.ifft(np.fft.fft(b) * g)
    measured = sample_xcorr(fa, fb)
    predicted = s.size * np.fft.ifft(h * np.conj(g) * coherence * s)
    return float(np.max(np.abs(measured - predicted)))


def cd_response(n, sample_period, b2, b3=0.0):
    """Dispersion all-pass ``exp(-j(w^2 B2/2 + w^3 B3/6))`` on an FFT grid."""
    w = 2.0 * np.pi * np.fft.fftfreq(n, d=sample_period)
    return np.exp(-1j * (0.5 * b2 * w**2 + b3 * w**3 / 6.0))
