"""Power profile estimators: correlation (CM, modified CM) and least squares.

All three compare the received field with references built by propagating
the known transmit waveform through a digital twin of the link. Correlations
are zero-lag sample means over the full cyclic block.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DispersionManagedError, SingularSystemError
from .fibersim import _check_positions, accumulated_dispersion, gamma_prime_at
from .perturb import PerturbationModel
from .signalgen import ComplexSignal

METHODS = ("CM", "mCM", "MMSE", "TRUE", "PREDICTED")
CSV_COLUMNS = (
    "z_km",
    "gamma_prime_per_km",
    "power_w",
    "power_dbm",
    "method",
    "epsilon",
    "reg",
    "n_samples",
    "cond_M",
)


@dataclass
class EstimationGrid:
    """Uniformly spaced measurement positions (km)."""

    positions: np.ndarray
    delta_z: float

    def __post_init__(self):
        self.positions = np.atleast_1d(np.asarray(self.positions, dtype=float))
        if self.positions.size < 1:
            raise ValueError("grid needs at least one position")
        if not self.delta_z > 0:
            raise ValueError("delta_z must be positive")
        if self.positions.size > 1:
            steps = np.diff(self.positions)
            if not np.allclose(steps, self.delta_z, rtol=1e-9, atol=1e-9):
                raise ValueError("grid positions must be uniformly spaced by delta_z")

    @classmethod
    def uniform(cls, length, delta_z, start=0.0):
        if not delta_z > 0:
            raise ValueError("delta_z must be positive")
        count = int(math.floor((length - start) / delta_z + 1e-9)) + 1
        return cls(start + delta_z * np.arange(count), delta_z)

    def __len__(self):
        return self.positions.size


@dataclass
class PowerProfile:
    """Estimated (or reference) nonlinear weight per grid position, 1/km."""

    grid: EstimationGrid
    values: np.ndarray
    method: str
    epsilon: float | None = None
    reg: float | None = None
    n_samples: int | None = None
    cond_M: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.values.shape != self.grid.positions.shape:
            raise ValueError("one value per grid position expected")

    @property
    def positions(self):
        return self.grid.positions

    @property
    def absolute(self):
        """Whether values estimate gamma'(z) itself (not a smoothed proxy)."""
        if self.method in ("MMSE", "TRUE"):
            return True
        return self.method == "PREDICTED" and self.meta.get("variant") == "mmse"

    def power_w(self, link):
        return self.values / link.gamma_at(self.positions)

    def power_dbm(self, link):
        p = self.power_w(link)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(p > 0, 10.0 * np.log10(p * 1e3), np.nan)

    def to_csv(self, path, link):
        """Write the profile as CSV; power columns are left empty for CM outputs."""
        pw = self.power_w(link) if self.absolute else np.full(self.values.shape, np.nan)
        with np.errstate(divide="ignore", invalid="ignore"):
            dbm = np.where(pw > 0, 10.0 * np.log10(pw * 1e3), np.nan)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for z, v, p, d in zip(self.positions, self.values, pw, dbm):
                writer.writerow(
                    [
                        _fmt(z),
                        _fmt(v),
                        _fmt(p),
                        _fmt(d),
                        self.method,
                        _fmt(self.epsilon),
                        _fmt(self.reg),
                        "" if self.n_samples is None else int(self.n_samples),
                        _fmt(self.cond_M),
                    ]
                )

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: empty profile")
        z = np.array([float(r["z_km"]) for r in rows])
        dz = float(z[1] - z[0]) if z.size > 1 else 1.0
        first = rows[0]

        def opt(key, cast=float):
            return cast(first[key]) if first[key] != "" else None

        return cls(
            EstimationGrid(z, dz),
            [float(r["gamma_prime_per_km"]) for r in rows],
            first["method"],
            epsilon=opt("epsilon"),
            reg=opt("reg"),
            n_samples=opt("n_samples", int),
            cond_M=opt("cond_M"),
        )


def _fmt(x):
    if x is None:
        return ""
    x = float(x)
    if not np.isfinite(x):
        return "" if np.isnan(x) else repr(x)
    return repr(x)


def true_profile(link, grid):
    return PowerProfile(grid, gamma_prime_at(link, grid.positions), "TRUE")


# ------------------------------------------------------------- correlation
def _samples(x):
    return x.samples if isinstance(x, ComplexSignal) else np.asarray(x)


def xcorr0(a, b):
    """Zero-lag cross-correlation ``mean(a[n] * conj(b[n]))``."""
    a, b = _samples(a), _samples(b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(b, a) / a.size)


def _xcorr0_spec(a_spec, b_spec):
    # Parseval with the unnormalized forward FFT
    n = a_spec.shape[-1]
    return np.vdot(b_spec, a_spec) / n**2


def align_phase(rx, reference):
    """Rotate ``rx`` by the scalar phase that maximizes ``Re xcorr0(rx, reference)``."""
    theta = -np.angle(xcorr0(rx, reference))
    out = rx.replace(rx.samples * np.exp(1j * theta))
    out.meta["phase_alignment_rad"] = float(theta)
    return out


def _prepare(rx, tx, twin, grid, allow_dispersion_managed, model, align):
    if twin.dispersion_managed and not allow_dispersion_managed:
        raise DispersionManagedError(
            "twin link mixes opposite-sign dispersion; the profile is not identifiable"
        )
    if len(rx) != len(tx):
        raise ValueError("rx and tx must share the sample grid")
    _check_positions(twin, grid.positions)
    model = model or PerturbationModel(tx, twin)
    lin = model.linear_spectrum()
    rx_spec = np.fft.fft(rx.samples)
    if align:
        rho = _xcorr0_spec(rx_spec, lin)
        rx_spec = rx_spec * np.exp(-1j * np.angle(rho))
    return model, lin, rx_spec


def cm_profile(rx, tx, twin, grid, epsilon=0.01, *, model=None, align=True,
               allow_dispersion_managed=False):
    """Original correlation method.

    The reference for position ``z_k`` is ``D(z_k->L) exp(-j eps |U|^2) U``
    with ``U = D(0->z_k) tx``; the estimate is the real part of its zero-lag
    correlation with the (phase-aligned) received field.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    model, _, rx_spec = _prepare(rx, tx, twin, grid, allow_dispersion_managed, model, align)
    values = np.empty(len(grid))
    for k, z in enumerate(grid.positions):
        u = model.dispersed(z)
        ref = np.fft.fft(u * np.exp(-1j * epsilon * (u.real**2 + u.imag**2)))
        b2, b3 = accumulated_dispersion(twin, z, twin.length)
        ref *= model._cd(b2, b3)
        values[k] = _xcorr0_spec(rx_spec, ref).real
    return PowerProfile(grid, values, "CM", epsilon=epsilon, n_samples=len(rx))


def mcm_profile(rx, tx, twin, grid, *, model=None, align=True, allow_dispersion_managed=False):
    """Modified correlation method: ``Re xcorr0(rx, du_{z_k})`` per position.

    The raw correlation is returned; for a stationary Gaussian input it
    equals ``2 * integral gamma'(z) Re G(z_k, z) dz``.
    """
    model, _, rx_spec = _prepare(rx, tx, twin, grid, allow_dispersion_managed, model, align)
    values = np.array([_xcorr0_spec(rx_spec, model.partial_spectrum(z)).real for z in grid.positions])
    return PowerProfile(grid, values, "mCM", n_samples=len(rx))


def normal_equations(rx, tx, twin, grid, *, model=None, align=True, allow_dispersion_managed=False,
                     phase_nuisance=False):
    """Least-squares normal matrix ``M``, right-hand side ``v`` and residual energy.

    ``M[k, i] = Re xcorr0(du_i, du_k) dz^2``, ``v[k] = Re xcorr0(rx - U, du_k) dz``
    and ``c0 = mean |rx - U|^2``, so the fit cost of weights ``x`` is
    ``c0 - 2 x.v + x.M.x``.

    With ``phase_nuisance`` the regressor ``j U`` (a small common phase
    rotation of the linear path) is added and eliminated, i.e. the returned
    quantities are its Schur complement and the cost is already minimized
    over that phase. For Gaussian inputs ``j U`` is uncorrelated with every
    partial path and nothing changes; for formats whose fourth moment
    differs from the Gaussian one near the transmitter it removes the bias
    left by aligning on the linear path alone.
    """
    model, lin, rx_spec = _prepare(rx, tx, twin, grid, allow_dispersion_managed, model, align)
    dz = grid.delta_z
    n = model.n
    basis = model.partial_matrix(grid.positions)
    gram = basis @ basis.conj().T
    m = gram.real * (dz**2 / n**2)
    m = 0.5 * (m + m.T)
    resid = rx_spec - lin
    v = (basis.conj() @ resid).real * (dz / n**2)
    c0 = float(np.vdot(resid, resid).real / n**2)
    if phase_nuisance:
        q = 1j * lin
        w = (basis.conj() @ q).real * (dz / n**2)
        s = float(np.vdot(q, q).real / n**2)
        r = float(np.vdot(q, resid).real / n**2)
        m = m - np.outer(w, w) / s
        v = v - w * (r / s)
        c0 = c0 - r * r / s
    return m, v, c0


def fit_cost(values, m, v, c0):
    """Sample mean-square mismatch between rx and the twin output for ``values``."""
    x = np.asarray(values, dtype=float)
    return float(c0 - 2.0 * x @ v + x @ m @ x)


def mmse_profile(rx, tx, twin, grid, reg=1e-6, *, model=None, align=True,
                 allow_dispersion_managed=False, phase_nuisance=True):
    """Linear least-squares estimate of ``gamma'`` on the grid.

    Solves ``(M + reg * tr(M)/K * I) x = v``; the condition number of the
    unloaded ``M`` is stored in ``cond_M``. A residual common phase is
    fitted alongside by default (see `normal_equations`).
    """
    if reg < 0:
        raise ValueError("reg must be non-negative")
    m, v, c0 = normal_equations(
        rx, tx, twin, grid, model=model, align=align,
        allow_dispersion_managed=allow_dispersion_managed, phase_nuisance=phase_nuisance,
    )
    k = m.shape[0]
    cond = float(np.linalg.cond(m))
    loaded = m + (reg * np.trace(m) / k) * np.eye(k)
    cond_loaded = np.linalg.cond(loaded)
    if not np.isfinite(cond_loaded) or cond_loaded * np.finfo(float).eps > 1e-3:
        raise SingularSystemError(
            f"normal matrix is numerically singular (cond {cond_loaded:.3g} after loading)"
        )
    x = scipy.linalg.solve(loaded, v, assume_a="pos")
    return PowerProfile(
        grid, x, "MMSE", reg=reg, n_samples=len(rx), cond_M=cond,
        meta={
            "cost": fit_cost(x, m, v, c0),
            "cond_loaded": float(cond_loaded),
            "phase_nuisance": bool(phase_nuisance),
        },
    )


# ---------------------------------------------------------------- analysis
def monte_carlo_floor(n):
    """Four standard errors of a unit-variance sample mean over ``n`` samples."""
    return 4.0 / math.sqrt(n)


def batch_standard_error(series, batches=32):
    """Standard error of the mean of a correlated series by non-overlapping batch means."""
    x = np.asarray(series)
    if batches < 2 or x.shape[-1] < batches:
        raise ValueError("need at least two batches of one sample")
    usable = x.shape[-1] - x.shape[-1] % batches
    means = x[..., :usable].reshape(*x.shape[:-1], batches, -1).mean(axis=-1)
    return means.std(axis=-1, ddof=1) / math.sqrt(batches)


def mcm_standard_error(rx, tx, twin, grid, *, batches=32, model=None, align=True,
                       allow_dispersion_managed=False):
    """Batch-means standard error of each mCM value."""
    model, _, rx_spec = _prepare(rx, tx, twin, grid, allow_dispersion_managed, model, align)
    r = np.fft.ifft(rx_spec)
    out = np.empty(len(grid))
    for k, z in enumerate(grid.positions):
        du = np.fft.ifft(model.partial_spectrum(z))
        out[k] = batch_standard_error((r * du.conj()).real, batches)
    return out


def mmse_standard_error(rx, tx, twin, grid, reg=1e-6, *, batches=16, model=None, align=True,
                        allow_dispersion_managed=False, phase_nuisance=True):
    """Batch standard error of the least-squares profile.

    The block is cut into ``batches`` contiguous pieces, the normal equations
    are solved on each piece and the spread of the solutions is scaled by
    ``1/sqrt(batches)``. Partial paths are transformed to the time domain one
    at a time, so the model cache is left untouched.
    """
    model, lin, rx_spec = _prepare(rx, tx, twin, grid, allow_dispersion_managed, model, align)
    n = model.n
    size = n // batches
    if size < 1:
        raise ValueError("more batches than samples")
    resid = np.fft.ifft(rx_spec - lin)
    u = np.fft.ifft(lin)
    dz = grid.delta_z
    k = len(grid)
    gram = np.zeros((batches, k, k))
    rhs = np.zeros((batches, k))
    rows = np.empty((k, batches * size), dtype=np.complex128)
    for i, z in enumerate(grid.positions):
        rows[i] = np.fft.ifft(model.partial_spectrum(z))[: batches * size]
    for b in range(batches):
        seg = rows[:, b * size:(b + 1) * size]
        gram[b] = (seg @ seg.conj().T).real * (dz**2 / size)
        piece = resid[b * size:(b + 1) * size]
        rhs[b] = (seg.conj() @ piece).real * (dz / size)
        if phase_nuisance:
            q = 1j * u[b * size:(b + 1) * size]
            w = (seg.conj() @ q).real * (dz / size)
            sq = np.vdot(q, q).real / size
            gram[b] -= np.outer(w, w) / sq
            rhs[b] -= w * (np.vdot(q, piece).real / size / sq)
    sols = np.empty((batches, k))
    for b in range(batches):
        m = 0.5 * (gram[b] + gram[b].T)
        m += (reg * np.trace(m) / k) * np.eye(k)
        sols[b] = scipy.linalg.solve(m, rhs[b], assume_a="pos")
    return sols.std(axis=0, ddof=1) / math.sqrt(batches)


def step_loss_db(profile, link, position, fit_span=15.0, margin=None):
    """Estimate a point loss from a profile by straight-line fits in dB.

    Lines are fitted to the dBm profile on ``[position - fit_span, position
    - margin)`` and ``[position + margin, position + fit_span]`` and both are
    extrapolated to ``position``. Returns ``(loss_db, power_before_dbm)``.
    """
    margin = profile.grid.delta_z if margin is None else margin
    z = profile.positions
    p = profile.power_dbm(link)
    left = (z >= position - fit_span) & (z < position - margin + 1e-9)
    right = (z > position + margin - 1e-9) & (z <= position + fit_span)
    if left.sum() < 2 or right.sum() < 2:
        raise ValueError("not enough grid points around the event for a fit")
    before = np.polyval(np.polyfit(z[left], p[left], 1), position)
    after = np.polyval(np.polyfit(z[right], p[right], 1), position)
    return float(before - after), float(before)


def interior_mask(grid, link, guard=None):
    """Positions farther than ``guard`` (default one grid step) from any breakpoint."""
    guard = grid.delta_z if guard is None else guard
    d = np.min(np.abs(grid.positions[:, None] - link.breakpoints()[None, :]), axis=1)
    return d > guard + 1e-9
