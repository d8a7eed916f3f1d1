"""Config-driven experiment runner.

A config is a YAML mapping with the sections ``signal``, ``link``,
``propagation``, ``estimators``, ``theory_overlays`` and ``output_dir``;
the bundled files under ``fiberppe/configs`` are the reference examples.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError, DispersionManagedError
from .estimators import (
    EstimationGrid,
    cm_profile,
    mcm_profile,
    mmse_profile,
    true_profile,
)
from .fibersim import LinkSpec, PropagationConfig, ssm_propagate
from .perturb import PerturbationModel
from .signalgen import RNG_NAME, SymbolFormat, make_waveform
from .theory import Autocorrelation, numeric_sr, predict_cm, predict_mmse, srf_curve

log = logging.getLogger(__name__)

SECTIONS = {"name", "signal", "link", "propagation", "estimators", "theory_overlays",
            "output_dir", "allow_dispersion_managed"}
SIGNAL_KEYS = {"format", "entropy_bits", "symbol_rate", "rolloff", "samples_per_symbol",
               "n_symbols", "seed"}
ESTIMATOR_KEYS = {"method", "delta_z", "epsilon", "reg"}
OVERLAY_KEYS = {"predict_cm", "predict_mmse", "true_profile", "srf"}
METHOD_NAMES = {"cm": "CM", "mcm": "mCM", "mmse": "MMSE"}


def thread_limit():
    """Worker count from ``PPE_THREADS`` (default 1)."""
    raw = os.environ.get("PPE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"PPE_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


@dataclass
class SignalConfig:
    formats: list
    symbol_rate: float  # GBd
    samples_per_symbol: int
    n_symbols: int
    rolloff: float = 0.1
    seed: int = 0
    entropy_bits: float | None = None

    @property
    def n_samples(self):
        return self.n_symbols * self.samples_per_symbol


@dataclass
class EstimatorConfig:
    method: str
    delta_z: float
    epsilon: float = 0.01
    reg: float = 1e-6


@dataclass
class ExperimentConfig:
    signal: SignalConfig
    link: LinkSpec
    propagation: PropagationConfig
    estimators: list = field(default_factory=list)
    theory_overlays: dict = field(default_factory=dict)
    output_dir: str = "runs"
    name: str = "experiment"
    allow_dispersion_managed: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        n = self.signal.n_samples
        if n < 2 or n & (n - 1):
            raise ConfigError(
                f"n_symbols x samples_per_symbol must be a power of two, got {n}"
            )
        if self.signal.samples_per_symbol < 2:
            raise ConfigError("samples_per_symbol must be >= 2")
        if not self.signal.symbol_rate > 0:
            raise ConfigError("symbol_rate must be positive")
        overlays = {k for k, v in self.theory_overlays.items() if v}
        if not self.estimators and not overlays:
            raise ConfigError("config requests neither an estimator nor a theory overlay")
        for est in self.estimators:
            if not est.delta_z > 0:
                raise ConfigError(f"delta_z must be positive, got {est.delta_z}")
            if est.method == "CM" and not est.epsilon > 0:
                raise ConfigError("epsilon must be positive")
            if est.reg < 0:
                raise ConfigError("reg must be non-negative")
        if self.propagation.step > min(s.length for s in self.link.spans):
            raise ConfigError("propagation step exceeds the shortest span")
        if self.link.dispersion_managed and not self.allow_dispersion_managed:
            raise DispersionManagedError(
                "link mixes opposite-sign dispersion; set allow_dispersion_managed to run it"
            )

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        unknown = set(raw) - SECTIONS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("signal", "link"):
            if key not in raw:
                raise ConfigError(f"missing config section {key!r}")
        sig = dict(raw["signal"])
        bad = set(sig) - SIGNAL_KEYS
        if bad:
            raise ConfigError(f"unknown signal keys: {sorted(bad)}")
        formats = sig.pop("format", "Gaussian")
        formats = [formats] if isinstance(formats, str) else list(formats)
        try:
            for f in formats:
                SymbolFormat.parse(f, sig.get("entropy_bits") if "PCS" in f.upper() else None)
            signal = SignalConfig(formats=formats, **sig)
            link = LinkSpec.from_dict(raw["link"])
            prop = PropagationConfig(**(raw.get("propagation") or {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        ests = []
        for e in raw.get("estimators") or []:
            bad = set(e) - ESTIMATOR_KEYS
            if bad:
                raise ConfigError(f"unknown estimator keys: {sorted(bad)}")
            e = dict(e)
            method = METHOD_NAMES.get(str(e.get("method", "")).lower())
            if method is None:
                raise ConfigError(f"unknown estimator method {e.get('method')!r}")
            e["method"] = method
            if "delta_z" not in e:
                raise ConfigError("estimator needs delta_z")
            ests.append(EstimatorConfig(**e))
        overlays = dict(raw.get("theory_overlays") or {})
        bad = set(overlays) - OVERLAY_KEYS
        if bad:
            raise ConfigError(f"unknown theory overlays: {sorted(bad)}")
        return cls(
            signal=signal,
            link=link,
            propagation=prop,
            estimators=ests,
            theory_overlays=overlays,
            output_dir=str(raw.get("output_dir", "runs")),
            name=str(raw.get("name", "experiment")),
            allow_dispersion_managed=bool(raw.get("allow_dispersion_managed", False)),
        )

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                raw = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self):
        s = self.signal
        return {
            "name": self.name,
            "signal": {
                "format": list(s.formats),
                "entropy_bits": s.entropy_bits,
                "symbol_rate": s.symbol_rate,
                "rolloff": s.rolloff,
                "samples_per_symbol": s.samples_per_symbol,
                "n_symbols": s.n_symbols,
                "seed": s.seed,
            },
            "link": self.link.to_dict(),
            "propagation": vars(self.propagation).copy(),
            "estimators": [vars(e).copy() for e in self.estimators],
            "theory_overlays": dict(self.theory_overlays),
            "output_dir": self.output_dir,
            "allow_dispersion_managed": self.allow_dispersion_managed,
        }


def bundled_configs():
    root = resources.files("fiberppe") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_config(name_or_path):
    """Load a config file, or a bundled one by name (``fig3-desk``)."""
    path = Path(name_or_path)
    if path.exists():
        return ExperimentConfig.load(path)
    res = resources.files("fiberppe") / "configs" / f"{name_or_path}.yaml"
    if not res.is_file():
        raise ConfigError(
            f"no config file or bundled config named {name_or_path!r} "
            f"(bundled: {', '.join(bundled_configs())})"
        )
    with resources.as_file(res) as p:
        return ExperimentConfig.load(p)


def _tag(x):
    return f"{x:g}".replace(".", "p")


def _estimate(est, rx, tx, link, model, allow_dm):
    grid = EstimationGrid.uniform(link.length, est.delta_z)
    t0 = time.perf_counter()
    kw = dict(model=model, allow_dispersion_managed=allow_dm)
    if est.method == "CM":
        prof = cm_profile(rx, tx, link, grid, est.epsilon, **kw)
    elif est.method == "mCM":
        prof = mcm_profile(rx, tx, link, grid, **kw)
    else:
        prof = mmse_profile(rx, tx, link, grid, est.reg, **kw)
    return prof, time.perf_counter() - t0


def run_experiment(config, output_dir=None):
    """Run every format/estimator/overlay of ``config``; returns the manifest dict.

    Writes one CSV per profile and ``manifest.json`` into the output
    directory. Estimation quality never raises; only invalid configs and
    numerically singular systems do.
    """
    cfg = config
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    link = cfg.link
    sig = cfg.signal
    overlays = cfg.theory_overlays
    manifest = {
        "package_version": __version__,
        "config": cfg.to_dict(),
        "rng": RNG_NAME,
        "n_samples": sig.n_samples,
        "threads": thread_limit(),
        "runs": [],
        "files": [],
    }
    t_start = time.perf_counter()
    for fmt_name in sig.formats:
        fmt = SymbolFormat.parse(fmt_name, sig.entropy_bits if "PCS" in fmt_name.upper() else None)
        label = str(fmt.kind.value)
        t0 = time.perf_counter()
        tx = make_waveform(fmt, sig.n_symbols, sig.samples_per_symbol, sig.symbol_rate,
                           sig.rolloff, seed=sig.seed)
        rx = ssm_propagate(tx, link, cfg.propagation,
                           allow_dispersion_managed=cfg.allow_dispersion_managed)
        run = {"format": label, "seed": sig.seed, "noise_seed": cfg.propagation.noise_seed,
               "propagation_s": time.perf_counter() - t0, "profiles": []}
        log.info("%s: propagated %d samples in %.1f s", label, len(tx), run["propagation_s"])
        model = PerturbationModel(tx, link)
        with ThreadPoolExecutor(max_workers=thread_limit()) as pool:
            jobs = [pool.submit(_estimate, est, rx, tx, link, model, cfg.allow_dispersion_managed)
                    for est in cfg.estimators]
            results = [j.result() for j in jobs]
        model.clear()
        acf = None
        if overlays.get("predict_cm") or overlays.get("predict_mmse") or overlays.get("srf"):
            acf = Autocorrelation.from_signal(tx)
        written = set()
        for est, (prof, secs) in zip(cfg.estimators, results):
            name = f"{label}_{est.method}_dz{_tag(est.delta_z)}"
            if est.method == "CM":
                name += f"_eps{_tag(est.epsilon)}"
            path = out / f"{name}.csv"
            prof.to_csv(path, link)
            manifest["files"].append(path.name)
            run["profiles"].append({
                "file": path.name, "method": est.method, "delta_z": est.delta_z,
                "epsilon": prof.epsilon, "reg": prof.reg, "n_samples": prof.n_samples,
                "cond_M": prof.cond_M, "seconds": secs,
            })
            grid = prof.grid
            extra = []
            if overlays.get("true_profile"):
                extra.append((f"TRUE_dz{_tag(est.delta_z)}", lambda g=grid: true_profile(link, g)))
            if overlays.get("predict_cm") and est.method in ("CM", "mCM"):
                variant = "original" if est.method == "CM" else "modified"
                extra.append((
                    f"{label}_PREDICTED-{est.method}_dz{_tag(est.delta_z)}",
                    lambda g=grid, v=variant, e=est.epsilon: predict_cm(None, link, g, e, v, acf=acf),
                ))
            if overlays.get("predict_mmse") and est.method == "MMSE" and link.uniform_dispersion:
                extra.append((
                    f"{label}_PREDICTED-MMSE_dz{_tag(est.delta_z)}",
                    lambda g=grid, r=est.reg: predict_mmse(None, link, g, r, acf=acf),
                ))
            for stem, make in extra:
                if stem in written:
                    continue
                written.add(stem)
                t1 = time.perf_counter()
                p = make()
                path = out / f"{stem}.csv"
                p.to_csv(path, link)
                manifest["files"].append(path.name)
                run["profiles"].append({"file": path.name, "method": p.method,
                                        "delta_z": p.grid.delta_z,
                                        "seconds": time.perf_counter() - t1})
        if overlays.get("srf") and link.uniform_dispersion:
            beta2 = link.spans[0].beta2
            sr = numeric_sr(acf, beta2)
            offsets = np.linspace(-5.0 * sr, 5.0 * sr, 401)
            curve = srf_curve(acf, beta2, offsets)
            path = out / f"{label}_SRF.csv"
            curve.to_csv(path)
            manifest["files"].append(path.name)
            run["srf_km"] = sr
        manifest["runs"].append(run)
    manifest["wall_time_s"] = time.perf_counter() - t_start
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=_json_default)
    return manifest


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)
