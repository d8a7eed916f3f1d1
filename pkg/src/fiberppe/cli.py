"""Command-line entry point: ``fiberppe <subcommand> ...``.

Exit codes: 0 success, 2 invalid configuration or input, 3 numerical
failure (singular normal equations).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .errors import ConfigError, PPEError, SingularSystemError, WaveformFormatError
from .estimators import EstimationGrid, cm_profile, mcm_profile, mmse_profile
from .experiment import ExperimentConfig, bundled_configs, load_config, run_experiment
from .fibersim import Anomaly, PropagationConfig, ssm_propagate, standard_link
from .io import read_waveform, write_waveform
from .signalgen import SymbolFormat, make_waveform
from .theory import (
    Autocorrelation,
    fwhm,
    gaussian_sigma,
    numeric_sr,
    predict_cm,
    predict_mmse,
    sr_closed_form,
    srf_curve,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


# ----------------------------------------------------------------- options
def _anomaly(text):
    try:
        pos, loss = text.split(":")
        return Anomaly(float(pos), float(loss))
    except ValueError:
        raise argparse.ArgumentTypeError(f"anomaly must be POSITION:LOSS_DB, got {text!r}") from None


def _add_link_args(p):
    g = p.add_argument_group("link (overrides the config link)")
    g.add_argument("--config", help="experiment config file or bundled name supplying defaults")
    g.add_argument("--spans", type=int, help="number of identical spans")
    g.add_argument("--span-length", type=float, help="km")
    g.add_argument("--alpha", type=float, help="dB/km")
    g.add_argument("--beta2", type=float, help="ps^2/km")
    g.add_argument("--gamma", type=float, help="1/(W km)")
    g.add_argument("--launch-power", type=float, help="dBm")
    g.add_argument("--anomaly", type=_anomaly, action="append",
                   help="point loss POSITION:LOSS_DB (repeatable)")
    g.add_argument("--allow-dispersion-managed", action="store_true")


def _add_signal_args(p):
    g = p.add_argument_group("signal")
    g.add_argument("--format", help="Gaussian, QPSK, QAM16, QAM64 or PCS64QAM")
    g.add_argument("--entropy-bits", type=float)
    g.add_argument("--symbol-rate", type=float, help="GBd")
    g.add_argument("--rolloff", type=float)
    g.add_argument("--sps", type=int, help="samples per symbol")
    g.add_argument("--n-symbols", type=int)
    g.add_argument("--seed", type=int)


def _base_config(args):
    return load_config(args.config) if getattr(args, "config", None) else None


def _link_from_args(args, base=None):
    if base is not None and not any(
        getattr(args, k) is not None
        for k in ("spans", "span_length", "alpha", "beta2", "gamma", "launch_power", "anomaly")
    ):
        return base.link
    kw = {}
    if base is not None:
        s0 = base.link.spans[0]
        kw = dict(n_spans=len(base.link.spans), span_length=s0.length, alpha=s0.alpha,
                  beta2=s0.beta2, gamma=s0.gamma, launch_power=base.link.launch_power,
                  anomalies=base.link.anomalies)
    for arg, key in (("spans", "n_spans"), ("span_length", "span_length"), ("alpha", "alpha"),
                     ("beta2", "beta2"), ("gamma", "gamma"), ("launch_power", "launch_power")):
        v = getattr(args, arg)
        if v is not None:
            kw[key] = v
    if args.anomaly is not None:
        kw["anomalies"] = args.anomaly
    return standard_link(**kw)


def _signal_params(args, base=None):
    s = base.signal if base is not None else None
    pick = lambda v, attr, default: v if v is not None else (getattr(s, attr) if s else default)  # noqa: E731
    fmt = args.format or (s.formats[0] if s else "Gaussian")
    return dict(
        fmt=SymbolFormat.parse(fmt, pick(args.entropy_bits, "entropy_bits", None)
                               if "PCS" in fmt.upper() else None),
        n_symbols=pick(args.n_symbols, "n_symbols", 16384),
        samples_per_symbol=pick(args.sps, "samples_per_symbol", 8),
        symbol_rate=pick(args.symbol_rate, "symbol_rate", 32.0),
        rolloff=pick(args.rolloff, "rolloff", 0.1),
        seed=pick(args.seed, "seed", 0),
    )


def _acf_from_args(args):
    if getattr(args, "tx", None):
        return Autocorrelation.from_signal(read_waveform(args.tx))
    kind = args.spectrum
    bw = args.bandwidth
    if kind == "rectangular":
        return Autocorrelation.rectangular(bw)
    if kind == "gaussian":
        return Autocorrelation.gaussian(gaussian_sigma(bw))
    return Autocorrelation.raised_cosine(bw, args.rolloff_spectrum)


def _add_spectrum_args(p, tx=False):
    p.add_argument("--spectrum", choices=("rectangular", "gaussian", "raised-cosine"),
                   default="rectangular")
    p.add_argument("--bandwidth", type=float, default=64.0,
                   help="3-dB bandwidth in GHz (symbol rate for raised-cosine)")
    p.add_argument("--rolloff-spectrum", type=float, default=0.1)
    if tx:
        p.add_argument("--tx", help="waveform file whose measured spectrum is used instead")


# ---------------------------------------------------------------- commands
def cmd_simulate(args):
    base = _base_config(args)
    link = _link_from_args(args, base)
    params = _signal_params(args, base)
    n = params["n_symbols"] * params["samples_per_symbol"]
    if n & (n - 1):
        raise ConfigError(f"n_symbols x sps must be a power of two, got {n}")
    prop = base.propagation if base else PropagationConfig()
    changes = {k: v for k, v in (("step", args.step), ("noise_seed", args.noise_seed)) if v is not None}
    if args.ase:
        changes["ase_enabled"] = True
    if changes:
        prop = PropagationConfig(**{**vars(prop), **changes})
    tx = make_waveform(params.pop("fmt"), **params)
    rx = ssm_propagate(tx, link, prop, allow_dispersion_managed=args.allow_dispersion_managed)
    write_waveform(args.tx_out, tx)
    write_waveform(args.rx_out, rx)
    print(f"wrote {args.tx_out} and {args.rx_out} ({len(tx)} samples, L = {link.length:g} km)")
    return EXIT_OK


def cmd_estimate(args):
    base = _base_config(args)
    link = _link_from_args(args, base)
    tx = read_waveform(args.tx)
    rx = read_waveform(args.rx)
    if len(tx) != len(rx):
        raise ConfigError("tx and rx lengths differ")
    if not args.delta_z > 0:
        raise ConfigError("delta-z must be positive")
    grid = EstimationGrid.uniform(link.length, args.delta_z)
    kw = dict(allow_dispersion_managed=args.allow_dispersion_managed)
    if args.method == "CM":
        prof = cm_profile(rx, tx, link, grid, args.epsilon, **kw)
    elif args.method == "mCM":
        prof = mcm_profile(rx, tx, link, grid, **kw)
    else:
        prof = mmse_profile(rx, tx, link, grid, args.reg, **kw)
    prof.to_csv(args.out, link)
    extra = f", cond(M) = {prof.cond_M:.3g}" if prof.cond_M is not None else ""
    print(f"wrote {args.out}: {args.method}, {len(grid)} positions{extra}")
    return EXIT_OK


def cmd_srf(args):
    acf = _acf_from_args(args)
    sr = numeric_sr(acf, args.beta2)
    span = args.span if args.span is not None else 5.0 * sr
    offsets = np.linspace(-span, span, args.points)
    curve = srf_curve(acf, args.beta2, offsets)
    if args.out:
        curve.to_csv(args.out)
    print(f"FWHM = {fwhm(curve):.4g} km (numeric SR {sr:.4g} km)")
    return EXIT_OK


def cmd_resolution(args):
    rows = []
    for bw in args.bandwidths:
        if args.spectrum == "rectangular":
            acf = Autocorrelation.rectangular(bw)
        else:
            acf = Autocorrelation.gaussian(gaussian_sigma(bw))
        rows.append((bw, numeric_sr(acf, args.beta2), sr_closed_form(args.beta2, bw, args.spectrum)))
    x = np.array([1.0 / (abs(args.beta2) * (r[0] * 1e-3) ** 2) for r in rows])
    y = np.array([r[1] for r in rows])
    coeff = float(x @ y / (x @ x))
    print("bandwidth_ghz,numeric_sr_km,closed_form_sr_km")
    for bw, num, cf in rows:
        print(f"{bw:g},{num:.6g},{cf:.6g}")
    print(f"# fitted coefficient {coeff:.4f}")
    return EXIT_OK


def cmd_predict(args):
    base = _base_config(args)
    link = _link_from_args(args, base)
    acf = _acf_from_args(args)
    grid = EstimationGrid.uniform(link.length, args.delta_z)
    if args.variant == "mmse":
        prof = predict_mmse(None, link, grid, args.reg, acf=acf)
    else:
        variant = "original" if args.variant == "cm" else "modified"
        prof = predict_cm(None, link, grid, args.epsilon, variant, acf=acf)
    prof.to_csv(args.out, link)
    print(f"wrote {args.out}: predicted {args.variant}, {len(grid)} positions")
    return EXIT_OK


def cmd_experiment(args):
    if args.list:
        print("\n".join(bundled_configs()))
        return EXIT_OK
    if not args.config:
        raise ConfigError("experiment needs a config (file path or bundled name)")
    cfg = load_config(args.config)
    raw = cfg.to_dict()
    for key, val in (("n_symbols", args.n_symbols), ("seed", args.seed)):
        if val is not None:
            raw["signal"][key] = val
    if args.step is not None:
        raw["propagation"]["step"] = args.step
    if args.output_dir:
        raw["output_dir"] = args.output_dir
    cfg = ExperimentConfig.from_dict(raw)
    manifest = run_experiment(cfg)
    print(f"{cfg.name}: wrote {len(manifest['files'])} files to {cfg.output_dir} "
          f"in {manifest['wall_time_s']:.1f} s")
    return EXIT_OK


def cmd_oracle(args):
    from . import statprops as sp

    reports = []
    for k in (1, 2, 3):
        for kind in ("identical", "independent", "correlated"):
            r = sp.gaussian_moment_identity(k, kind, args.n, args.seed)
            reports.append({"check": f"moment k={k} {kind}", **r.as_dict()})
    n = args.lti_n
    flat = np.full(n, 1.0 / n)
    floor = sp.xcorr_floor(flat)
    h = sp.cd_response(n, 1.0, 400.0)
    g = sp.cd_response(n, 1.0, -250.0)
    for name, fh, fg in (("identity", 1.0, 1.0), ("equal-CD", h, h), ("distinct-CD", h, g)):
        res = sp.lti_xcorr_identity(flat, fh, fg, n, args.seed)
        reports.append({"check": f"lti {name}", "residual": res, "floor": floor,
                        "passed": res <= floor})
    text = json.dumps(reports, indent=2, default=float)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    for r in reports:
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['check']}")
    return EXIT_OK


# ------------------------------------------------------------------ parser
def build_parser():
    p = argparse.ArgumentParser(prog="fiberppe", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a waveform and propagate it")
    _add_signal_args(s)
    _add_link_args(s)
    s.add_argument("--step", type=float, help="split-step size in km")
    s.add_argument("--ase", action="store_true", help="inject amplifier noise")
    s.add_argument("--noise-seed", type=int)
    s.add_argument("--tx-out", default="tx.ppe")
    s.add_argument("--rx-out", default="rx.ppe")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("estimate", help="estimate a power profile from tx/rx waveforms")
    s.add_argument("--tx", required=True)
    s.add_argument("--rx", required=True)
    s.add_argument("--method", choices=("CM", "mCM", "MMSE"), default="mCM")
    s.add_argument("--delta-z", type=float, default=2.0)
    s.add_argument("--epsilon", type=float, default=0.01)
    s.add_argument("--reg", type=float, default=1e-6)
    s.add_argument("--out", default="profile.csv")
    _add_link_args(s)
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("srf", help="spatial response function of a spectrum")
    _add_spectrum_args(s, tx=True)
    s.add_argument("--beta2", type=float, default=-20.55)
    s.add_argument("--span", type=float, help="half-width of the offset range in km")
    s.add_argument("--points", type=int, default=401)
    s.add_argument("--out")
    s.set_defaults(func=cmd_srf)

    s = sub.add_parser("resolution", help="spatial resolution versus bandwidth")
    s.add_argument("--spectrum", choices=("rectangular", "gaussian"), default="rectangular")
    s.add_argument("--bandwidths", type=float, nargs="+", default=[32.0, 64.0, 128.0, 256.0])
    s.add_argument("--beta2", type=float, default=-20.55)
    s.set_defaults(func=cmd_resolution)

    s = sub.add_parser("predict", help="theoretical CM or MMSE profile")
    s.add_argument("--variant", choices=("cm", "mcm", "mmse"), default="mcm")
    s.add_argument("--delta-z", type=float, default=2.0)
    s.add_argument("--epsilon", type=float, default=0.01)
    s.add_argument("--reg", type=float, default=1e-6)
    s.add_argument("--out", default="predicted.csv")
    _add_spectrum_args(s, tx=True)
    _add_link_args(s)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("experiment", help="run a config-driven experiment")
    s.add_argument("config", nargs="?", help="config file or bundled name")
    s.add_argument("--list", action="store_true", help="list bundled configs")
    s.add_argument("--output-dir")
    s.add_argument("--n-symbols", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--step", type=float)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("oracle", help="run the statistical identity checks")
    s.add_argument("--n", type=int, default=200000, help="draws per moment check")
    s.add_argument("--lti-n", type=int, default=65536)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="write the JSON report here")
    s.set_defaults(func=cmd_oracle)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SingularSystemError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, WaveformFormatError, PPEError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
