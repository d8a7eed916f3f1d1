"""Fiber-longitudinal power profile estimation: simulator, estimators and theory."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DispersionManagedError,
    PPEError,
    SingularSystemError,
    WaveformFormatError,
)
from .estimators import (  # noqa: E402
    EstimationGrid,
    PowerProfile,
    cm_profile,
    mcm_profile,
    mmse_profile,
    true_profile,
    xcorr0,
)
from .fibersim import (  # noqa: E402
    Amplifier,
    Anomaly,
    LinkSpec,
    PropagationConfig,
    Span,
    accumulated_dispersion,
    apply_cd,
    gamma_prime_at,
    inject_ase,
    ssm_propagate,
    standard_link,
)
from .io import read_waveform, write_waveform  # noqa: E402
from .perturb import PerturbationModel, erp1_receive  # noqa: E402
from .signalgen import (  # noqa: E402
    ComplexSignal,
    FormatKind,
    SymbolFormat,
    generate_symbols,
    make_waveform,
    normalize_power,
    shape_and_resample,
)
from .theory import (  # noqa: E402
    Autocorrelation,
    SrfCurve,
    fwhm,
    predict_cm,
    predict_mmse,
    sr_closed_form,
    srf_gaussian,
    srf_general,
    srf_uniform,
)
