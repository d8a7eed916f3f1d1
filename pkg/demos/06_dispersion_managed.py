"""Why dispersion-managed links are refused.

With +beta2 then -beta2 the accumulated dispersion retraces itself, so
positions z and L - z produce identical nonlinear paths and the normal
matrix loses rank.
"""
from fiberppe import (
    DispersionManagedError,
    EstimationGrid,
    LinkSpec,
    PropagationConfig,
    Span,
    make_waveform,
    mmse_profile,
    ssm_propagate,
)

link = LinkSpec([Span(50.0, beta2=20.55), Span(50.0, beta2=-20.55)])
tx = make_waveform("Gaussian", 4096, 4, 64.0, seed=2)
rx = ssm_propagate(tx, link, PropagationConfig(step=0.5), allow_dispersion_managed=True)
grid = EstimationGrid.uniform(link.length, 2.0)

try:
    mmse_profile(rx, tx, link, grid)
except DispersionManagedError as exc:
    print("refused:", exc)

est = mmse_profile(rx, tx, link, grid, allow_dispersion_managed=True)
print(f"forced anyway: cond(M) = {est.cond_M:.3g}")
