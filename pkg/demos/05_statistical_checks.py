"""Monte-Carlo checks of the Gaussian identities behind the kernel."""
import numpy as np

from fiberppe.statprops import (
    cd_response,
    gaussian_moment_identity,
    lti_xcorr_identity,
    random_covariance,
    xcorr_floor,
)

for k in (1, 2, 3):
    for kind in ("identical", "independent", "correlated"):
        r = gaussian_moment_identity(k, kind, 200_000, seed=k)
        print(f"k={k} {kind:11s} MC {r.lhs.real:+.4f}  pairing sum {r.rhs.real:+.4f}  "
              f"{'ok' if r.passed else 'off'}")

passed = sum(gaussian_moment_identity(2, random_covariance(2, s), 50_000, s + 1).passed
             for s in range(100))
print(f"random k=2 covariances within 4 SE: {passed}/100")

n = 2**15
s = (np.abs(np.fft.fftfreq(n)) < 0.2).astype(float)
s /= s.sum()
h, g = cd_response(n, 1.0, 400.0), cd_response(n, 1.0, -250.0)
for name, fh, fg in (("identity", 1.0, 1.0), ("equal CD", h, h), ("distinct CD", h, g)):
    print(f"{name:11s} max residual / floor = {lti_xcorr_identity(s, fh, fg) / xcorr_floor(s):.2f}")
