import numpy as np
import pytest

from fiberppe.statprops import (
    cd_response,
    covariance_spec,
    gaussian_moment_identity,
    gaussian_pair,
    lti_xcorr_identity,
    pairing_sum,
    random_covariance,
    sample_xcorr,
    xcorr_floor,
)

N = 2**14
FLAT = np.full(N, 1.0 / N)


def test_pairing_sum_known_values():
    # k identical unit variables: E|U|^(2k) = k!
    for k, fact in [(1, 1), (2, 2), (3, 6), (4, 24)]:
        assert pairing_sum(covariance_spec("identical", k), k) == pytest.approx(fact)
    assert pairing_sum(covariance_spec("independent", 2), 2) == 0


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("kind", ["identical", "independent", "correlated"])
def test_named_cases_pass(k, kind):
    rep = gaussian_moment_identity(k, kind, 200_000, seed=k)
    assert rep.passed, rep.as_dict()


def test_identical_k2_is_two():
    rep = gaussian_moment_identity(2, "identical", 400_000, seed=0)
    assert rep.rhs == 2.0
    assert abs(rep.lhs - 2.0) < 4 * rep.std_error


def test_random_covariances_pass_rate():
    passed = sum(
        gaussian_moment_identity(2, random_covariance(2, seed), 50_000, seed + 1000).passed
        for seed in range(100)
    )
    assert passed >= 99


def test_rank_deficient_accepted():
    rep = gaussian_moment_identity(2, random_covariance(2, 4, rank=2), 50_000, 9)
    assert np.isfinite(rep.std_error)


def test_moment_errors():
    with pytest.raises(ValueError):
        gaussian_moment_identity(5, "identical", 10, 0)
    with pytest.raises(ValueError):
        gaussian_moment_identity(0, "identical", 10, 0)
    bad = np.eye(4, dtype=complex)
    bad[0, 0] = -1.0
    with pytest.raises(ValueError):
        gaussian_moment_identity(2, bad, 10, 0)
    with pytest.raises(ValueError):
        gaussian_moment_identity(2, np.eye(3), 10, 0)
    with pytest.raises(ValueError):
        covariance_spec("diagonal", 2)


def test_gaussian_pair_power_and_coherence():
    a, b = gaussian_pair(FLAT, seed=2, coherence=0.5)
    assert np.mean(np.abs(a) ** 2) == pytest.approx(1.0, abs=0.05)
    assert sample_xcorr(a, b)[0] == pytest.approx(0.5, abs=4 / np.sqrt(N))
    with pytest.raises(ValueError):
        gaussian_pair(FLAT, 0, coherence=1.5)


def _lowpass():
    f = np.fft.fftfreq(N)
    s = (np.abs(f) < 0.2).astype(float)
    return s / s.sum()


@pytest.mark.parametrize("case", ["identity", "equal_cd", "distinct_cd"])
def test_lti_identity_at_floor(case):
    s = _lowpass()
    one = np.ones(N)
    h = {"identity": one, "equal_cd": cd_response(N, 1.0, 40.0), "distinct_cd": cd_response(N, 1.0, 40.0)}[case]
    g = {"identity": one, "equal_cd": cd_response(N, 1.0, 40.0), "distinct_cd": cd_response(N, 1.0, -25.0, 3.0)}[case]
    resid = lti_xcorr_identity(s, h, g, seed=5)
    assert resid < xcorr_floor(s)


def test_lti_partial_coherence():
    s = _lowpass()
    assert lti_xcorr_identity(s, 1.0, cd_response(N, 1.0, 10.0), seed=1, coherence=0.3) < xcorr_floor(s)


def test_lti_errors():
    with pytest.raises(ValueError):
        lti_xcorr_identity([], 1.0, 1.0)
    with pytest.raises(ValueError):
        lti_xcorr_identity(FLAT, 1.0, 1.0, n=N + 1)
