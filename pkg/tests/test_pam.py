import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mgincap.bounds import noise_entropy
from mgincap.errors import DomainError
from mgincap.noise import NoiseParams, derive_constants, pdf, sample
from mgincap.pam import (
    PamSpec,
    ResolutionWarning,
    bhattacharyya_mi_bound_bits,
    bhattacharyya_z,
    binary_mi_bits,
    c1_monotonicity_scan,
    collision_integral,
    collision_integral_quadrature,
    fano_lower,
    ghq_lower,
    output_pdf,
    pam_amplitude,
    pam_bounds,
    pam_mi_numeric,
    pam_ser,
    pam_ser_monte_carlo,
    pam_ser_printed,
    pam_spec,
    pam_spec_at_gsnr,
    qam_mutual_information,
)

LN2 = math.log(2.0)
PAM_GRID = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]


def noise(alpha=1.5, c1=0.5):
    params = NoiseParams(alpha, 1.0, 1.0, c1, 1.0)
    return params, derive_constants(params), noise_entropy(params, "numeric")


@pytest.fixture(scope="module")
def grid_values():
    out = {}
    for alpha in (1.2, 1.5):
        params, consts, h = noise(alpha)
        for g in PAM_GRID:
            spec = pam_spec_at_gsnr(4, 1.1, g, params, consts)
            out[alpha, g] = (spec, pam_bounds(spec, params, consts, h_nm=h))
    return out


# --- constellation ---------------------------------------------------------------


def test_amplitude_examples():
    assert pam_amplitude(2, 1.3, 5.0) == pytest.approx(2 * (5.0 / 2) ** (1 / 1.3), rel=1e-15)
    assert pam_amplitude(4, 2.0, 10.0) == pytest.approx(2 * math.sqrt(0.5), rel=1e-15)


@given(m=st.sampled_from([2, 4, 8, 16]), p=st.floats(1.0, 2.0), p0=st.floats(1e-3, 1e6))
@settings(max_examples=100, deadline=None)
def test_amplitude_meets_budget(m, p, p0):
    spec = pam_spec(m, p, p0)
    assert float(np.sum(np.abs(spec.points) ** p)) == pytest.approx(p0, rel=1e-12)
    avg = pam_spec(m, p, p0, normalization="expectation")
    assert avg.signal_moment == pytest.approx(p0, rel=1e-12)
    assert spec.points == pytest.approx(-spec.points[::-1], abs=1e-12 * spec.a)
    assert np.diff(spec.points) == pytest.approx(np.full(m - 1, spec.a), rel=1e-12)


def test_amplitude_validation():
    for bad in [(3, 1.1, 1.0), (4, 0.9, 1.0), (4, 1.1, -1.0)]:
        with pytest.raises(DomainError):
            pam_amplitude(*bad)
    with pytest.raises(DomainError):
        pam_amplitude(4, 1.1, 1.0, normalization="peak")


# --- symbol error rate ------------------------------------------------------------


@given(
    alpha=st.floats(1.05, 1.95),
    c1=st.floats(0.0, 0.95),
    amp=st.floats(1e-3, 1e4),
    m=st.sampled_from([2, 4, 8]),
)
@settings(max_examples=60, deadline=None)
def test_ser_closed_form_matches_quadrature(alpha, c1, amp, m):
    params = NoiseParams(alpha, 1.0, 1.0, c1, 1.0)
    consts = derive_constants(params)
    spec = PamSpec(m, 1.1, 1.0, amp)
    closed = pam_ser(spec, params, consts)
    numeric = pam_ser(spec, params, consts, method="quadrature")
    assert closed == pytest.approx(numeric, abs=1e-8)


def test_ser_limits():
    params, consts, _ = noise()
    assert pam_ser(PamSpec(4, 1.1, 1.0, 1e-12), params, consts) == pytest.approx(0.75, abs=1e-10)
    assert pam_ser(PamSpec(8, 1.1, 1.0, 1e-12), params, consts) == pytest.approx(7 / 8, abs=1e-10)
    assert pam_ser(PamSpec(4, 1.1, 1.0, 1e12), params, consts) < 1e-15


def test_ser_gaussian_noise_is_q_function():
    from scipy.stats import norm

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        params = NoiseParams(2.0, 1.0, 1.0, 1.0, 0.5)
        consts = derive_constants(params)
    spec = PamSpec(4, 2.0, 1.0, 3.0)
    assert pam_ser(spec, params, consts) == pytest.approx(1.5 * norm.sf(1.5), rel=1e-12)


def test_ser_decreases_with_gsnr(grid_values):
    for alpha in (1.2, 1.5):
        pes = [grid_values[alpha, g][1].pe for g in PAM_GRID]
        assert np.all(np.diff(pes) < 0)


def test_ser_matches_monte_carlo():
    params, consts, _ = noise(1.5)
    spec = pam_spec_at_gsnr(4, 1.1, 12.0, params, consts)
    mc = pam_ser_monte_carlo(spec, params, consts, draws=2_000_000, seed=5)
    assert abs(mc.ser - pam_ser(spec, params, consts)) < 3 * mc.sigma


def test_published_ser_constants_disagree():
    # with the published hypergeometric argument the tail term overshoots and
    # the error rate turns negative at moderate amplitudes
    params, consts, _ = noise(1.2)
    spec = pam_spec_at_gsnr(4, 1.1, 25.0, params, consts)
    assert pam_ser_printed(spec, params, consts) < 0.0 < pam_ser(spec, params, consts)


# --- Fano bound -------------------------------------------------------------------------


def test_fano_examples():
    assert fano_lower(4, 0.0) == pytest.approx(math.log(4), abs=1e-15)
    assert fano_lower(4, 0.75) == pytest.approx(0.0, abs=1e-15)
    h = -0.01 * math.log(0.01) - 0.99 * math.log(0.99)
    assert fano_lower(4, 0.01) == pytest.approx(math.log(4) - h - 0.01 * math.log(3), abs=1e-15)
    with pytest.raises(DomainError):
        fano_lower(4, 1.5)


@given(m=st.sampled_from([2, 4, 8, 16]), a=st.floats(0.0, 1.0), b=st.floats(0.0, 1.0))
@settings(max_examples=200, deadline=None)
def test_fano_decreasing(m, a, b):
    top = (m - 1) / m
    lo, hi = sorted((a * top, b * top))
    if hi - lo > 1e-9:
        assert fano_lower(m, hi) < fano_lower(m, lo)


# --- mutual information and the GHQ bound --------------------------------------------------


def test_mutual_information_matches_monte_carlo():
    params, consts, h = noise(1.5)
    spec = pam_spec_at_gsnr(4, 1.1, 8.0, params, consts)
    rng = np.random.default_rng(11)
    n = 200_000
    x = spec.points[rng.integers(0, 4, n)]
    y = x + sample(params, consts, n, rng)
    terms = np.log(pdf(params, consts, y - x) / output_pdf(spec, params, consts, y))
    mi = pam_mi_numeric(spec, params, consts, h_nm=h)
    assert abs(terms.mean() - mi) < 4 * terms.std() / math.sqrt(n)


def test_mutual_information_limits():
    params, consts, h = noise(1.5)
    low = pam_mi_numeric(pam_spec_at_gsnr(4, 1.1, -40.0, params, consts), params, consts, h_nm=h)
    high = pam_mi_numeric(pam_spec_at_gsnr(4, 1.1, 60.0, params, consts), params, consts, h_nm=h)
    assert 0.0 <= low < 1e-3
    assert math.log(4) - 1e-3 < high <= math.log(4) + 1e-7


def test_mutual_information_monotone_and_capped(grid_values):
    for alpha in (1.2, 1.5):
        mis = [grid_values[alpha, g][1].mi_numeric for g in PAM_GRID]
        assert np.all(np.diff(mis) >= 0)
        assert max(mis) <= math.log(4) + 1e-7


def test_saturation_at_25_db(grid_values):
    assert grid_values[1.5, 25.0][1].mi_numeric / LN2 >= 1.95


def test_lower_bounds_below_mutual_information(grid_values):
    for (alpha, g), (_, b) in grid_values.items():
        assert b.lhat2 <= b.mi_numeric + 1e-6, (alpha, g)
        assert b.lhat1 <= b.mi_numeric + 1e-4, (alpha, g)


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.9])
@pytest.mark.parametrize("gsnr", [0.0, 10.0, 20.0])
def test_ghq_sum_matches_collision_quadrature(alpha, gsnr):
    params, consts, _ = noise(alpha)
    spec = pam_spec_at_gsnr(4, 1.1, gsnr, params, consts)
    exact = -math.log(collision_integral_quadrature(spec, params, consts))
    assert -math.log(collision_integral(spec, params, consts, 40)) == pytest.approx(exact, abs=1e-4)
    g30 = -math.log(collision_integral(spec, params, consts, 30))
    g50 = -math.log(collision_integral(spec, params, consts, 50))
    assert abs(g30 - g50) < 1e-3


def test_ghq_collision_for_gaussian_noise():
    # two Gaussian components: int f_Y^2 has a closed form
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        params = NoiseParams(2.0, 1.0, 1.0, 1.0, 0.5)
        consts = derive_constants(params)
    spec = PamSpec(2, 2.0, 1.0, 1.7)
    exact = (1 + math.exp(-(1.7**2) / 4)) / (4 * math.sqrt(math.pi))
    assert collision_integral(spec, params, consts, 30) == pytest.approx(exact, rel=1e-6)


def test_ghq_warnings_and_validation():
    params, consts, h = noise(1.5)
    spec = pam_spec_at_gsnr(4, 1.1, 35.0, params, consts)
    with pytest.warns(ResolutionWarning, match="at least 50"):
        ghq_lower(spec, params, consts, 30, h_nm=h, gsnr_db=35.0)
    with pytest.warns(ResolutionWarning, match="constellation spans"):
        ghq_lower(spec, params, consts, 30, method="raw", h_nm=h)
    with pytest.raises(DomainError):
        ghq_lower(spec, params, consts, 5, h_nm=h)
    with pytest.raises(DomainError):
        collision_integral(spec, params, consts, 30, method="simpson")


def test_ghq_underflow_returns_nan():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        params = NoiseParams(2.0, 1.0, 1.0, 1.0, 1e-4)
        consts = derive_constants(params)
    spec = PamSpec(2, 2.0, 1.0, 1e3)
    with pytest.warns(ResolutionWarning, match="underflowed"):
        assert math.isnan(ghq_lower(spec, params, consts, 20, method="raw", h_nm=0.0))


def test_qam_identity():
    assert qam_mutual_information(16, 0.8) == 1.6
    with pytest.raises(DomainError):
        qam_mutual_information(8, 0.8)


# --- binary input ------------------------------------------------------------------------------


def test_bhattacharyya_limits():
    params, consts, _ = noise(1.5)
    assert bhattacharyya_z(0.0, params, consts) == 1.0
    assert bhattacharyya_z(1e-6, params, consts) == pytest.approx(1.0, abs=1e-8)
    assert bhattacharyya_z(1e6, params, consts) < 1e-3
    with pytest.raises(DomainError):
        bhattacharyya_z(-1.0, params, consts)


def test_bhattacharyya_gaussian_closed_form():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        params = NoiseParams(2.0, 1.0, 1.0, 1.0, 0.5)
        consts = derive_constants(params)
    for a in (0.5, 2.0, 6.0):
        assert bhattacharyya_z(a, params, consts) == pytest.approx(math.exp(-a * a / 8), rel=1e-9)


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.9])
@pytest.mark.parametrize("amp", [1.0, 4.0, 16.0])
def test_binary_mutual_information_below_bhattacharyya_bound(alpha, amp):
    params, consts, h = noise(alpha)
    z = bhattacharyya_z(amp, params, consts)
    assert 0.0 <= z <= 1.0
    assert binary_mi_bits(amp, params, consts, h_nm=h) <= bhattacharyya_mi_bound_bits(z)


@pytest.mark.parametrize("gsnr", [0.0, 10.0, 20.0])
def test_c1_scan_bound_ordering(gsnr):
    scan = c1_monotonicity_scan(NoiseParams(1.2, 1.0, 1.0, 0.5, 1.0), [0.0, 0.25, 0.5, 0.75, 1.0], gsnr)
    bounds = [pt.mi_bound_bits for pt in scan]
    assert np.all(np.diff(bounds) >= 0)
    assert bounds[0] == min(bounds) and bounds[-1] == max(bounds)
