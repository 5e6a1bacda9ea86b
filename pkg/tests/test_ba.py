import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mgincap.ba import (
    BAResult,
    DiscreteChannel,
    ba_capacity,
    capacity_at_gsnr,
    capacity_sweep,
    choose_step,
    discretize,
    kkt_residual,
    truncation_point,
)
from mgincap.errors import ConvergenceError, DomainError, ResolutionError
from mgincap.noise import NoiseParams, cdf, derive_constants, p_moment


def binary_entropy(q):
    return -q * math.log(q) - (1 - q) * math.log(1 - q)


def bsc(q):
    return DiscreteChannel.dense([0.0, 1.0], [0.0, 1.0], [[1 - q, q], [q, 1 - q]])


def unit_gaussian():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        params = NoiseParams(2.0, 1.0, 1.0, 1.0, 0.5)
        return params, derive_constants(params)


# --- discrete channels --------------------------------------------------------


@pytest.mark.parametrize("q", [0.0, 0.11, 0.3, 0.5])
def test_binary_symmetric_channel(q):
    res = ba_capacity(bsc(q), tol=1e-10)
    expect = math.log(2) - (binary_entropy(q) if 0 < q < 1 else 0.0)
    assert res.capacity == pytest.approx(expect, abs=1e-9)
    assert res.input_pmf == pytest.approx([0.5, 0.5], abs=1e-4)


def test_z_channel_capacity():
    # Z channel with crossover q: C = ln(1 + (1 - q) q^(q / (1 - q)))
    q = 0.25
    ch = DiscreteChannel.dense([0, 1], [0, 1], [[1.0, 0.0], [q, 1 - q]])
    res = ba_capacity(ch, tol=1e-11)
    assert res.capacity == pytest.approx(math.log1p((1 - q) * q ** (q / (1 - q))), abs=1e-9)


def test_dense_rows_must_be_distributions():
    with pytest.raises(DomainError):
        DiscreteChannel.dense([0, 1], [0, 1], [[0.5, 0.6], [0.5, 0.5]])


@given(seed=st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_capacity_invariant_under_relabelling(seed):
    rng = np.random.default_rng(seed)
    w = rng.random((4, 5)) + 0.05
    w /= w.sum(axis=1, keepdims=True)
    base = ba_capacity(DiscreteChannel.dense(range(4), range(5), w), tol=1e-7).capacity
    rows, cols = rng.permutation(4), rng.permutation(5)
    perm = ba_capacity(DiscreteChannel.dense(range(4), range(5), w[rows][:, cols]), tol=1e-7).capacity
    assert perm == pytest.approx(base, abs=2e-7)
    assert 0.0 <= base <= math.log(4) + 1e-12


def test_convergence_error_carries_result():
    w = np.array([[0.7, 0.2, 0.1], [0.1, 0.3, 0.6], [0.3, 0.4, 0.3]])
    with pytest.raises(ConvergenceError) as info:
        ba_capacity(DiscreteChannel.dense(range(3), range(3), w), tol=1e-14, max_iter=3)
    assert isinstance(info.value.result, BAResult)
    assert not info.value.result.converged
    assert len(info.value.result.history) == 4


# --- discretised additive channel --------------------------------------------


def test_truncation_point_gaussian():
    params, consts = unit_gaussian()
    # two-sided 99.9% point of N(0, 1)
    assert truncation_point(params, consts) == pytest.approx(3.2905267314919255, rel=1e-9)


def test_kernel_matches_bin_masses():
    params = NoiseParams(1.5, 1.0, 1.0, 0.5, 1.0)
    consts = derive_constants(params)
    ch = discretize(params, consts, 1.1, 1.0, step=0.01)
    ny = ch.y_grid.size
    t = (np.arange(ch.kernel.size) - (ny - 1)) * ch.step
    exact = cdf(params, consts, t + ch.step / 2) - cdf(params, consts, t - ch.step / 2)
    assert np.max(np.abs(ch.kernel - exact)) < 1e-7


def test_rows_are_distributions_and_shifts():
    params = NoiseParams(1.5, 1.0, 1.0, 0.5, 1.0)
    ch = discretize(params, None, 1.1, 0.5, step=0.02)
    w = ch.w
    assert w.sum(axis=1) == pytest.approx(np.ones(w.shape[0]), abs=1e-12)
    assert np.all(np.abs(ch.row_mass - 1.0) < 0.01)
    # the middle row is symmetric about the middle input
    mid = w[w.shape[0] // 2]
    assert mid == pytest.approx(mid[::-1], abs=1e-15)


def test_convolution_and_dense_forms_agree():
    params = NoiseParams(1.5, 1.0, 1.0, 0.5, 1.0)
    ch = discretize(params, None, 1.1, 0.5, step=0.05, input_ratio=2)
    dense = DiscreteChannel.dense(ch.x_grid, ch.y_grid, ch.w, ch.step)
    pmf = np.random.default_rng(1).random(ch.x_grid.size)
    pmf /= pmf.sum()
    d1, q1 = ch.divergences(pmf)
    d2, q2 = dense.divergences(pmf)
    assert q1 == pytest.approx(q2, abs=1e-14)
    assert d1 == pytest.approx(d2, abs=1e-10)


def test_discretize_validation():
    params = NoiseParams(1.5)
    with pytest.raises(DomainError):
        discretize(params, step=0.01)
    with pytest.raises(DomainError):
        discretize(params, p=1.1, P0=1.0, step=0.0)
    consts = derive_constants(params)
    with pytest.raises(ResolutionError):
        choose_step(params, consts, 1.1, 1e6, max_points=1000)


def test_infeasible_budget():
    ch = DiscreteChannel.dense([1.0, 2.0], [0, 1], [[0.9, 0.1], [0.1, 0.9]])
    with pytest.raises(DomainError):
        ba_capacity(ch, p=1.0, P0=0.5)


@pytest.mark.parametrize("snr_db", [0.0, 10.0])
def test_gaussian_channel_reaches_shannon(snr_db):
    params, consts = unit_gaussian()
    snr = 10 ** (snr_db / 10)
    ch = discretize(params, consts, 2.0, snr, step=0.01)
    res = ba_capacity(ch, 2.0, snr, tol=1e-5)
    assert res.capacity == pytest.approx(0.5 * math.log1p(snr), abs=2e-3)
    assert res.capacity <= res.upper


@pytest.fixture(scope="module")
def mixed_run():
    params = NoiseParams(1.9, 1.0, 1.0, 0.5, 1.0)
    consts = derive_constants(params)
    P0 = 10 ** 0.5 * p_moment(params, consts, 1.1)
    ch = discretize(params, consts, 1.1, P0, step=0.02)
    res = ba_capacity(ch, 1.1, P0, tol=1e-4)
    return ch, res, P0


def test_iterates_are_monotone(mixed_run):
    _, res, _ = mixed_run
    assert np.all(np.diff(res.history) >= -1e-12)
    assert res.history[-1] <= res.upper


def test_optimal_input_is_symmetric_and_feasible(mixed_run):
    ch, res, P0 = mixed_run
    # over-relaxation lets FFT roundoff grow slowly in the antisymmetric direction
    assert 0.5 * np.abs(res.input_pmf - res.input_pmf[::-1]).sum() < 1e-6
    assert res.input_pmf.sum() == pytest.approx(1.0, abs=1e-12)
    assert float(res.input_pmf @ np.abs(ch.x_grid) ** 1.1) <= P0 * (1 + 1e-9)


def test_kkt_residual_small_at_optimum_and_larger_elsewhere(mixed_run):
    ch, res, P0 = mixed_run
    assert res.converged
    assert res.kkt_residual < 10 * 1e-4
    assert kkt_residual(ch, res, 1.1, P0) == pytest.approx(res.kkt_residual, abs=1e-12)
    rng = np.random.default_rng(0)
    bent = res.input_pmf * np.exp(0.5 * rng.standard_normal(res.input_pmf.size))
    bent /= bent.sum()
    worse = BAResult(res.capacity, bent, 0, 0.0, res.lam, res.upper, res.history)
    assert kkt_residual(ch, worse, 1.1, P0) > 10 * res.kkt_residual


def test_step_refinement_is_stable():
    params = NoiseParams(1.9, 1.0, 1.0, 0.5, 1.0)
    coarse = capacity_at_gsnr(params, 1.1, 5.0, tol=1e-4, step=0.02)
    fine = capacity_at_gsnr(params, 1.1, 5.0, tol=1e-4, step=0.01)
    assert abs(coarse.capacity - fine.capacity) < 2e-3


def test_sweep_increases_with_gsnr():
    params = NoiseParams(1.9, 1.0, 1.0, 0.5, 1.0)
    pts = capacity_sweep(params, 1.1, [-5.0, 0.0, 5.0], step=0.02)
    caps = [pt.capacity for pt in pts]
    assert np.all(np.diff(caps) > 0)
    assert all(pt.capacity_bits == pytest.approx(pt.capacity / math.log(2)) for pt in pts)
