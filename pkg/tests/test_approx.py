import math
import warnings

import numpy as np
import pytest

from mgincap.approx import (
    InconsistentDensityError,
    approx_mass,
    approx_pdf,
    build_model,
    entropy_closed,
    entropy_numeric,
    exact_entropy_numeric,
    gauss_branch,
    kld_split,
    model_entropy_numeric,
    solve_n0,
    split_residual,
    tail_branch,
)
from mgincap.errors import DegenerateModelError
from mgincap.noise import NoiseParams, derive_constants

GRID = [(a, c) for a in (1.2, 1.5, 1.8) for c in (0.3, 0.5, 0.7)]

# -int f_hat ln f_hat from the quadrature oracle (unit scales), frozen
GOLDEN_ENTROPY = {
    (1.2, 0.3): 2.4550181307930266,
    (1.2, 0.5): 2.3753272556256015,
    (1.2, 0.7): 2.3190390909748233,
    (1.5, 0.3): 2.1721199209298563,
    (1.5, 0.5): 2.0950052908184773,
    (1.5, 0.7): 2.040694798766594,
    (1.8, 0.3): 2.047752000185304,
    (1.8, 0.5): 1.9537270735727257,
    (1.8, 0.7): 1.8799350438904026,
}


def _model(alpha, c1, gamma_sg=1.0):
    return build_model(NoiseParams(alpha, 1.0, 1.0, c1, gamma_sg))


class TestNumericEntropyOracle:
    def test_standard_gaussian(self):
        f = lambda x: math.exp(-x * x / 2) / math.sqrt(2 * math.pi)
        assert entropy_numeric(f) == pytest.approx(0.5 * math.log(2 * math.pi * math.e), abs=1e-12)

    def test_uniform(self):
        f = lambda x: 1.0 if abs(x) <= 0.5 else 0.0
        assert entropy_numeric(f, breakpoints=(0.5,)) == pytest.approx(0.0, abs=1e-12)

    def test_cauchy(self):
        f = lambda x: 1.0 / (math.pi * (1.0 + x * x))
        assert entropy_numeric(f) == pytest.approx(math.log(4 * math.pi), abs=1e-9)

    def test_rejects_unnormalised(self):
        f = lambda x: 2.0 * math.exp(-x * x / 2) / math.sqrt(2 * math.pi)
        with pytest.raises(InconsistentDensityError):
            entropy_numeric(f)


class TestSplitPoint:
    @pytest.mark.parametrize("alpha,c1", GRID)
    def test_residual(self, alpha, c1):
        m = _model(alpha, c1)
        assert split_residual(m) < 1e-10

    def test_bracket_has_sign_change(self):
        m = _model(1.5, 0.5)
        lo, hi = 0.999 * m.n0, 1.001 * m.n0
        assert (gauss_branch(m, lo) - tail_branch(m, lo)) * (gauss_branch(m, hi) - tail_branch(m, hi)) < 0

    def test_dense_grid_crosscheck(self):
        m = _model(1.5, 0.5)
        x = np.linspace(0.01, 20, 200_001)
        diff = np.log(gauss_branch(m, x)) - np.log(tail_branch(m, x))
        first = x[np.flatnonzero(np.diff(np.sign(diff)))[0]]
        assert abs(first - m.n0) < 2e-4

    @pytest.mark.parametrize("alpha,c1", GRID)
    def test_branches_meet(self, alpha, c1):
        m = _model(alpha, c1)
        assert gauss_branch(m, m.n0) == pytest.approx(tail_branch(m, m.n0), rel=1e-12)
        assert approx_pdf(m, math.nextafter(m.n0, 0)) == pytest.approx(approx_pdf(m, m.n0), rel=1e-12)

    def test_diverges_as_gaussian_weight_grows(self):
        n0 = [_model(1.5, 1 - 10.0**-k).n0 for k in range(1, 7)]
        assert all(b > a for a, b in zip(n0, n0[1:]))

    @pytest.mark.parametrize("c1", [0.0, 1.0])
    def test_degenerate_weights_rejected(self, c1):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            prm = NoiseParams(1.5, 1.0, 1.0, c1, 1.0)
            k = derive_constants(prm)
        with pytest.raises(DegenerateModelError):
            solve_n0(prm, k)


class TestApproxPdf:
    def test_peak(self):
        m = _model(1.2, 0.5)
        assert approx_pdf(m, 0.0) == pytest.approx(m.consts.peak, rel=1e-15)

    def test_even(self):
        m = _model(1.8, 0.3)
        x = np.linspace(-10, 10, 101)
        np.testing.assert_array_equal(approx_pdf(m, x), approx_pdf(m, -x))

    def test_mass_matches_quadrature(self):
        from scipy.integrate import quad

        m = _model(1.5, 0.5)
        num = 2 * (quad(lambda x: approx_pdf(m, x), 0, m.n0)[0]
                   + quad(lambda x: approx_pdf(m, x), m.n0, np.inf, limit=400)[0])
        assert approx_mass(m) == pytest.approx(num, rel=1e-8)


class TestDivergence:
    @pytest.mark.parametrize("alpha,c1", [(1.2, 0.5), (1.5, 0.3), (1.8, 0.7)])
    def test_stationary_and_minimal(self, alpha, c1):
        prm = NoiseParams(alpha, 1.0, 1.0, c1, 1.0)
        k = derive_constants(prm)
        n0 = build_model(prm, k).n0
        kl = lambda x: kld_split(prm, k, x)
        h = 1e-4
        assert kl(n0) >= 0
        assert abs(kl(n0 + h) - kl(n0 - h)) / (2 * h) < 1e-6
        assert kl(0.9 * n0) > kl(n0)
        assert kl(1.1 * n0) > kl(n0)


class TestClosedEntropy:
    @pytest.mark.parametrize("alpha,c1", GRID)
    def test_matches_numeric(self, alpha, c1):
        m = _model(alpha, c1)
        assert abs(entropy_closed(m) - model_entropy_numeric(m)) < 1e-4

    @pytest.mark.parametrize("alpha,c1", GRID)
    def test_golden(self, alpha, c1):
        assert entropy_closed(_model(alpha, c1)) == pytest.approx(GOLDEN_ENTROPY[(alpha, c1)], abs=1e-10)

    @pytest.mark.parametrize("gamma_sg", [0.5, 1.0, 2.0])
    def test_gaussian_limit(self, gamma_sg):
        prm = NoiseParams(2.0, 1.0, 1.0, 1.0, gamma_sg)
        m = build_model(prm)
        assert entropy_closed(m) == pytest.approx(0.5 * math.log(4 * math.pi * math.e * gamma_sg), rel=1e-15)
        assert model_entropy_numeric(m) == pytest.approx(entropy_closed(m), abs=1e-9)

    @pytest.mark.parametrize("alpha", [0.8, 1.2, 1.7])
    def test_impulsive_is_exact(self, alpha):
        prm = NoiseParams(alpha, 1.0, 1.0, 0.0, 1.0)
        m = build_model(prm)
        assert m.n0 == 0.0
        assert entropy_closed(m) == pytest.approx(exact_entropy_numeric(prm), abs=1e-7)

    def test_near_impulsive_continuity(self):
        h0 = entropy_closed(_model(1.5, 0.0))
        with pytest.warns(UserWarning, match="crossings"):
            h1 = entropy_closed(_model(1.5, 1e-9))
        assert h1 == pytest.approx(h0, abs=1e-4)

    def test_main_lobe_dependence(self):
        grid = (0.25, 0.5, 1.0, 2.0)
        h = [entropy_closed(_model(1.5, 0.5, g)) for g in grid]
        hn = [model_entropy_numeric(_model(1.5, 0.5, g)) for g in grid]
        exact = [exact_entropy_numeric(NoiseParams(1.5, 1.0, 1.0, 0.5, g)) for g in grid]
        np.testing.assert_allclose(h, hn, atol=1e-4)
        # shrinking the lobe concentrates the density only while the lobe dominates;
        # below gamma_sg = 0.5 the renormalisation moves weight into the tail
        for seq in (h, exact):
            assert seq[1] < seq[2] < seq[3]
            assert seq[0] > seq[1]

    def test_scale_shift(self):
        # f_hat is scale-equivariant but unnormalised, so -int f_hat ln f_hat moves by mass * ln s
        prm = NoiseParams(1.5, 1.0, 1.0, 0.5, 1.0)
        s = 3.7
        m = build_model(prm)
        assert entropy_closed(build_model(prm.scaled(s))) == pytest.approx(
            entropy_closed(m) + approx_mass(m) * math.log(s), abs=1e-10
        )


class TestFidelity:
    # measured h(f_hat) - h(f) with unit scales, frozen from the quadrature oracle
    MEASURED = {
        (1.2, 0.3): -0.0306, (1.2, 0.5): -0.0960, (1.2, 0.7): -0.1368,
        (1.5, 0.3): 0.0328, (1.5, 0.5): -0.0520, (1.5, 0.7): -0.1094,
        (1.8, 0.3): 0.2427, (1.8, 0.5): 0.0994, (1.8, 0.7): -0.0082,
    }

    @pytest.mark.parametrize("alpha,c1", GRID)
    def test_measured_gap(self, alpha, c1):
        prm = NoiseParams(alpha, 1.0, 1.0, c1, 1.0)
        gap = model_entropy_numeric(build_model(prm)) - exact_entropy_numeric(prm)
        assert gap == pytest.approx(self.MEASURED[(alpha, c1)], abs=1e-4)

    @pytest.mark.xfail(strict=True, reason="the two-piece form is unnormalised; gap reaches 0.24 nats")
    def test_within_five_hundredths(self):
        worst = 0.0
        for alpha, c1 in GRID:
            prm = NoiseParams(alpha, 1.0, 1.0, c1, 1.0)
            gap = model_entropy_numeric(build_model(prm)) - exact_entropy_numeric(prm)
            worst = max(worst, abs(gap))
        assert worst < 0.05
