"""Closed-form capacity bounds for the additive mixed-noise channel.

Under E|X|^p <= P0 the capacity is bracketed by

* L1 = h(Y) - h(N) with X drawn from the noise family itself,
* L2 = 1/2 ln(1 + exp(2 (h_X - h(N)))) with the maximum-entropy input,
* U  from the duality bound with a generalised-Gaussian reference output.

Everything is in nats.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .approx import build_model, entropy_closed, exact_entropy_numeric
from .errors import DomainError, MgincapError
from .noise import NoiseParams, cdf, derive_constants, p_moment, sample
from .special import gamma_fn


class IncompatibleStabilityError(MgincapError, ValueError):
    """Noise and input use different characteristic exponents."""


# ---------------------------------------------------------------------------
# noise entropy


def noise_entropy(params: NoiseParams, method: str = "closed") -> float:
    """h(N) in nats.

    ``closed`` evaluates the two-piece approximation in closed form;
    ``numeric`` integrates the exact density.
    """
    if method == "closed":
        return entropy_closed(build_model(params))
    if method == "numeric":
        return exact_entropy_numeric(params)
    raise DomainError(f"unknown noise entropy method {method!r}")


# ---------------------------------------------------------------------------
# maximum-entropy input and L2


@dataclass(frozen=True)
class MaxEntInput:
    p: float
    P0: float
    lambda0: float
    lambda1: float
    h_x: float

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(self.lambda0 + self.lambda1 * np.abs(x) ** self.p)


def max_entropy_input(p: float, P0: float) -> MaxEntInput:
    """Density exp(lambda0 + lambda1 |x|^p) with p-th moment P0."""
    if not p >= 1.0:
        raise DomainError(f"p must be >= 1, got {p!r}")
    if not P0 > 0.0:
        raise DomainError(f"P0 must be positive, got {P0!r}")
    lambda0 = (p - 1.0) / p * math.log(p) - math.log(P0) / p - math.log(2.0 * gamma_fn(1.0 / p))
    return MaxEntInput(p, P0, lambda0, -1.0 / (p * P0), -lambda0 + 1.0 / p)


def lower_L2(maxent: MaxEntInput, h_nm: float) -> float:
    d = 2.0 * (maxent.h_x - h_nm)
    # log1p(exp(d)) without overflow
    return 0.5 * (d + math.log1p(math.exp(-d)) if d > 0 else math.log1p(math.exp(d)))


# ---------------------------------------------------------------------------
# upper bound


def _reference_output_cost(p, moment_bound, h_nm):
    """min over sigma of E[-ln f_R(Y)] - h(N) for E|Y|^p <= moment_bound."""
    return -math.log(p / (2.0 * gamma_fn(1.0 / p))) + (math.log(p * moment_bound) + 1.0) / p - h_nm


def output_moment_bound(p: float, P0: float, noise_p_moment: float, moment_bound: str = "symmetric") -> float:
    """Upper bound on E|X + N|^p.

    ``minkowski``: (P0^(1/p) + m^(1/p))^p, valid for any p >= 1.
    ``symmetric``: P0 + m, valid for 1 <= p <= 2 when N is symmetric and
    independent of X, since (|a+b|^p + |a-b|^p)/2 <= |a|^p + |b|^p there.
    """
    if moment_bound == "minkowski":
        return (P0 ** (1.0 / p) + noise_p_moment ** (1.0 / p)) ** p
    if moment_bound == "symmetric":
        if p > 2.0:
            raise DomainError("the symmetric moment bound needs p <= 2")
        return P0 + noise_p_moment
    raise DomainError(f"unknown moment bound {moment_bound!r}")


def upper_U(p: float, P0: float, noise_p_moment: float, h_nm: float, moment_bound: str = "symmetric") -> float:
    """Duality upper bound with the generalised-Gaussian reference output.

    The minimising reference has sigma = p * B where B bounds E|Y|^p; with the
    Minkowski bound this is
    -ln(p / 2Gamma(1/p)) + ln(P0^(1/p) + m^(1/p)) + 1/p + ln(p)/p - h(N).
    """
    if not p >= 1.0:
        raise DomainError(f"p must be >= 1, got {p!r}")
    bound = output_moment_bound(p, P0, noise_p_moment, moment_bound)
    return _reference_output_cost(p, bound, h_nm)


def asymptotic_capacity(p: float, P0: float, h_nm: float) -> float:
    """High-power capacity -ln(p / 2Gamma(1/p)) + (ln(p P0) + 1)/p - h(N)."""
    return _reference_output_cost(p, P0, h_nm)


@dataclass(frozen=True)
class GapResult:
    exact: float
    asymptotic: float


def gap_delta_b(p, P0, noise_p_moment, maxent: MaxEntInput, h_nm, moment_bound="symmetric") -> GapResult:
    """U - L2, with its large-P0 form.

    For P0 >> m the upper bound tends to C_inf and L2 to h_X - h(N) = C_inf,
    so the large-P0 form of the gap vanishes identically.
    """
    u = upper_U(p, P0, noise_p_moment, h_nm, moment_bound)
    l2 = lower_L2(maxent, h_nm)
    u_far = -math.log(p / (2.0 * gamma_fn(1.0 / p))) + math.log(P0) / p + math.log(p) / p + 1.0 / p - h_nm
    l2_far = 1.0 / p - maxent.lambda0 - h_nm
    return GapResult(exact=u - l2, asymptotic=u_far - l2_far)


# ---------------------------------------------------------------------------
# matched-input lower bound L1


@dataclass(frozen=True)
class MatchedOutputFit:
    gamma_ys: float
    gamma_yg: float
    c_y1: float
    gamma_ysg: float
    fit_residual: float

    def output_params(self, alpha: float) -> NoiseParams:
        return NoiseParams(alpha, self.gamma_ys, self.gamma_yg, self.c_y1, self.gamma_ysg)


def matched_input(noise: NoiseParams, p: float, P0: float) -> NoiseParams:
    """Input from the noise family with E|X|^p = P0: the noise itself, rescaled."""
    m = p_moment(noise, derive_constants(noise), p)
    return noise.scaled((P0 / m) ** (1.0 / p))


def _bin_masses(params, edges):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        consts = derive_constants(params)
    c = cdf(params, consts, edges)
    return np.diff(np.concatenate(([0.0], c, [1.0])))


def _discrete_kld(emp, model):
    q = np.maximum(model, 1e-300)
    keep = emp > 0
    return float(np.sum(emp[keep] * np.log(emp[keep] / q[keep])))


def fit_output_params(
    noise: NoiseParams,
    input: NoiseParams,
    samples: int = 1_000_000,
    bins: int = 200,
    seed=0,
    grid: int = 21,
) -> MatchedOutputFit:
    """Fit the mixed model to Y = X + N.

    gamma_ys and gamma_yg follow the component-wise stability rules. c_y1 and
    gamma_ysg minimise the binned divergence between a Monte Carlo sample of
    Y and the model (equal-count bins, exact model bin masses from the CDF):
    a grid search, then Nelder-Mead.
    """
    alpha = noise.alpha
    if input.alpha != alpha:
        raise IncompatibleStabilityError(
            f"input alpha {input.alpha!r} differs from noise alpha {alpha!r}"
        )
    gamma_ys = (input.gamma_s**alpha + noise.gamma_s**alpha) ** (1.0 / alpha)
    gamma_yg = math.hypot(input.gamma_g, noise.gamma_g)

    rng = np.random.default_rng(seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        kn, kx = derive_constants(noise), derive_constants(input)
    y = sample(noise, kn, samples, rng) + sample(input, kx, samples, rng)
    y.sort()
    cut = np.linspace(0, samples, bins + 1).astype(int)[1:-1]
    edges = 0.5 * (y[cut - 1] + y[cut])
    emp = np.full(bins, 1.0 / bins)

    ref = input.gamma_sg + noise.gamma_sg

    def objective(c1, gsg):
        prm = NoiseParams(alpha, gamma_ys, gamma_yg, float(np.clip(c1, 0.0, 1.0)), float(gsg))
        return _discrete_kld(emp, _bin_masses(prm, edges))

    c_grid = np.linspace(0.0, 1.0, grid)
    g_grid = ref * np.geomspace(0.5, 4.0, grid)
    scores = np.array([[objective(c, g) for g in g_grid] for c in c_grid])
    i, j = np.unravel_index(np.argmin(scores), scores.shape)
    start = np.array([c_grid[i], math.log(g_grid[j])])
    res = minimize(
        lambda v: objective(v[0], math.exp(v[1])),
        start,
        method="Nelder-Mead",
        bounds=[(0.0, 1.0), (math.log(ref * 0.25), math.log(ref * 8.0))],
        options={"xatol": 1e-4, "fatol": 1e-9},
    )
    best = res.x if res.fun < scores[i, j] else start
    return MatchedOutputFit(
        gamma_ys=gamma_ys,
        gamma_yg=gamma_yg,
        c_y1=float(best[0]),
        gamma_ysg=float(math.exp(best[1])),
        fit_residual=float(min(res.fun, scores[i, j])),
    )


def lower_L1(fit: MatchedOutputFit, noise: NoiseParams) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        h_y = entropy_closed(build_model(fit.output_params(noise.alpha)))
        h_n = entropy_closed(build_model(noise))
    return h_y - h_n


# ---------------------------------------------------------------------------
# everything at one operating point


@dataclass(frozen=True)
class BoundSet:
    p: float
    P0: float
    gsnr_db: float
    l1: float | None
    l2: float
    u: float
    c_asymptotic: float
    h_nm: float
    fit: MatchedOutputFit | None = None


def compute_bounds(
    noise: NoiseParams,
    p: float,
    gsnr_db: float,
    noise_entropy_method: str = "closed",
    moment_bound: str = "symmetric",
    with_l1: bool = False,
    fit_threshold: float = 0.01,
    seed=0,
    h_nm: float | None = None,
) -> BoundSet:
    """All bounds at one GSNR; P0 = 10^(gsnr/10) E|N|^p.

    L1 is reported only when requested and the output fit residual is below
    ``fit_threshold``.
    """
    consts = derive_constants(noise)
    m = p_moment(noise, consts, p)
    P0 = 10.0 ** (gsnr_db / 10.0) * m
    if h_nm is None:
        h_nm = noise_entropy(noise, noise_entropy_method)
    me = max_entropy_input(p, P0)
    l1 = fit = None
    if with_l1:
        fit = fit_output_params(noise, matched_input(noise, p, P0), seed=seed)
        if fit.fit_residual <= fit_threshold:
            l1 = lower_L1(fit, noise)
    return BoundSet(
        p=p,
        P0=P0,
        gsnr_db=gsnr_db,
        l1=l1,
        l2=lower_L2(me, h_nm),
        u=upper_U(p, P0, m, h_nm, moment_bound),
        c_asymptotic=asymptotic_capacity(p, P0, h_nm),
        h_nm=h_nm,
        fit=fit,
    )


def optimal_p_upper(noise: NoiseParams, gsnr_db: float, moment_bound="symmetric", h_nm=None):
    """Order p in [1, alpha - 0.01] minimising U at a fixed GSNR (bounded Brent search)."""
    consts = derive_constants(noise)
    if h_nm is None:
        h_nm = noise_entropy(noise)
    hi = min(noise.alpha - 0.01, 2.0)
    if hi <= 1.0:
        raise DomainError("no admissible p: alpha must exceed 1.01")

    def u_of(p):
        m = p_moment(noise, consts, p)
        return upper_U(p, 10.0 ** (gsnr_db / 10.0) * m, m, h_nm, moment_bound)

    res = minimize_scalar(u_of, bounds=(1.0, hi), method="bounded", options={"xatol": 1e-5})
    return float(res.x), float(res.fun)
