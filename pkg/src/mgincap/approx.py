"""Two-piece approximation of the mixed density and its differential entropy.

Inside the split point the density is replaced by its Gaussian kernel scaled to
the peak, outside by its pure algebraic tail:

    f_hat(n) = (g0/I) exp(-n^2/(4 gamma_sg))    for |n| <  n0
             = T / (|n|^(alpha+1) + c2)          for |n| >= n0,   T = alpha gamma_s C_alpha / I.

n0 is where the two pieces meet, which is also the stationary point of the
divergence of f_hat from f. Note f_hat is not normalised in general.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special as sps
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DegenerateModelError, DomainError, MgincapError
from .noise import DerivedConstants, NoiseParams, derive_constants, pdf
from .special import gamma_fn, gauss_2f1, hyper_3f2


class InconsistentDensityError(MgincapError, ValueError):
    """The density handed to the entropy oracle does not integrate to one."""


@dataclass(frozen=True)
class ApproxModel:
    params: NoiseParams
    consts: DerivedConstants
    n0: float
    kappa: float

    @property
    def gaussian(self) -> bool:
        return self.consts.gaussian

    @property
    def impulsive(self) -> bool:
        return self.n0 == 0.0


def _split_gap(params, consts, n):
    """log of tail branch minus log of Gaussian branch, both divided by g0/I."""
    a = params.alpha + 1.0
    c2 = consts.c2
    log_den = np.logaddexp(a * np.log(n), math.log(c2))
    return math.log(c2 * (1.0 - params.c1)) - log_den + n * n / (4.0 * params.gamma_sg)


def solve_n0(params: NoiseParams, consts: DerivedConstants) -> float:
    """Split point where the Gaussian and tail branches are equal.

    The branch gap is negative at the origin (it equals log(1 - c1)) and grows
    like n^2, so a root exists. A log grid on [1e-6, 1e3] brackets the first
    sign change, which is then refined with Brent's method.
    """
    if consts.gaussian or params.c1 in (0.0, 1.0):
        raise DegenerateModelError(
            "the split point exists only when both noise components are present (0 < c1 < 1)"
        )
    grid = np.geomspace(1e-6, 1e3, 2001)
    gap = _split_gap(params, consts, grid)
    if gap[0] >= 0:
        # 1 - c1 is so close to 1 that the crossing sits below the grid
        lo, hi = 0.0, grid[0]
    else:
        changes = np.flatnonzero(np.diff(np.sign(gap)) > 0)
        if changes.size == 0:
            raise DegenerateModelError("no branch crossing found on [1e-6, 1e3]")
        if changes.size > 1:
            warnings.warn(
                f"{changes.size} branch crossings found; using the smallest", stacklevel=2
            )
        lo, hi = grid[changes[0]], grid[changes[0] + 1]
    g = lambda n: _split_gap(params, consts, n) if n > 0 else math.log(1.0 - params.c1)
    return brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)


def build_model(params: NoiseParams, consts: DerivedConstants | None = None) -> ApproxModel:
    """Approximation with its split point.

    Degenerate corners: pure Gaussian noise gives n0 = inf, pure impulsive
    noise gives n0 = 0 (the tail branch is then the exact density).
    """
    consts = derive_constants(params) if consts is None else consts
    if consts.gaussian:
        return ApproxModel(params, consts, math.inf, math.inf)
    if params.c1 == 0.0:
        return ApproxModel(params, consts, 0.0, consts.c2)
    n0 = solve_n0(params, consts)
    return ApproxModel(params, consts, n0, n0 ** (params.alpha + 1.0) + consts.c2)


def split_residual(model: ApproxModel) -> float:
    """Relative mismatch of the two branches at n0."""
    p, k, n0 = model.params, model.consts, model.n0
    lhs = p.alpha * p.gamma_s * k.c_alpha / (k.g0 * model.kappa)
    rhs = math.exp(-n0 * n0 / (4.0 * p.gamma_sg))
    return abs(lhs - rhs) / rhs


def gauss_branch(model: ApproxModel, n):
    n = np.asarray(n, dtype=float)
    return model.consts.peak * np.exp(-n * n / (4.0 * model.params.gamma_sg))


def tail_branch(model: ApproxModel, n):
    n = np.abs(np.asarray(n, dtype=float))
    with np.errstate(over="ignore"):
        return model.consts.tail_numerator / (n ** (model.params.alpha + 1.0) + model.consts.c2)


def approx_pdf(model: ApproxModel, n):
    n = np.asarray(n, dtype=float)
    if model.gaussian:
        out = pdf(model.params, model.consts, n)
        return out
    out = np.where(np.abs(n) < model.n0, gauss_branch(model, n), tail_branch(model, n))
    return float(out) if out.ndim == 0 else out


def approx_mass(model: ApproxModel) -> float:
    """Total mass of f_hat; one only at the degenerate corners."""
    if model.gaussian:
        return 1.0
    p, k, n0 = model.params, model.consts, model.n0
    a = p.alpha + 1.0
    gauss = k.peak * 2.0 * math.sqrt(math.pi * p.gamma_sg) * math.erf(n0 / (2.0 * math.sqrt(p.gamma_sg)))
    # tail mass of 1/(x^a + c2) beyond n0 through the regularised incomplete beta
    v = n0**a / (n0**a + k.c2)
    full = 2.0 * k.c2 ** (1.0 / a - 1.0) * gamma_fn(1.0 / a + 1.0) * gamma_fn(1.0 - 1.0 / a)
    tail = k.tail_numerator * full * sps.betaincc(1.0 / a, 1.0 - 1.0 / a, v)
    return gauss + tail


def _impulsive_log_integral(c2, a):
    """int_0^inf ln(x^a + c2) / (x^a + c2) dx.

    Substituting v = x^a / (x^a + c2) reduces it to beta-function moments of
    ln(1 - v), which are digamma differences.
    """
    s = 1.0 / a
    base = c2 ** (s - 1.0) * s * sps.beta(s, 1.0 - s)
    return base * (math.log(c2) + sps.digamma(1.0) - sps.digamma(1.0 - s))


def entropy_closed(model: ApproxModel) -> float:
    """-int f_hat ln f_hat in closed form (nats)."""
    p, k = model.params, model.consts
    g = p.gamma_sg
    if model.gaussian:
        return 0.5 * math.log(4.0 * math.pi * math.e * g)

    alpha = p.alpha
    a = alpha + 1.0
    c2 = k.c2
    t_num = k.tail_numerator
    log_t = math.log(t_num)

    if model.impulsive:
        return -log_t + 2.0 * t_num * _impulsive_log_integral(c2, a)

    y0, kappa = model.n0, model.kappa
    peak = k.peak
    gauss_part = -peak * (
        y0 * math.exp(-y0 * y0 / (4.0 * g))
        + (2.0 * math.log(peak) - 1.0) * math.sqrt(math.pi * g) * math.erf(y0 / (2.0 * math.sqrt(g)))
    )

    s = 1.0 / a
    tail_mass_kernel = c2 ** (s - 1.0) * gamma_fn(alpha / a) * gamma_fn((alpha + 2.0) / a) - (
        y0 / c2
    ) * gauss_2f1(1.0, s, 1.0 + s, -(y0**a) / c2)
    log_prefactor_part = -2.0 * t_num * log_t * tail_mass_kernel

    big_a = alpha / a
    z = c2 / kappa
    kappa_pow = kappa ** (-big_a)
    log_tail_part = (2.0 * t_num / alpha) * (
        math.log(kappa) * kappa_pow * gauss_2f1(big_a, big_a, 1.0 + big_a, z)
        + kappa_pow / big_a * hyper_3f2(big_a, big_a, big_a, 1.0 + big_a, 1.0 + big_a, z)
    )
    return gauss_part + log_prefactor_part + log_tail_part


def _tail_extent(density, start, target_mass):
    """Grow the window until the estimated power-law tail mass beyond it is small.

    Returns (T, c, beta) with the tail modelled as c * n^-beta beyond T, or
    (T, 0, inf) when the density has already vanished.
    """
    t = max(start, 1.0)
    for _ in range(200):
        f1, f2 = float(density(t)), float(density(2.0 * t))
        if f2 <= 0.0 or f1 <= 0.0:
            return t, 0.0, math.inf
        beta = math.log(f1 / f2) / math.log(2.0)
        if beta > 1.0:
            mass = f2 * 2.0 * t / (beta - 1.0)
            if mass < target_mass:
                t *= 2.0
                return t, f2 * t**beta, beta
        t *= 2.0
    raise DomainError("density tail decays too slowly for the entropy oracle")


def _decade_edges(lo, hi, breakpoints):
    edges = {lo, hi}
    x = 1e-3
    while x < hi:
        if x > lo:
            edges.add(x)
        x *= 10.0
    edges.update(b for b in breakpoints if lo < b < hi)
    return sorted(edges)


def _integrate_half(fn, edges):
    return math.fsum(
        quad(fn, lo, hi, limit=400, epsabs=1e-15, epsrel=1e-12)[0]
        for lo, hi in zip(edges[:-1], edges[1:])
    )


def entropy_numeric(density, breakpoints=(), check_normalization=True, tail_mass=1e-9) -> float:
    """-int f ln f for a symmetric density, by adaptive quadrature.

    The half-line [0, T] is split at decades and at ``breakpoints`` (kinks or
    jumps of the density). T is pushed out until the estimated mass beyond it
    falls below ``tail_mass``; the remainder is treated as an exact power law
    c n^-beta and integrated analytically. ``check_normalization=False``
    accepts densities of arbitrary total mass (the result is still
    -int f ln f).
    """
    start = max([1.0, *[b for b in breakpoints if math.isfinite(b)]])
    t_end, c, beta = _tail_extent(density, 10.0 * start, tail_mass)
    edges = _decade_edges(0.0, t_end, breakpoints)

    def neg_f_log_f(x):
        v = float(density(x))
        return -v * math.log(v) if v > 0.0 else 0.0

    body = _integrate_half(neg_f_log_f, edges)
    mass_body = _integrate_half(lambda x: float(density(x)), edges)

    tail_h = tail_m = 0.0
    if c > 0.0:
        e = 1.0 - beta
        tail_m = c * t_end**e / (beta - 1.0)
        # -int_T^inf c x^-beta (ln c - beta ln x) dx
        int_log = t_end**e * (math.log(t_end) / (beta - 1.0) + 1.0 / (beta - 1.0) ** 2)
        tail_h = -(math.log(c) * tail_m - beta * c * int_log)

    if check_normalization:
        mass = 2.0 * (mass_body + tail_m)
        if abs(mass - 1.0) > 1e-6:
            raise InconsistentDensityError(f"density integrates to {mass!r}, not 1")
    return 2.0 * (body + tail_h)


def model_entropy_numeric(model: ApproxModel) -> float:
    """Numeric entropy of f_hat, splitting the quadrature at n0."""
    bp = () if not math.isfinite(model.n0) else (model.n0,)
    return entropy_numeric(lambda x: approx_pdf(model, x), breakpoints=bp, check_normalization=False)


def exact_entropy_numeric(params: NoiseParams, consts: DerivedConstants | None = None) -> float:
    consts = derive_constants(params) if consts is None else consts
    scale = math.sqrt(params.gamma_sg)
    return entropy_numeric(lambda x: pdf(params, consts, x), breakpoints=(scale, 4.0 * scale))


def kld_split(params: NoiseParams, consts: DerivedConstants, n0: float) -> float:
    """Generalised divergence of f_hat (split at n0) from f.

    int f ln(f / f_hat) - int f + int f_hat, which stays non-negative although
    f_hat is unnormalised; the extra mass term has zero derivative at the
    branch crossing so the stationary point is unchanged.
    """
    a = params.alpha + 1.0
    model = ApproxModel(params, consts, n0, n0**a + consts.c2)
    f = lambda x: pdf(params, consts, x)

    def integrand(x):
        fx = f(x)
        gx = approx_pdf(model, x)
        return fx * math.log(fx / gx) - fx + gx

    scale = math.sqrt(params.gamma_sg)
    edges = _decade_edges(0.0, 1e6, (n0, scale))
    body = _integrate_half(integrand, edges)
    # beyond 1e6 f and f_hat differ by the Gaussian kernel only, which is zero there
    return 2.0 * body
