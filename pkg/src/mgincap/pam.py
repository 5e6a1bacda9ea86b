"""Equiprobable, equispaced M-PAM over the mixed-noise channel.

Symbol error rate, the Fano and Gauss-Hermite lower bounds on the mutual
information, a quadrature oracle for the mutual information itself and the
Bhattacharyya parameter of the binary-input channel. Everything is in nats
unless a name says otherwise.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import quad
from scipy.special import erfc

from .approx import entropy_numeric
from .bounds import noise_entropy
from .errors import DomainError
from .noise import (
    DerivedConstants,
    NoiseParams,
    derive_constants,
    noise_quantile,
    p_moment,
    pdf,
    sample,
)
from .special import gamma_fn, gauss_2f1, gauss_hermite_rule, gaussian_tail

# median of |U| for the density exp(-u^2)/sqrt(pi); maps a noise median onto GH units
_GH_MEDIAN = 0.4769362762044699


class ResolutionWarning(UserWarning):
    """A quadrature rule is too coarse for the integrand it is applied to."""


@dataclass(frozen=True)
class PamSpec:
    """M-PAM constellation {+-(a/2)(2j-1)} under a p-th moment budget p0.

    ``normalization="sum"`` makes the sum of |x|^p over the points equal p0;
    ``"expectation"`` makes the average equal p0.
    """

    m: int
    p: float
    p0: float
    a: float
    normalization: str = "sum"

    @property
    def points(self) -> np.ndarray:
        j = np.arange(self.m) - (self.m - 1) / 2.0
        return self.a * j

    @property
    def signal_moment(self) -> float:
        """E|X|^p under equiprobable signalling."""
        return float(np.mean(np.abs(self.points) ** self.p))


def _odd_power_sum(m, p):
    return float(np.sum((2.0 * np.arange(1, m // 2 + 1) - 1.0) ** p))


def _check_order(m):
    if not (isinstance(m, (int, np.integer)) and m >= 2 and m % 2 == 0):
        raise DomainError(f"PAM order must be an even integer >= 2, got {m!r}")


def pam_amplitude(m: int, p: float, p0: float, normalization: str = "sum") -> float:
    """Spacing of adjacent points, A = 2 [p0 / (2 sum_j (2j-1)^p)]^(1/p).

    With ``normalization="expectation"`` the budget is the average over the
    M points rather than the sum, which multiplies p0 by M.
    """
    _check_order(m)
    if not p >= 1.0:
        raise DomainError(f"p must be >= 1, got {p!r}")
    if not p0 > 0.0:
        raise DomainError(f"p0 must be positive, got {p0!r}")
    if normalization == "sum":
        budget = p0
    elif normalization == "expectation":
        budget = m * p0
    else:
        raise DomainError(f"unknown normalization {normalization!r}")
    return 2.0 * (budget / (2.0 * _odd_power_sum(m, p))) ** (1.0 / p)


def pam_spec(m: int, p: float, p0: float, normalization: str = "sum") -> PamSpec:
    return PamSpec(m, p, p0, pam_amplitude(m, p, p0, normalization), normalization)


def pam_spec_at_gsnr(m, p, gsnr_db, params: NoiseParams, consts=None, normalization="sum") -> PamSpec:
    """Constellation whose budget is p0 = 10^(gsnr/10) E|N|^p."""
    consts = derive_constants(params) if consts is None else consts
    return pam_spec(m, p, 10.0 ** (gsnr_db / 10.0) * p_moment(params, consts, p), normalization)


# ---------------------------------------------------------------------------
# symbol error rate


def _upper_tail_mass(params, consts, t):
    """int_t^inf f_N in closed form (Gaussian kernel plus hypergeometric tail)."""
    gamma = params.gamma_sg
    gauss = math.sqrt(math.pi * gamma) * erfc(t / (2.0 * math.sqrt(gamma)))
    if consts.gaussian:
        return gauss / (2.0 * math.sqrt(math.pi * gamma))
    a = params.alpha + 1.0
    c2 = consts.c2
    whole = c2 ** (1.0 / a) * gamma_fn(1.0 + 1.0 / a) * gamma_fn(1.0 - 1.0 / a)
    head = t * gauss_2f1(1.0, 1.0 / a, 1.0 + 1.0 / a, -(t**a) / c2)
    return consts.peak * (params.c1 * gauss + (1.0 - params.c1) * (whole - head))


def _quad_to_infinity(fn, lo, epsrel=1e-13):
    """int_lo^inf fn for lo > 0 and an algebraically decaying fn, via n = lo / u."""
    g = lambda u: fn(lo / u) * lo / (u * u) if u > 0.0 else 0.0
    return quad(g, 0.0, 1.0, limit=400, epsabs=0.0, epsrel=epsrel)[0]


def _upper_tail_quadrature(params, consts, t):
    f = lambda n: pdf(params, consts, n)
    scale = math.sqrt(params.gamma_sg)
    edges = sorted({t, t + scale, t + 10.0 * scale})
    total = sum(quad(f, lo, hi, limit=400, epsabs=0.0, epsrel=1e-13)[0] for lo, hi in zip(edges, edges[1:]))
    return total + _quad_to_infinity(f, edges[-1])


def pam_ser(spec: PamSpec, params: NoiseParams, consts: DerivedConstants | None = None,
            method: str = "closed") -> float:
    """Symbol error rate 2(M-1)/M * P(N > A/2) under midpoint detection.

    ``closed`` uses the erfc and Gauss hypergeometric form, ``quadrature``
    integrates the density directly.
    """
    consts = derive_constants(params) if consts is None else consts
    t = spec.a / 2.0
    if method == "closed":
        tail = _upper_tail_mass(params, consts, t)
    elif method == "quadrature":
        tail = _upper_tail_quadrature(params, consts, t)
    else:
        raise DomainError(f"unknown SER method {method!r}")
    return float(np.clip(2.0 * (spec.m - 1) / spec.m * tail, 0.0, 1.0))


def pam_ser_printed(spec: PamSpec, params: NoiseParams, consts: DerivedConstants | None = None) -> float:
    """The closed form with its published constants.

    The Gaussian term lacks a factor 2 on Q and the hypergeometric argument
    reads -A^(alpha+1) / c2^(alpha+1). Kept for the deviation report only.
    """
    consts = derive_constants(params) if consts is None else consts
    a = params.alpha + 1.0
    amp = spec.a
    gauss = math.sqrt(math.pi * params.gamma_sg) * gaussian_tail(
        amp / (2.0 * math.sqrt(2.0 * params.gamma_sg)), standard=True
    )
    tail = 0.0
    if not consts.gaussian:
        c2 = consts.c2
        tail = c2 ** (1.0 / a) * gamma_fn((a + 1.0) / a) * gamma_fn((a - 1.0) / a) - amp / 2.0 * gauss_2f1(
            1.0, 1.0 / a, (a + 1.0) / a, -(amp**a) / c2**a
        )
    return 2.0 * (spec.m - 1) * consts.g0 / (spec.m * consts.i_norm) * (params.c1 * gauss + (1.0 - params.c1) * tail)


@dataclass(frozen=True)
class MonteCarloSer:
    ser: float
    sigma: float
    draws: int


def pam_ser_monte_carlo(spec: PamSpec, params: NoiseParams, consts=None, draws: int = 10_000_000,
                        seed=0, chunk: int = 1_000_000) -> MonteCarloSer:
    """Simulated SER with nearest-point (midpoint threshold) detection.

    For symmetric unimodal noise the likelihood thresholds sit at the midpoints,
    so this is the ML detector.
    """
    consts = derive_constants(params) if consts is None else consts
    rng = np.random.default_rng(seed)
    pts = spec.points
    errors = 0
    done = 0
    while done < draws:
        k = min(chunk, draws - done)
        sym = rng.integers(0, spec.m, k)
        y = pts[sym] + sample(params, consts, k, rng)
        decided = np.clip(np.rint(y / spec.a + (spec.m - 1) / 2.0), 0, spec.m - 1).astype(int)
        errors += int(np.count_nonzero(decided != sym))
        done += k
    ser = errors / draws
    return MonteCarloSer(ser, math.sqrt(max(ser * (1.0 - ser), 0.0) / draws), draws)


# ---------------------------------------------------------------------------
# lower bounds


def _xlogx(x):
    return x * math.log(x) if x > 0.0 else 0.0


def fano_lower(spec_or_m, pe: float) -> float:
    """ln M + pe ln(pe / (M-1)) + (1 - pe) ln(1 - pe), with 0 ln 0 = 0."""
    m = spec_or_m.m if isinstance(spec_or_m, PamSpec) else spec_or_m
    _check_order(m)
    if not 0.0 <= pe <= 1.0:
        raise DomainError(f"pe must lie in [0, 1], got {pe!r}")
    return math.log(m) + _xlogx(pe) - pe * math.log(m - 1) + _xlogx(1.0 - pe)


def output_pdf(spec: PamSpec, params: NoiseParams, consts: DerivedConstants, y):
    """Density of Y = X + N for the equiprobable constellation."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    for x in spec.points:
        out = out + pdf(params, consts, y - x)
    return out / spec.m


def _noise_gh_scale(params, consts):
    return noise_quantile(params, consts, 0.5) / _GH_MEDIAN


# node placement for the paired rule: fraction of the median-matched noise
# width, and the rate of the sinh stretch that carries nodes into the tails
_PAIRED_SCALE = 0.35
_SINH_RATE = 0.5


def collision_integral(spec, params, consts, order: int = 30, method: str = "paired") -> float:
    """Gauss-Hermite estimate of int f_Y^2.

    ``paired`` uses int f_i f_k = int f_i^2 f_k / (f_i + f_k) + (i <-> k) for the
    shifted noise densities f_i, so that

        int f_Y^2 = 2 / M^2 sum_i int f_i^2 sum_k f_k / (f_i + f_k),

    where every integrand is a single bump at x_i decaying like f_i^2. Each
    is integrated with exp(x^2)-reweighted Gauss-Hermite nodes mapped through
    y = x_i + s sinh(r u) / r, with s tied to the noise width.
    ``raw`` applies sum_j A_j exp(x_j^2) f_Y(x_j)^2 at the unscaled nodes.
    """
    rule = gauss_hermite_rule(order)
    if method == "raw":
        reach = float(np.max(np.abs(rule.nodes)))
        span = 1.2 * spec.a / 2.0 * (spec.m - 1)
        if reach < span:
            warnings.warn(
                f"Gauss-Hermite nodes reach {reach:.3g} but the constellation spans {span:.3g}; "
                "mixture mass outside the nodes is ignored",
                ResolutionWarning,
                stacklevel=2,
            )
        fy = output_pdf(spec, params, consts, rule.nodes)
        return float(np.sum(rule.weights * np.exp(rule.nodes**2) * fy * fy))
    if method != "paired":
        raise DomainError(f"unknown collision method {method!r}")
    scale = _PAIRED_SCALE * _noise_gh_scale(params, consts)
    u = rule.nodes
    n = scale * np.sinh(_SINH_RATE * u) / _SINH_RATE
    weights = rule.weights * np.exp(u * u) * scale * np.cosh(_SINH_RATE * u)
    f_self = pdf(params, consts, n)
    pts = spec.points
    total = 0.0
    for xi in pts:
        share = np.zeros_like(n)
        for xk in pts:
            f_other = pdf(params, consts, n + xi - xk)
            share += f_other / (f_self + f_other)
        total += float(np.dot(weights, f_self * f_self * share))
    return 2.0 * total / spec.m**2


def collision_integral_quadrature(spec, params, consts) -> float:
    """int f_Y^2 by adaptive quadrature (oracle for the Gauss-Hermite sums)."""
    scale = math.sqrt(params.gamma_sg)
    f2 = lambda y: float(output_pdf(spec, params, consts, y)) ** 2
    return 2.0 * _half_line_integral(f2, spec, scale)


def _half_line_integral(fn, spec, scale):
    """int_0^inf fn split at the constellation points and their neighbourhoods."""
    pts = [x for x in spec.points if x > 0.0]
    marks = {0.0}
    for x in pts:
        for k in (-4.0, -1.0, 0.0, 1.0, 4.0):
            marks.add(max(x + k * scale, 0.0))
    edges = sorted(marks)
    total = sum(quad(fn, lo, hi, limit=400, epsabs=0.0, epsrel=1e-12)[0] for lo, hi in zip(edges, edges[1:]))
    return total + _quad_to_infinity(fn, max(edges[-1], scale), 1e-12)


def _resolve_noise_entropy(params, h_nm, noise_entropy_method):
    return noise_entropy(params, noise_entropy_method) if h_nm is None else h_nm


def ghq_lower(spec: PamSpec, params: NoiseParams, consts=None, order: int = 30, method: str = "paired",
              h_nm: float | None = None, noise_entropy_method: str = "numeric", gsnr_db: float | None = None) -> float:
    """Jensen bound -ln int f_Y^2 - h(N) with the integral by Gauss-Hermite quadrature.

    Returns NaN, with a ``ResolutionWarning``, if the quadrature sum underflows.
    """
    if not (isinstance(order, (int, np.integer)) and order >= 10):
        raise DomainError(f"Gauss-Hermite order must be an integer >= 10, got {order!r}")
    if gsnr_db is not None and gsnr_db > 30.0 and order < 50:
        warnings.warn(
            f"order {order} is likely too low above 30 dB; use at least 50",
            ResolutionWarning,
            stacklevel=2,
        )
    consts = derive_constants(params) if consts is None else consts
    total = collision_integral(spec, params, consts, order, method)
    if not (total > 0.0 and math.isfinite(total)):
        warnings.warn(
            "Gauss-Hermite sum underflowed; the output density is too peaked for "
            f"order {order}, raise the order",
            ResolutionWarning,
            stacklevel=2,
        )
        return math.nan
    return -math.log(total) - _resolve_noise_entropy(params, h_nm, noise_entropy_method)


def output_entropy(spec: PamSpec, params: NoiseParams, consts=None) -> float:
    """h(Y) for the equiprobable constellation, by adaptive quadrature."""
    consts = derive_constants(params) if consts is None else consts
    scale = math.sqrt(params.gamma_sg)
    marks = []
    for x in spec.points:
        if x > 0.0:
            marks += [x - 4.0 * scale, x - scale, x, x + scale, x + 4.0 * scale]
    marks = [b for b in marks if b > 0.0]
    return entropy_numeric(lambda y: output_pdf(spec, params, consts, y), breakpoints=marks)


def pam_mi_numeric(spec: PamSpec, params: NoiseParams, consts=None, h_nm: float | None = None,
                   noise_entropy_method: str = "numeric") -> float:
    """I(X; Y) = h(Y) - h(N) for equiprobable PAM."""
    consts = derive_constants(params) if consts is None else consts
    mi = output_entropy(spec, params, consts) - _resolve_noise_entropy(params, h_nm, noise_entropy_method)
    return mi


@dataclass(frozen=True)
class PamBounds:
    pe: float
    lhat1: float
    lhat2: float
    mi_numeric: float


def pam_bounds(spec, params, consts=None, order: int = 30, ghq_method: str = "paired",
               noise_entropy_method: str = "numeric", h_nm=None, gsnr_db=None) -> PamBounds:
    consts = derive_constants(params) if consts is None else consts
    h_nm = _resolve_noise_entropy(params, h_nm, noise_entropy_method)
    pe = pam_ser(spec, params, consts)
    return PamBounds(
        pe=pe,
        lhat1=ghq_lower(spec, params, consts, order, ghq_method, h_nm=h_nm, gsnr_db=gsnr_db),
        lhat2=fano_lower(spec, pe),
        mi_numeric=pam_mi_numeric(spec, params, consts, h_nm=h_nm),
    )


def qam_mutual_information(m_qam: int, pam_mi: float) -> float:
    """Square M^2-QAM as two independent sqrt(M)-PAM rails: C = 2 C_PAM."""
    root = math.isqrt(m_qam)
    if root * root != m_qam:
        raise DomainError(f"QAM order must be a perfect square, got {m_qam!r}")
    return 2.0 * pam_mi


# ---------------------------------------------------------------------------
# binary input


def bhattacharyya_z(a: float, params: NoiseParams, consts=None) -> float:
    """Z = int sqrt(f_N(y) f_N(y - a)) dy for inputs {0, a}."""
    if not a >= 0.0:
        raise DomainError(f"amplitude must be non-negative, got {a!r}")
    consts = derive_constants(params) if consts is None else consts
    if a == 0.0:
        return 1.0
    half = a / 2.0
    # centred at a/2 the integrand is even
    g = lambda t: math.sqrt(pdf(params, consts, t + half) * pdf(params, consts, t - half))
    scale = math.sqrt(params.gamma_sg)
    edges = sorted({0.0, max(half - 4.0 * scale, 0.0), half, half + 4.0 * scale, 2.0 * half + 10.0 * scale})
    total = sum(quad(g, lo, hi, limit=400, epsabs=0.0, epsrel=1e-12)[0] for lo, hi in zip(edges, edges[1:]))
    total += _quad_to_infinity(g, edges[-1], 1e-12)
    return float(np.clip(2.0 * total, 0.0, 1.0))


def binary_mi_bits(a: float, params: NoiseParams, consts=None, h_nm=None) -> float:
    """Mutual information in bits for equiprobable inputs a apart."""
    consts = derive_constants(params) if consts is None else consts
    spec = PamSpec(2, 1.0, 1.0, a)
    return pam_mi_numeric(spec, params, consts, h_nm=h_nm) / math.log(2.0)


def bhattacharyya_mi_bound_bits(z: float) -> float:
    """sqrt(1 - Z^2), an upper bound on the binary-input mutual information in bits."""
    return math.sqrt(max(1.0 - z * z, 0.0))


@dataclass(frozen=True)
class C1ScanPoint:
    c1: float
    z: float
    mi_bound_bits: float
    ba_capacity: float | None = None


def c1_monotonicity_scan(params_base: NoiseParams, c1_list, gsnr_db: float, p: float = 1.1,
                         with_ba: bool = False, **ba_options) -> list[C1ScanPoint]:
    """Bhattacharyya bound (and optionally the BA capacity) as c1 varies.

    The signal is held fixed: its budget is P0 = 10^(gsnr/10) E|N|^p for the
    base noise, and every c1 sees the same P0 and the same binary amplitude.
    Each point's own GSNR therefore shifts with E|N|^p as c1 changes.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        base_consts = derive_constants(params_base)
    P0 = 10.0 ** (gsnr_db / 10.0) * p_moment(params_base, base_consts, p)
    amp = pam_amplitude(2, p, P0)
    out = []
    for c1 in c1_list:
        params = replace(params_base, c1=float(c1))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            consts = derive_constants(params)
        z = bhattacharyya_z(amp, params, consts)
        cap = None
        if with_ba:
            from .ba import capacity_at_gsnr

            own_gsnr = 10.0 * math.log10(P0 / p_moment(params, consts, p))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                cap = capacity_at_gsnr(params, p, own_gsnr, **ba_options).capacity
        out.append(C1ScanPoint(float(c1), z, bhattacharyya_mi_bound_bits(z), cap))
    return out
