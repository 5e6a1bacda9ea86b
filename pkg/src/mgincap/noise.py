"""Mixed Gaussian-impulsive noise model.

The density is a Gaussian kernel plus an algebraic tail kernel,

    f(n) = (g0 / I) * [c1 exp(-n^2 / (4 gamma_sg)) + c2 (1 - c1) / (|n|^(alpha+1) + c2)],

with the constants g0, C_alpha, c2 and the normaliser I derived from the five
model parameters. Skewness and location are fixed to zero.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import special as sps

from .errors import DivergentError, DomainError
from .special import gamma_fn, tail_integral


@dataclass(frozen=True)
class NoiseParams:
    alpha: float
    gamma_s: float = 1.0
    gamma_g: float = 1.0
    c1: float = 0.5
    gamma_sg: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise DomainError(f"alpha must lie in (0, 2], got {self.alpha!r}")
        for name in ("gamma_s", "gamma_g", "gamma_sg"):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not 0.0 <= self.c1 <= 1.0:
            raise DomainError(f"c1 must lie in [0, 1], got {self.c1!r}")

    def scaled(self, s: float) -> "NoiseParams":
        """Parameters of s * N.

        The model is closed under scaling: gamma_s picks up s**alpha and both
        Gaussian scales pick up s**2, which gives f_s(n) = f(n / s) / s.
        """
        if not s > 0:
            raise DomainError(f"scale must be positive, got {s!r}")
        return replace(
            self,
            gamma_s=self.gamma_s * s**self.alpha,
            gamma_g=self.gamma_g * s * s,
            gamma_sg=self.gamma_sg * s * s,
        )

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "gamma_s": self.gamma_s,
            "gamma_g": self.gamma_g,
            "c1": self.c1,
            "gamma_sg": self.gamma_sg,
        }

    @classmethod
    def from_dict(cls, d) -> "NoiseParams":
        known = ("alpha", "gamma_s", "gamma_g", "c1", "gamma_sg")
        return cls(**{k: float(d[k]) for k in known if k in d})


@dataclass(frozen=True)
class DerivedConstants:
    """Constants of the mixed density.

    ``c2`` is ``None`` when the tail component is absent (``gaussian`` is set);
    the tail term is then dropped rather than evaluated at an infinite c2.
    """

    g0: float
    c_alpha: float
    i_norm: float
    c2: float | None
    gaussian: bool
    impulsive: bool
    # alpha * gamma_s * C_alpha / I, numerator of the pure tail branch
    tail_numerator: float = 0.0

    @property
    def peak(self) -> float:
        """Density at the origin, g0 / I."""
        return self.g0 / self.i_norm


@dataclass(frozen=True)
class PowerSpec:
    p: float
    P0: float
    gsnr_db: float | None = None

    def __post_init__(self):
        if not self.p >= 1.0:
            raise DomainError(f"moment order p must be >= 1, got {self.p!r}")
        if not self.P0 > 0.0:
            raise DomainError(f"P0 must be positive, got {self.P0!r}")


def _g0(alpha, gamma_s, gamma_g):
    inner = 2.0 ** (-0.5 - 1.0 / alpha) * math.sqrt(math.pi) / (
        alpha * (gamma_s ** (2.0 / alpha) + gamma_g)
    )
    return math.sqrt(inner * gamma_fn(1.0 / alpha)) / math.pi


def _tail_gamma_product(alpha):
    return gamma_fn(alpha / (alpha + 1.0)) * gamma_fn((alpha + 2.0) / (alpha + 1.0))


def derive_constants(params: NoiseParams) -> DerivedConstants:
    a = params.alpha
    c1 = params.c1
    g0 = _g0(a, params.gamma_s, params.gamma_g)
    # sin(pi) is not exactly zero in floating point
    c_alpha = 0.0 if a == 2.0 else gamma_fn(a) * math.sin(a * math.pi / 2.0) / math.pi

    if c1 == 1.0 or a == 2.0:
        if c1 == 1.0 and a < 2.0:
            warnings.warn(
                "c1 = 1 removes the impulsive component although alpha < 2; "
                "treating the noise as Gaussian",
                stacklevel=2,
            )
        elif c1 < 1.0:
            warnings.warn(
                "C_alpha vanishes at alpha = 2 so the tail component has no mass; "
                "treating the noise as Gaussian",
                stacklevel=2,
            )
        i_norm = 2.0 * g0 * math.sqrt(math.pi * params.gamma_sg)
        return DerivedConstants(g0=g0, c_alpha=0.0, i_norm=i_norm, c2=None,
                                gaussian=True, impulsive=False)

    c2 = a * params.gamma_s * c_alpha / (g0 * (1.0 - c1))
    i_norm = 2.0 * c1 * g0 * math.sqrt(math.pi * params.gamma_sg) + 2.0 * g0 * (
        1.0 - c1
    ) * c2 ** (1.0 / (a + 1.0)) * _tail_gamma_product(a)
    return DerivedConstants(g0=g0, c_alpha=c_alpha, i_norm=i_norm, c2=c2,
                            gaussian=False, impulsive=(c1 == 0.0),
                            tail_numerator=a * params.gamma_s * c_alpha / i_norm)


def gaussian_weight(params: NoiseParams, consts: DerivedConstants) -> float:
    """Probability mass carried by the Gaussian kernel."""
    if consts.gaussian:
        return 1.0
    return 2.0 * params.c1 * consts.g0 * math.sqrt(math.pi * params.gamma_sg) / consts.i_norm


def pdf(params: NoiseParams, consts: DerivedConstants, n):
    n = np.asarray(n, dtype=float)
    gauss = np.exp(-n * n / (4.0 * params.gamma_sg))
    if consts.gaussian:
        out = gauss / (2.0 * math.sqrt(math.pi * params.gamma_sg))
    else:
        c2 = consts.c2
        with np.errstate(over="ignore"):
            tail = c2 * (1.0 - params.c1) / (np.abs(n) ** (params.alpha + 1.0) + c2)
        out = consts.peak * (params.c1 * gauss + tail)
    return float(out) if out.ndim == 0 else out


def central_mass(params: NoiseParams, consts: DerivedConstants, n):
    """P(|N| <= n), exact."""
    n = np.abs(np.asarray(n, dtype=float))
    wg = gaussian_weight(params, consts)
    out = wg * sps.erf(n / (2.0 * math.sqrt(params.gamma_sg)))
    if wg < 1.0:
        a = params.alpha + 1.0
        with np.errstate(over="ignore", divide="ignore"):
            v = 1.0 / (1.0 + consts.c2 / n**a)
        # the normalised tail kernel maps onto Beta(1/a, 1 - 1/a) through v
        out = out + (1.0 - wg) * sps.betainc(1.0 / a, 1.0 - 1.0 / a, v)
    return float(out) if np.ndim(out) == 0 else out


def cdf(params: NoiseParams, consts: DerivedConstants, n):
    n = np.asarray(n, dtype=float)
    out = 0.5 + 0.5 * np.sign(n) * central_mass(params, consts, n)
    return float(out) if out.ndim == 0 else out


def p_moment(params: NoiseParams, consts: DerivedConstants, p: float) -> float:
    """E|N|^p.

    The Gaussian term uses int_0^inf n^p exp(-n^2/(4 g)) dn
    = (4 g)^((p+1)/2) Gamma((p+1)/2) / 2.
    """
    if not p > 0:
        raise DomainError(f"moment order must be positive, got {p!r}")
    g = params.gamma_sg
    gauss_part = (4.0 * g) ** ((p + 1.0) / 2.0) * gamma_fn((p + 1.0) / 2.0)
    if consts.gaussian:
        return gauss_part / (2.0 * math.sqrt(math.pi * g))
    a = params.alpha
    if not p < a:
        raise DivergentError(f"E|N|^p is infinite for p={p!r} >= alpha={a!r}")
    c1, c2 = params.c1, consts.c2
    tail_part = 2.0 * c2 * (1.0 - c1) * tail_integral(p, c2, a + 1.0)
    return consts.peak * (c1 * gauss_part + tail_part)


def p_moment_printed(params: NoiseParams, consts: DerivedConstants, p: float) -> float:
    """E|N|^p with the Gaussian-term constant (2 gamma_sg)^(p+1) as printed.

    Only used to report how far the printed constant is from quadrature; it
    coincides with ``p_moment`` when gamma_sg = 1.
    """
    if consts.gaussian:
        return (2.0 * params.gamma_sg) ** (p + 1.0) * gamma_fn((p + 1.0) / 2.0) * consts.peak
    a, c1, c2 = params.alpha, params.c1, consts.c2
    first = c1 * consts.peak * (2.0 * params.gamma_sg) ** (p + 1.0) * gamma_fn((p + 1.0) / 2.0)
    second = (
        2.0 * (1.0 - c1) * consts.g0 * c2 ** ((p + 1.0) / (a + 1.0)) / ((p + 1.0) * consts.i_norm)
        * gamma_fn(1.0 + (p + 1.0) / (a + 1.0)) * gamma_fn((a - p) / (a + 1.0))
    )
    return first + second


def sample(params: NoiseParams, consts: DerivedConstants, count: int, seed=None) -> np.ndarray:
    """Draw i.i.d. noise samples by composition.

    The Gaussian kernel is N(0, 2 gamma_sg). For the tail kernel
    1 / (|n|^a + c2) with a = alpha + 1, V = |n|^a / (|n|^a + c2) is
    Beta(1/a, 1 - 1/a), so |n| = (c2 V / (1 - V))^(1/a) exactly.
    """
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    wg = gaussian_weight(params, consts)
    from_gauss = rng.random(count) < wg
    out = np.empty(count)
    ng = int(from_gauss.sum())
    out[from_gauss] = rng.normal(0.0, math.sqrt(2.0 * params.gamma_sg), ng)
    nt = count - ng
    if nt:
        a = params.alpha + 1.0
        v = rng.beta(1.0 / a, 1.0 - 1.0 / a, nt)
        mag = (consts.c2 * v / (1.0 - v)) ** (1.0 / a)
        sign = np.where(rng.random(nt) < 0.5, -1.0, 1.0)
        out[~from_gauss] = sign * mag
    return out


def gsnr_to_power(gsnr_db: float, noise_p_moment: float) -> float:
    return 10.0 ** (gsnr_db / 10.0) * noise_p_moment


def power_to_gsnr(P0: float, noise_p_moment: float) -> float:
    return 10.0 * math.log10(P0 / noise_p_moment)


def noise_quantile(params: NoiseParams, consts: DerivedConstants, mass: float) -> float:
    """Smallest n with P(|N| <= n) >= mass."""
    from scipy.optimize import brentq

    if not 0.0 < mass < 1.0:
        raise DomainError(f"mass must lie in (0, 1), got {mass!r}")
    hi = 2.0 * math.sqrt(params.gamma_sg)
    while central_mass(params, consts, hi) < mass:
        hi *= 2.0
    n = brentq(lambda x: central_mass(params, consts, x) - mass, 0.0, hi, xtol=1e-14, rtol=1e-15)
    while central_mass(params, consts, n) < mass:
        n = math.nextafter(n, math.inf) if n * 1e-12 == 0 else n * (1.0 + 1e-13)
    return n
