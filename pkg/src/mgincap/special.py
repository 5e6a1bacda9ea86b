"""Special functions and quadrature kernels.

Everything here is a pure function of its arguments. Series are summed with
``math.fsum`` and stopped on a relative tail tolerance of 1e-14, capped at a
fixed number of terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DivergentError, DomainError, UnsupportedArgumentError

SERIES_MAX_TERMS = 500
SERIES_RTOL = 1e-14

_SQRT_PI = math.sqrt(math.pi)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _is_nonpositive_int(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def _rgamma(x: float) -> float:
    """1/Gamma(x), zero at the poles."""
    if _is_nonpositive_int(x):
        return 0.0
    return 1.0 / math.gamma(x)


def gamma_fn(a: float) -> float:
    """Gamma function for positive real arguments."""
    if not a > 0:
        raise DomainError(f"gamma_fn needs a > 0, got {a!r}")
    return math.gamma(a)


# ---------------------------------------------------------------------------
# hypergeometric series


def _pfq_series(num, den, z, max_terms=SERIES_MAX_TERMS, rtol=SERIES_RTOL):
    """Sum of the pFq power series, raising if the tail never gets small."""
    term = 1.0
    terms = [1.0]
    quiet = 0
    for k in range(max_terms):
        ratio = z / (k + 1.0)
        for a in num:
            ratio *= a + k
        for b in den:
            ratio /= b + k
        term *= ratio
        if term == 0.0:
            return math.fsum(terms)
        terms.append(term)
        # two consecutive small terms guard against a single accidental near-zero
        if abs(term) <= rtol * abs(math.fsum(terms)):
            quiet += 1
            if quiet >= 2:
                return math.fsum(terms)
        else:
            quiet = 0
    raise ConvergenceError(
        f"hypergeometric series did not converge in {max_terms} terms (z={z!r})"
    )


def _check_lower_params(*bs):
    for b in bs:
        if _is_nonpositive_int(b):
            raise DomainError(f"lower parameter {b!r} is a non-positive integer")


def gauss_2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric function 2F1(a, b; c; z) for real z < 1.

    |z| <= 0.5 uses the power series directly. For z < -1 the 1/z linear
    transform is applied, for -1 <= z < -0.5 the Pfaff transform z/(z-1), and
    for 0.5 < z < 1 the 1-z connection formula.
    """
    _check_lower_params(c)
    z = float(z)
    if z == 0.0:
        return 1.0
    if z >= 1.0:
        raise UnsupportedArgumentError(f"2F1 is only evaluated for z < 1, got {z!r}")
    if abs(z) <= 0.5:
        return _pfq_series((a, b), (c,), z)
    if z < -1.0:
        return _2f1_inverse_z(a, b, c, z)
    if z < 0.0:
        w = z / (z - 1.0)
        return (1.0 - z) ** (-a) * _pfq_series((a, c - b), (c,), w)
    return _2f1_one_minus_z(a, b, c, z)


def _2f1_inverse_z(a, b, c, z):
    if float(b - a).is_integer():
        # coincident poles in the 1/z formula; the Pfaff series still converges
        # (slowly) for moderate |z|
        w = z / (z - 1.0)
        try:
            return (1.0 - z) ** (-a) * _pfq_series((a, c - b), (c,), w)
        except ConvergenceError:
            return _2f1_euler_integral(a, b, c, z)
    gc = math.gamma(c)
    zi = 1.0 / z
    t1 = 0.0
    k1 = gc * math.gamma(b - a) * _rgamma(b) * _rgamma(c - a)
    if k1 != 0.0:
        t1 = k1 * (-z) ** (-a) * gauss_2f1(a, a + 1.0 - c, a + 1.0 - b, zi)
    t2 = 0.0
    k2 = gc * math.gamma(a - b) * _rgamma(a) * _rgamma(c - b)
    if k2 != 0.0:
        t2 = k2 * (-z) ** (-b) * gauss_2f1(b, b + 1.0 - c, b + 1.0 - a, zi)
    return t1 + t2


def _2f1_euler_integral(a, b, c, z):
    """Euler integral representation, valid when c > b > 0 (or with a, b swapped)."""
    from scipy.integrate import quad

    if not c > b > 0:
        a, b = b, a
    if not c > b > 0:
        raise UnsupportedArgumentError(
            "2F1 for large negative z with integer b-a needs c > b > 0 or c > a > 0"
        )
    val, _ = quad(
        lambda t: (1.0 - z * t) ** (-a), 0.0, 1.0,
        weight="alg", wvar=(b - 1.0, c - b - 1.0), epsabs=0.0, epsrel=1e-13, limit=200,
    )
    return math.gamma(c) / (math.gamma(b) * math.gamma(c - b)) * val


def _2f1_one_minus_z(a, b, c, z):
    s = c - a - b
    if float(s).is_integer():
        raise UnsupportedArgumentError(
            "2F1 near z=1 with integer c-a-b needs the logarithmic formula"
        )
    w = 1.0 - z
    gc = math.gamma(c)
    t1 = gc * math.gamma(s) * _rgamma(c - a) * _rgamma(c - b)
    if t1 != 0.0:
        t1 *= _pfq_series((a, b), (1.0 - s,), w)
    t2 = gc * math.gamma(-s) * _rgamma(a) * _rgamma(b)
    if t2 != 0.0:
        t2 *= w**s * _pfq_series((c - a, c - b), (1.0 + s,), w)
    return t1 + t2


def hyper_3f2(a1, a2, a3, b1, b2, z, max_terms=SERIES_MAX_TERMS) -> float:
    """Generalised hypergeometric 3F2.

    Direct series for |z| <= 0.9. Closer to the unit circle (including z = 1
    when b1 + b2 - a1 - a2 - a3 > 0) the Euler integral over a 2F1 is used,
    which needs some b > a3 > 0 after permuting the upper parameters.
    """
    _check_lower_params(b1, b2)
    z = float(z)
    if abs(z) <= 0.9:
        return _pfq_series((a1, a2, a3), (b1, b2), z, max_terms=max_terms)
    if z > 1.0 or z < -1.0:
        raise UnsupportedArgumentError(f"3F2 is only evaluated for |z| <= 1, got {z!r}")
    if z == 1.0 and not b1 + b2 - a1 - a2 - a3 > 0:
        raise DivergentError("3F2 diverges at z = 1 unless b1 + b2 > a1 + a2 + a3")
    return _3f2_euler_integral((a1, a2, a3), (b1, b2), z)


def _3f2_euler_integral(upper, lower, z):
    from scipy.integrate import quad

    for i in range(3):
        for j in range(2):
            a3, b2 = upper[i], lower[j]
            if b2 > a3 > 0:
                a1, a2 = (upper[k] for k in range(3) if k != i)
                b1 = lower[1 - j]
                break
        else:
            continue
        break
    else:
        raise UnsupportedArgumentError("3F2 near |z| = 1 needs some lower b > upper a > 0")
    # the 2F1 itself is evaluated at z*t, so z = 1 is approached but never hit
    inner = lambda t: gauss_2f1(a1, a2, b1, z * t) if z * t < 1.0 else _2f1_at_one(a1, a2, b1)
    val, _ = quad(
        inner, 0.0, 1.0, weight="alg", wvar=(a3 - 1.0, b2 - a3 - 1.0),
        epsabs=0.0, epsrel=1e-13, limit=400,
    )
    return math.gamma(b2) / (math.gamma(a3) * math.gamma(b2 - a3)) * val


def _2f1_at_one(a, b, c):
    """Gauss summation, valid for c - a - b > 0."""
    if not c - a - b > 0:
        raise DivergentError("2F1 diverges at z = 1 unless c > a + b")
    return math.gamma(c) * math.gamma(c - a - b) * _rgamma(c - a) * _rgamma(c - b)


def tail_integral(r: float, c: float, a: float) -> float:
    """Integral of x**r / (c + x**a) over (0, inf)."""
    if not c > 0:
        raise DomainError(f"c must be positive, got {c!r}")
    if not r > -1.0:
        raise DivergentError(f"integrand not integrable at 0 for r={r!r}")
    if not r + 1.0 < a:
        raise DivergentError(f"integral diverges at infinity: r+1={r + 1.0!r} >= a={a!r}")
    s = (r + 1.0) / a
    return c ** ((r - a + 1.0) / a) * math.gamma(1.0 + s) * math.gamma((a - r - 1.0) / a) / (r + 1.0)


def gaussian_tail(z, standard: bool = False):
    """Gaussian tail function.

    With ``standard=False`` this is (1/sqrt(2 pi)) * int_z^inf exp(-t**2) dt,
    the form printed alongside the capacity bounds; it is not a probability.
    With ``standard=True`` it is the usual Q(z) = P(N(0,1) > z).
    Accepts scalars or arrays.
    """
    from scipy.special import erfc

    z = np.asarray(z, dtype=float)
    if standard:
        out = 0.5 * erfc(z / math.sqrt(2.0))
    else:
        out = erfc(z) * (_SQRT_PI / 2.0) / _SQRT_2PI
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Hermite rule for the weight exp(-x**2)."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def integrate(self, f) -> float:
        """Approximate int exp(-x**2) f(x) dx."""
        return float(np.dot(self.weights, f(self.nodes)))


def gauss_hermite_rule(order: int) -> QuadratureRule:
    if not (isinstance(order, (int, np.integer)) and 1 <= order <= 128):
        raise DomainError(f"Gauss-Hermite order must be an integer in [1, 128], got {order!r}")
    nodes, weights = np.polynomial.hermite.hermgauss(int(order))
    # hermgauss is symmetric up to rounding; enforce it exactly
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    return QuadratureRule(nodes=nodes, weights=weights, order=int(order))
