"""Closed forms checked against independent quadrature oracles.

Each check yields a ``Check`` row. ``pinned`` rows must stay below their
threshold; ``info`` rows record how far a printed constant or an
approximation lies from the oracle and never fail.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from scipy.integrate import quad

from .approx import build_model, entropy_closed, exact_entropy_numeric, model_entropy_numeric
from .bounds import lower_L2, max_entropy_input, noise_entropy, upper_U
from .config import ValidateThresholds
from .noise import NoiseParams, central_mass, derive_constants, p_moment, p_moment_printed, pdf
from .pam import (
    collision_integral,
    collision_integral_quadrature,
    pam_ser,
    pam_ser_printed,
    pam_spec_at_gsnr,
)


@dataclass(frozen=True)
class Check:
    name: str
    setting: str
    value: float
    reference: float
    residual: float
    threshold: float | None

    @property
    def pinned(self) -> bool:
        return self.threshold is not None

    @property
    def status(self) -> str:
        if not self.pinned:
            return "info"
        return "pass" if self.residual <= self.threshold else "FAIL"


def moment_quadrature(params: NoiseParams, consts, p: float) -> float:
    """E|N|^p by quadrature up to T plus a two-term power-law remainder."""
    scale = math.sqrt(params.gamma_sg)
    f = lambda n: n**p * pdf(params, consts, n)
    t_end = 1e4 * max(scale, 1.0)
    edges = [0.0, scale, 10.0 * scale, 100.0 * scale, t_end]
    edges = sorted(set(e for e in edges if e <= t_end))
    body = math.fsum(quad(f, lo, hi, limit=400, epsabs=0.0, epsrel=1e-13)[0] for lo, hi in zip(edges, edges[1:]))
    tail = 0.0
    if not consts.gaussian:
        a = params.alpha + 1.0
        k = consts.peak * (1.0 - params.c1) * consts.c2
        # c2 / (n^a + c2) = c2 n^-a (1 - c2 n^-a + ...)
        tail = k * (t_end ** (p - a + 1.0) / (a - p - 1.0)
                    - consts.c2 * t_end ** (p - 2.0 * a + 1.0) / (2.0 * a - p - 1.0))
    return 2.0 * (body + tail)


def _rel(a, b):
    return abs(a - b) / abs(b)


def moment_checks(params, consts, orders, thresholds):
    for q in orders:
        oracle = moment_quadrature(params, consts, q)
        closed = p_moment(params, consts, q)
        yield Check("moment closed vs quadrature (relative)", f"p={q:g}", closed, oracle,
                    _rel(closed, oracle), thresholds.moment_rel)
        printed = p_moment_printed(params, consts, q)
        yield Check("moment printed constant vs quadrature (relative)", f"p={q:g}", printed, oracle,
                    _rel(printed, oracle), None)


def central_mass_checks(params, consts, thresholds):
    scale = math.sqrt(params.gamma_sg)
    for n in (0.5 * scale, 2.0 * scale, 20.0 * scale):
        oracle = 2.0 * quad(lambda t: pdf(params, consts, t), 0.0, n, epsabs=0.0, epsrel=1e-13)[0]
        closed = float(central_mass(params, consts, n))
        yield Check("central mass closed vs quadrature", f"n={n:g}", closed, oracle,
                    abs(closed - oracle), thresholds.central_mass)


def entropy_checks(params, consts, thresholds):
    model = build_model(params, consts)
    closed = entropy_closed(model)
    numeric = model_entropy_numeric(model)
    yield Check("approximate-model entropy closed vs quadrature", "nats", closed, numeric,
                abs(closed - numeric), thresholds.entropy_closed)
    exact = exact_entropy_numeric(params, consts)
    yield Check("approximate-model entropy vs exact noise entropy", "nats", closed, exact,
                abs(closed - exact), None)


def ser_checks(params, consts, p, m, gsnr_grid, thresholds):
    for g in gsnr_grid:
        spec = pam_spec_at_gsnr(m, p, g, params, consts)
        oracle = pam_ser(spec, params, consts, method="quadrature")
        closed = pam_ser(spec, params, consts)
        yield Check(f"{m}-PAM error rate closed vs quadrature", f"gsnr={g:g} dB", closed, oracle,
                    abs(closed - oracle), thresholds.ser)
        printed = pam_ser_printed(spec, params, consts)
        yield Check(f"{m}-PAM error rate printed form vs quadrature", f"gsnr={g:g} dB", printed, oracle,
                    abs(printed - oracle), None)


def ghq_checks(params, consts, p, m, gsnr_grid, thresholds, order=40):
    for g in gsnr_grid:
        if g > 20.0:
            continue
        spec = pam_spec_at_gsnr(m, p, g, params, consts)
        oracle = collision_integral_quadrature(spec, params, consts)
        value = collision_integral(spec, params, consts, order)
        # compare on the log scale used by the bound
        yield Check(f"Gauss-Hermite (order {order}) log collision integral vs quadrature",
                    f"gsnr={g:g} dB", math.log(value), math.log(oracle),
                    abs(math.log(value / oracle)), thresholds.ghq)


def gaussian_corner_checks(thresholds):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        params = NoiseParams(2.0, 1.0, 1.0, 1.0, 0.5)
    h_n = noise_entropy(params)
    for snr_db in (0.0, 10.0, 20.0):
        snr = 10.0 ** (snr_db / 10.0)
        shannon = 0.5 * math.log1p(snr)
        l2 = lower_L2(max_entropy_input(2.0, snr), h_n)
        u = upper_U(2.0, snr, 1.0, h_n)
        yield Check("Gaussian lower bound L2 vs Shannon", f"snr={snr_db:g} dB", l2, shannon,
                    abs(l2 - shannon), thresholds.gaussian_bounds)
        yield Check("Gaussian upper bound U vs Shannon", f"snr={snr_db:g} dB", u, shannon,
                    abs(u - shannon), thresholds.gaussian_bounds)


def run_validation(params: NoiseParams, p: float, gsnr_grid, pam_order: int, moment_orders,
                   thresholds: ValidateThresholds | None = None):
    """Yield every check for one scenario, in a fixed order."""
    thresholds = ValidateThresholds() if thresholds is None else thresholds
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        consts = derive_constants(params)
    yield from moment_checks(params, consts, moment_orders, thresholds)
    yield from central_mass_checks(params, consts, thresholds)
    yield from entropy_checks(params, consts, thresholds)
    yield from ser_checks(params, consts, p, pam_order, gsnr_grid, thresholds)
    yield from ghq_checks(params, consts, p, pam_order, gsnr_grid, thresholds)
    yield from gaussian_corner_checks(thresholds)
