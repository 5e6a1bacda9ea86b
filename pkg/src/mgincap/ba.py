"""Numerical capacity by moment-constrained Blahut-Arimoto.

The additive channel is discretised on a uniform output grid. Inputs sit on a
coarser sub-grid of the same lattice, so every row of W(y|x) is a clipped,
renormalised shift of one kernel and both BA products (the output law and the
per-input divergence) are convolutions evaluated with FFTs. A dense
transition matrix is also supported for small generic channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy.optimize import brentq
from scipy.special import logsumexp, xlogy

from .errors import ConvergenceError, DomainError, ResolutionError
from .noise import NoiseParams, derive_constants, noise_quantile, p_moment, pdf

TRUNCATION_MASS = 0.999
_Q_FLOOR = 1e-300


def truncation_point(params: NoiseParams, consts=None, mass: float = TRUNCATION_MASS) -> float:
    """Smallest n_T with P(|N| <= n_T) > mass."""
    consts = derive_constants(params) if consts is None else consts
    return noise_quantile(params, consts, mass)


@dataclass
class DiscreteChannel:
    """Finite-alphabet channel.

    In convolution form ``kernel[t]`` (t = -(ny-1) .. ny-1, stored with offset
    ny-1) is the unnormalised output weight at an offset of t output steps and
    input i sits on output index ``x_index[i]``. Row i is the kernel restricted
    to the output window divided by ``row_mass[i]``. In dense form ``w`` holds
    the rows directly.
    """

    x_grid: np.ndarray
    y_grid: np.ndarray
    step: float
    kernel: np.ndarray | None = None
    x_index: np.ndarray | None = None
    row_mass: np.ndarray | None = None
    w_dense: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def dense(cls, x_grid, y_grid, w, step=1.0) -> "DiscreteChannel":
        w = np.asarray(w, dtype=float)
        if np.any(w < 0) or not np.allclose(w.sum(axis=1), 1.0, atol=1e-9):
            raise DomainError("rows of a dense channel must be probability vectors")
        return cls(np.asarray(x_grid, float), np.asarray(y_grid, float), step, w_dense=w)

    @property
    def is_convolution(self) -> bool:
        return self.w_dense is None

    @property
    def w(self) -> np.ndarray:
        """Transition matrix (materialised on demand in convolution form)."""
        if not self.is_convolution:
            return self.w_dense
        ny = self.y_grid.size
        offsets = np.arange(ny)[None, :] - self.x_index[:, None] + (ny - 1)
        return self.kernel[offsets] / self.row_mass[:, None]

    # -- convolution machinery -------------------------------------------

    def _setup(self):
        if "nfft" in self._cache:
            return self._cache
        ny = self.y_grid.size
        k = self.kernel
        nfft = sfft.next_fast_len(ny + k.size - 1, real=True)
        kf = sfft.rfft(k, nfft)
        ones = np.ones(ny)
        klogk = xlogy(k, k)
        self._cache.update(
            nfft=nfft,
            kf=kf,
            row_entropy_sum=self._correlate_with(klogk, ones, nfft),
        )
        return self._cache

    def _correlate_with(self, kern, g, nfft):
        """sum_j kern[j - l] g[j] for every output index l (kernel is even)."""
        ny = self.y_grid.size
        full = sfft.irfft(sfft.rfft(g, nfft) * sfft.rfft(kern, nfft), nfft)
        return full[ny - 1 : 2 * ny - 1]

    def _conv(self, g):
        c = self._setup()
        ny = self.y_grid.size
        full = sfft.irfft(sfft.rfft(g, c["nfft"]) * c["kf"], c["nfft"])
        return full[ny - 1 : 2 * ny - 1]

    def output_pmf(self, pmf) -> np.ndarray:
        if not self.is_convolution:
            return pmf @ self.w_dense
        u = np.zeros(self.y_grid.size)
        np.add.at(u, self.x_index, pmf / self.row_mass)
        return np.maximum(self._conv(u), 0.0)

    def divergences(self, pmf):
        """(D(W_x || q) for every input x, output law q)."""
        q = self.output_pmf(pmf)
        logq = np.log(np.maximum(q, _Q_FLOOR))
        if not self.is_convolution:
            w = self.w_dense
            d = np.sum(xlogy(w, w), axis=1) - w @ logq
            return d, q
        c = self._setup()
        z = self.row_mass
        cross = self._conv(logq)[self.x_index]
        ent = c["row_entropy_sum"][self.x_index]
        d = (ent - cross) / z - np.log(z)
        return d, q


def _grid_extent(params, consts, p, P0, amplitude_factor):
    n_t = truncation_point(params, consts)
    return n_t, amplitude_factor * P0 ** (1.0 / p)


def choose_step(params, consts, p, P0, step=0.01, input_ratio=4, amplitude_factor=8.0,
                max_points=2**20):
    """Output step: ``step`` unless the grid would exceed ``max_points``.

    Coarsening is refused once the step passes a twentieth of the noise's
    interquartile width, where the kernel stops being resolved.
    """
    n_t, amp = _grid_extent(params, consts, p, P0, amplitude_factor)
    span = 2.0 * (amp + n_t)
    iqr = 2.0 * noise_quantile(params, consts, 0.5)
    if span / step > max_points:
        step = span / max_points
    if step > iqr / 20.0:
        raise ResolutionError(
            f"output step {step:.4g} exceeds a twentieth of the noise IQR ({iqr:.4g}); "
            "raise max_points or lower the GSNR"
        )
    return step


def discretize(
    params: NoiseParams,
    consts=None,
    p: float | None = None,
    P0: float | None = None,
    step: float = 0.01,
    input_ratio: int = 4,
    amplitude_factor: float = 8.0,
    amplitude: float | None = None,
) -> DiscreteChannel:
    """Discretised channel Y = X + N.

    Inputs lie on {k * input_ratio * step : |x| <= amplitude}, with amplitude
    defaulting to amplitude_factor * P0^(1/p). Outputs cover
    [-(amplitude + n_T), amplitude + n_T] at spacing ``step``; each row is
    pdf(y - x) * step over that window, renormalised.
    """
    consts = derive_constants(params) if consts is None else consts
    if not step > 0:
        raise DomainError(f"step must be positive, got {step!r}")
    n_t = truncation_point(params, consts)
    if amplitude is None:
        if p is None or P0 is None:
            raise DomainError("give either amplitude or both p and P0")
        amplitude = amplitude_factor * P0 ** (1.0 / p)
    m = int(input_ratio)
    nx_half = int(math.floor(amplitude / (m * step)))
    ny_half = nx_half * m + int(math.ceil(n_t / step))
    ny = 2 * ny_half + 1
    y_grid = (np.arange(ny) - ny_half) * step
    x_index = ny_half + m * np.arange(-nx_half, nx_half + 1)
    x_grid = y_grid[x_index]

    t = np.arange(-(ny - 1), ny) * step
    kernel = pdf(params, consts, t) * step
    # mass of each row inside the window, before renormalisation
    window_mass = DiscreteChannel(x_grid, y_grid, step, kernel=kernel, x_index=x_index,
                                  row_mass=np.ones(x_grid.size))
    setup = window_mass._setup()
    row_mass = window_mass._correlate_with(kernel, np.ones(ny), setup["nfft"])[x_index]
    # the truncation removes about 1 - TRUNCATION_MASS at the edge rows; anything
    # well beyond that is under-resolution of the kernel
    if np.max(np.abs(row_mass - 1.0)) > 0.01:
        raise ResolutionError(
            f"row renormalisation of {np.max(np.abs(row_mass - 1.0)):.3%} exceeds 1%; "
            "the step is too coarse for this noise"
        )
    ch = DiscreteChannel(x_grid, y_grid, step, kernel=kernel, x_index=x_index, row_mass=row_mass)
    ch._cache.update(setup)
    return ch


@dataclass(frozen=True)
class BAResult:
    capacity: float
    input_pmf: np.ndarray
    iterations: int
    kkt_residual: float
    lam: float
    upper: float
    history: np.ndarray
    converged: bool = True

    @property
    def capacity_bits(self) -> float:
        return self.capacity / math.log(2.0)


def _project(logw, cost, P0):
    """Normalised exp(logw - lam * cost) with the smallest lam >= 0 meeting the budget."""
    def mean_cost(lam):
        lw = logw - lam * cost
        pm = np.exp(lw - logsumexp(lw))
        return pm, float(pm @ cost)

    pm, mc = mean_cost(0.0)
    if mc <= P0:
        return pm, 0.0
    hi = 1.0 / P0
    while mean_cost(hi)[1] > P0:
        hi *= 4.0
        if hi > 1e12:
            raise DomainError("moment budget is infeasible on this input grid")
    lam = brentq(lambda v: mean_cost(v)[1] - P0, 0.0, hi, xtol=1e-15, rtol=1e-13)
    pm, mc = mean_cost(lam)
    if mc > P0:
        # land on the feasible side of the root
        lam = lam * (1.0 + 1e-12) + 1e-300
        pm, mc = mean_cost(lam)
    return pm, lam


def _dual_upper(d, cost, P0, lam_hint):
    """min over lam >= 0 of max_x [D(x) + lam (P0 - cost(x))], refined near lam_hint."""
    f = lambda lam: float(np.max(d + lam * (P0 - cost)))
    best_lam, best = 0.0, f(0.0)
    if lam_hint > 0:
        lo, hi = 0.0, 4.0 * lam_hint
        for _ in range(60):
            a, b = lo + (hi - lo) * 0.382, lo + (hi - lo) * 0.618
            if f(a) <= f(b):
                hi = b
            else:
                lo = a
        cand = 0.5 * (lo + hi)
        for lam in (cand, lam_hint):
            v = f(lam)
            if v < best:
                best_lam, best = lam, v
    return best, best_lam


def ba_capacity(
    channel: DiscreteChannel,
    p: float | None = None,
    P0: float | None = None,
    tol: float = 1e-3,
    max_iter: int = 20000,
    init=None,
    kkt_factor: float | None = 10.0,
    relaxation: float = 8.0,
) -> BAResult:
    """Capacity of ``channel`` under sum pmf |x|^p <= P0 (unconstrained if P0 is None).

    The plain iteration is an exact alternating-maximisation step: the new
    input is p(x) exp(D(x) - lam |x|^p), normalised, with lam >= 0 the
    smallest value meeting the budget, so mutual information never decreases.
    With ``relaxation`` > 1 the exponent is scaled by an adaptive factor
    mu <= relaxation; a step that would lower the mutual information is
    replaced by the plain step, so the iterates stay monotone.

    The run stops once the dual certificate max_x [D(x) + lam (P0 - |x|^p)]
    is within ``tol`` of the current mutual information and, unless
    ``kkt_factor`` is None, the KKT residual is below ``kkt_factor * tol``.
    """
    x = channel.x_grid
    if P0 is None:
        cost = np.zeros_like(x)
        budget = 1.0
    else:
        if p is None:
            raise DomainError("a moment budget needs the order p")
        cost = np.abs(x) ** p
        budget = P0
        if cost.min() > budget:
            raise DomainError("moment budget is infeasible on this input grid")
    if relaxation < 1.0:
        raise DomainError(f"relaxation must be >= 1, got {relaxation!r}")

    if init is None:
        if P0 is None:
            logw = np.zeros_like(x)
        else:
            logw = -cost / (p * P0)
    else:
        logw = np.log(np.maximum(np.asarray(init, float), 1e-300))
    pmf, lam = _project(logw, cost, budget)

    history = []
    upper = math.inf
    mu = 1.0
    d, _ = channel.divergences(pmf)
    mi = float(pmf @ d)
    for it in range(1, max_iter + 1):
        history.append(mi)
        upper, lam_best = _dual_upper(d, cost, budget, lam)
        if upper - mi < tol:
            kkt = _kkt_from(d, pmf, cost, budget, mi, lam_best)
            if kkt_factor is None or kkt < kkt_factor * tol:
                return BAResult(mi, pmf, it, kkt, lam_best, upper, np.array(history))
        log_pmf = np.log(np.maximum(pmf, 1e-300))
        new_pmf, new_lam = _project(log_pmf + mu * d, cost, budget)
        new_d, _ = channel.divergences(new_pmf)
        new_mi = float(new_pmf @ new_d)
        if mu > 1.0 and new_mi < mi:
            mu = 1.0
            new_pmf, new_lam = _project(log_pmf + d, cost, budget)
            new_d, _ = channel.divergences(new_pmf)
            new_mi = float(new_pmf @ new_d)
        else:
            mu = min(relaxation, 1.5 * mu)
        pmf, lam, d, mi = new_pmf, new_lam, new_d, new_mi
    history.append(mi)
    res = BAResult(mi, pmf, max_iter, 0.0, lam, upper, np.array(history), converged=False)
    raise ConvergenceError(
        f"BA did not reach tol={tol} in {max_iter} iterations (gap {upper - mi:.3g})",
        result=_with_kkt(channel, res, cost, budget, d),
    )


def _kkt_from(d, pmf, cost, budget, capacity, lam):
    k = capacity - d + lam * (cost - budget)
    neg = max(0.0, -float(np.min(k)))
    support = pmf > 1e-6
    dev = float(np.max(np.abs(k[support]))) if np.any(support) else 0.0
    return neg + dev


def _with_kkt(channel, res, cost, budget, d):
    r = _kkt_from(d, res.input_pmf, cost, budget, res.capacity, res.lam)
    return BAResult(res.capacity, res.input_pmf, res.iterations, r, res.lam, res.upper,
                    res.history, res.converged)


def kkt_residual(channel: DiscreteChannel, result: BAResult, p: float | None = None,
                 P0: float | None = None) -> float:
    """Optimality residual of an input pmf.

    With K(x) = C - D(x) + lam (|x|^p - P0) the optimum has K >= 0 everywhere
    and K = 0 on the support. The residual adds the worst violation of the
    first to the worst deviation of the second over points with mass > 1e-6.
    """
    x = channel.x_grid
    cost = np.zeros_like(x) if P0 is None else np.abs(x) ** p
    budget = 1.0 if P0 is None else P0
    d, _ = channel.divergences(result.input_pmf)
    return _kkt_from(d, result.input_pmf, cost, budget, result.capacity, result.lam)


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepPoint:
    gsnr_db: float
    capacity: float
    capacity_bits: float
    lam: float
    iterations: int
    step: float
    upper: float
    kkt: float


def capacity_at_gsnr(
    params: NoiseParams,
    p: float,
    gsnr_db: float,
    tol: float = 1e-3,
    step: float = 0.01,
    input_ratio: int = 4,
    amplitude_factor: float = 8.0,
    max_points: int = 2**20,
    max_iter: int = 20000,
) -> SweepPoint:
    """BA capacity at one GSNR, P0 = 10^(gsnr/10) E|N|^p, in the noise's own frame."""
    consts = derive_constants(params)
    P0 = 10.0 ** (gsnr_db / 10.0) * p_moment(params, consts, p)
    h = choose_step(params, consts, p, P0, step, input_ratio, amplitude_factor, max_points)
    ch = discretize(params, consts, p, P0, h, input_ratio, amplitude_factor)
    res = ba_capacity(ch, p, P0, tol=tol, max_iter=max_iter)
    return SweepPoint(gsnr_db, res.capacity, res.capacity_bits, res.lam, res.iterations, h,
                      res.upper, res.kkt_residual)


def _sweep_worker(args):
    params, p, g, kw = args
    return capacity_at_gsnr(params, p, g, **kw)


def capacity_sweep(params: NoiseParams, p: float, gsnr_list, workers: int = 1, **options):
    """Capacity for each GSNR; points are independent and may run in worker processes."""
    jobs = [(params, p, float(g), options) for g in gsnr_list]
    if workers <= 1:
        return [_sweep_worker(j) for j in jobs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_sweep_worker, jobs))
