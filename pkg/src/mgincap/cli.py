"""Command-line front end.

    mgincap <command> --config <file> [--out <dir>] [--bits] [--seed N] [--step S] [--ghq-order N]

``command`` is one of pdf, moments, entropy, bounds, ba, pam, sweep,
validate, or ``run`` to execute the config's own ``commands`` list. Each
command writes ``<command>.csv``; ``validate`` also writes a plain-text
``validation_report.txt``. Exit status: 0 success, 1 config error, 2 numeric
failure (rows computed before the failure are kept and a FAILED row is
appended).
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
import warnings
from dataclasses import replace

import numpy as np

from .approx import approx_pdf, build_model, entropy_closed, exact_entropy_numeric, model_entropy_numeric
from .ba import capacity_sweep
from .bounds import compute_bounds, noise_entropy
from .config import COMMANDS, ConfigError, ScenarioConfig, load_config
from .errors import MgincapError
from .noise import derive_constants, p_moment, p_moment_printed, pdf
from .pam import pam_bounds, pam_ser_printed, pam_spec_at_gsnr
from .validation import moment_quadrature, run_validation

log = logging.getLogger("mgincap")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2
NUMERIC_ERRORS = (MgincapError, ArithmeticError, ValueError)


def format_value(v) -> str:
    """12 significant digits, '.' decimal point, independent of locale."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".12g")


class CsvSink:
    """Row writer that scales information columns for ``--bits``."""

    def __init__(self, path, columns, info_columns=(), units="nats"):
        self.path = path
        self.columns = list(columns)
        factor = 1.0 / math.log(2.0) if units == "bits" else 1.0
        self.factors = [factor if c in info_columns else 1.0 for c in self.columns]
        self.fh = open(path, "w", encoding="utf-8", newline="")
        self.writer = csv.writer(self.fh, lineterminator="\n")
        self.writer.writerow(self.columns)

    def row(self, values):
        out = []
        for v, f in zip(values, self.factors):
            if f != 1.0 and v is not None and not isinstance(v, str):
                v = float(v) * f
            out.append(format_value(v))
        self.writer.writerow(out)
        self.fh.flush()

    def failure(self, exc):
        message = f"{type(exc).__name__}: {exc}".replace("\n", " ")
        self.writer.writerow(["FAILED", message] + [""] * (len(self.columns) - 2))
        self.fh.flush()

    def close(self):
        self.fh.close()


def _consts(params):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return derive_constants(params)


# ---------------------------------------------------------------------------
# commands; each takes (config, sink factory) and writes rows


def cmd_pdf(cfg: ScenarioConfig, open_sink):
    params = cfg.noise
    consts = _consts(params)
    model = build_model(params, consts)
    sink = open_sink(["n", "pdf", "approx_pdf"])
    scale = math.sqrt(params.gamma_sg)
    for n in np.linspace(-cfg.pdf_n_max, cfg.pdf_n_max, cfg.pdf_points) * scale:
        sink.row([n, float(pdf(params, consts, n)), float(approx_pdf(model, abs(n)))])


def cmd_moments(cfg: ScenarioConfig, open_sink):
    params = cfg.noise
    consts = _consts(params)
    sink = open_sink(["p", "moment", "moment_quadrature", "moment_printed", "relative_error"])
    for q in cfg.moment_orders:
        closed = p_moment(params, consts, q)
        oracle = moment_quadrature(params, consts, q)
        sink.row([q, closed, oracle, p_moment_printed(params, consts, q), abs(closed - oracle) / oracle])


def cmd_entropy(cfg: ScenarioConfig, open_sink):
    """Noise entropy as the noise is scaled to each GSNR against a fixed signal power."""
    params = cfg.noise
    consts = _consts(params)
    m = p_moment(params, consts, cfg.p)
    sink = open_sink(["gsnr_db", "noise_scale", "h_closed", "h_model_numeric", "h_exact_numeric"],
                     info_columns=("h_closed", "h_model_numeric", "h_exact_numeric"))
    for g in cfg.gsnr_grid:
        # E|sN|^p = reference_power / 10^(g/10)
        s = (cfg.reference_power / (10.0 ** (g / 10.0) * m)) ** (1.0 / cfg.p)
        scaled = params.scaled(s)
        sc = _consts(scaled)
        model = build_model(scaled, sc)
        sink.row([g, s, entropy_closed(model), model_entropy_numeric(model), exact_entropy_numeric(scaled, sc)])


def cmd_bounds(cfg: ScenarioConfig, open_sink):
    params = cfg.noise
    h_nm = noise_entropy(params, cfg.noise_entropy)
    sink = open_sink(["gsnr_db", "p0", "l1", "l2", "u", "c_asym", "h_n"],
                     info_columns=("l1", "l2", "u", "c_asym", "h_n"))
    for g in cfg.gsnr_grid:
        b = compute_bounds(params, cfg.p, g, moment_bound=cfg.moment_bound, with_l1=cfg.with_l1,
                           seed=cfg.seed, h_nm=h_nm)
        sink.row([g, b.P0, b.l1, b.l2, b.u, b.c_asymptotic, b.h_nm])


def _ba_options(cfg):
    o = cfg.ba
    return dict(tol=o.tol, step=o.step, input_ratio=o.input_ratio, amplitude_factor=o.amplitude_factor,
                max_points=o.max_points)


def cmd_ba(cfg: ScenarioConfig, open_sink):
    sink = open_sink(["gsnr_db", "c_ba", "c_ba_upper", "kkt", "iterations", "step"],
                     info_columns=("c_ba", "c_ba_upper", "kkt"))
    for pt in _capacity_points(cfg, cfg.noise):
        sink.row([pt.gsnr_db, pt.capacity, pt.upper, pt.kkt, pt.iterations, pt.step])


def _capacity_points(cfg, params, grid=None):
    """Capacity per grid point in grid order.

    With one worker points are computed and yielded one by one; with more,
    the pool computes them and this single collector yields them in order.
    """
    grid = cfg.gsnr_grid if grid is None else grid
    if cfg.ba.workers <= 1:
        for g in grid:
            yield capacity_sweep(params, cfg.p, [g], **_ba_options(cfg))[0]
    else:
        yield from capacity_sweep(params, cfg.p, grid, workers=cfg.ba.workers, **_ba_options(cfg))


def cmd_pam(cfg: ScenarioConfig, open_sink):
    params = cfg.noise
    consts = _consts(params)
    h_nm = noise_entropy(params, "numeric")
    sink = open_sink(["gsnr_db", "m", "amplitude", "pe", "pe_printed", "lhat1", "lhat2", "mi_numeric"],
                     info_columns=("lhat1", "lhat2", "mi_numeric"))
    for g in cfg.gsnr_grid:
        spec = pam_spec_at_gsnr(cfg.pam_order, cfg.p, g, params, consts, cfg.pam_normalization)
        b = pam_bounds(spec, params, consts, order=cfg.ghq_order, h_nm=h_nm, gsnr_db=g)
        sink.row([g, cfg.pam_order, spec.a, b.pe, pam_ser_printed(spec, params, consts),
                  b.lhat1, b.lhat2, b.mi_numeric])


def cmd_sweep(cfg: ScenarioConfig, open_sink):
    """Capacity and bounds for every alpha in the sweep.

    In the ``power`` frame a grid value fixes the signal budget
    P0 = 10^(g/10) E|N_ref|^p against the configured noise, and each alpha
    runs at its own equivalent GSNR; in the ``gsnr`` frame each alpha is
    normalised by its own p-th moment.
    """
    sink = open_sink(["alpha", "gsnr_db", "gsnr_own_db", "p0", "l2", "c_ba", "u", "c_asym"],
                     info_columns=("l2", "c_ba", "u", "c_asym"))
    m_ref = p_moment(cfg.noise, _consts(cfg.noise), cfg.p)
    for alpha in cfg.sweep_alphas:
        params = replace(cfg.noise, alpha=alpha)
        m = p_moment(params, _consts(params), cfg.p)
        h_nm = noise_entropy(params, cfg.noise_entropy)
        if cfg.sweep_frame == "power":
            own = [g + 10.0 * math.log10(m_ref / m) for g in cfg.gsnr_grid]
        else:
            own = list(cfg.gsnr_grid)
        for g, pt in zip(cfg.gsnr_grid, _capacity_points(cfg, params, own)):
            b = compute_bounds(params, cfg.p, pt.gsnr_db, moment_bound=cfg.moment_bound, h_nm=h_nm)
            sink.row([alpha, g, pt.gsnr_db, b.P0, b.l2, pt.capacity, b.u, b.c_asymptotic])


def cmd_validate(cfg: ScenarioConfig, open_sink):
    sink = open_sink(["check", "setting", "value", "reference", "residual", "threshold", "status"])
    checks = []
    for c in run_validation(cfg.noise, cfg.p, cfg.gsnr_grid, cfg.pam_order, cfg.moment_orders, cfg.thresholds):
        checks.append(c)
        sink.row([c.name, c.setting, c.value, c.reference, c.residual, c.threshold, c.status])
    report = os.path.join(os.path.dirname(sink.path), "validation_report.txt")
    with open(report, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_report(cfg, checks))
    failed = [c for c in checks if c.status == "FAIL"]
    if failed:
        raise ValidationFailure(f"{len(failed)} pinned check(s) above threshold: "
                                + "; ".join(f"{c.name} [{c.setting}]" for c in failed))


class ValidationFailure(MgincapError, RuntimeError):
    """A pinned closed form drifted from its oracle."""


def render_report(cfg: ScenarioConfig, checks) -> str:
    n = cfg.noise
    lines = [
        "mgincap validation report",
        f"noise: alpha={n.alpha:g} gamma_s={n.gamma_s:g} gamma_g={n.gamma_g:g} c1={n.c1:g} gamma_sg={n.gamma_sg:g}",
        f"p={cfg.p:g}  pam_order={cfg.pam_order}  gsnr_grid={', '.join(format(g, 'g') for g in cfg.gsnr_grid)}",
        "values in nats where applicable; 'info' rows are reported, not enforced",
        "",
    ]
    width = max(len(c.name) for c in checks)
    for c in checks:
        limit = "-" if c.threshold is None else format(c.threshold, ".1e")
        lines.append(f"{c.status:<4}  {c.name:<{width}}  {c.setting:<14}  residual={c.residual:.3e}  "
                     f"threshold={limit}")
    pinned = [c for c in checks if c.pinned]
    passed = sum(c.status == "pass" for c in pinned)
    lines += ["", f"pinned checks passed: {passed}/{len(pinned)}", ""]
    return "\n".join(lines)


RUNNERS = {
    "pdf": cmd_pdf,
    "moments": cmd_moments,
    "entropy": cmd_entropy,
    "bounds": cmd_bounds,
    "ba": cmd_ba,
    "pam": cmd_pam,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


def run(cfg: ScenarioConfig, commands=None) -> int:
    """Execute commands for one scenario; returns the exit status."""
    commands = list(commands if commands is not None else cfg.commands)
    if not commands:
        raise ConfigError("no commands to run: name one on the command line or set [scenario] commands")
    os.makedirs(cfg.output_path, exist_ok=True)
    status = EXIT_OK
    for name in commands:
        path = os.path.join(cfg.output_path, f"{name}.csv")
        sinks = []

        def open_sink(columns, info_columns=(), _path=path):
            sink = CsvSink(_path, columns, info_columns, cfg.units)
            sinks.append(sink)
            return sink

        log.info("running %s -> %s", name, path)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                RUNNERS[name](cfg, open_sink)
        except NUMERIC_ERRORS as exc:
            log.error("%s failed: %s", name, exc)
            if sinks:
                sinks[-1].failure(exc)
            else:
                CsvSink(path, ["status", "message"]).failure(exc)
            status = EXIT_NUMERIC
        finally:
            for sink in sinks:
                sink.close()
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mgincap", description="Capacity bounds for mixed Gaussian-impulsive noise.")
    parser.add_argument("command", choices=(*COMMANDS, "run"), help="what to compute ('run' uses the config's list)")
    parser.add_argument("--config", required=True, help="scenario file")
    parser.add_argument("--out", help="output directory (overrides [scenario] output_path)")
    parser.add_argument("--bits", action="store_true", help="report information quantities in bits")
    parser.add_argument("--seed", type=int, help="random seed (overrides [scenario] seed)")
    parser.add_argument("--step", type=float, help="discretisation step for the capacity solver")
    parser.add_argument("--ghq-order", type=int, help="Gauss-Hermite order for the PAM bound")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.step is not None and not args.step > 0:
            raise ConfigError(f"--step must be positive, got {args.step!r}")
        if args.ghq_order is not None and args.ghq_order < 10:
            raise ConfigError(f"--ghq-order must be >= 10, got {args.ghq_order!r}")
        if args.seed is not None and args.seed < 0:
            raise ConfigError(f"--seed must be >= 0, got {args.seed!r}")
        cfg = cfg.with_overrides(
            output_path=args.out,
            units="bits" if args.bits else None,
            seed=args.seed,
            ghq_order=args.ghq_order,
            step=args.step,
        )
        commands = None if args.command == "run" else [args.command]
        return run(cfg, commands)
    except ConfigError as exc:
        print(f"mgincap: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
