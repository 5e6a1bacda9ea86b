"""Scenario configuration: a flat INI file with one scenario per file.

Example::

    [noise]
    alpha = 1.5
    gamma_s = 1
    gamma_g = 1
    c1 = 0.5
    gamma_sg = 1

    [scenario]
    p = 1.1
    gsnr_grid = -5, 0, 5, 10
    commands = bounds, ba
    units = nats
    seed = 0
    pam_order = 4
    output_path = results

Optional sections ``[ba]``, ``[bounds]``, ``[pam]``, ``[sweep]``, ``[pdf]``,
``[moments]`` and ``[validate]`` tune individual commands.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, replace

from .errors import MgincapError
from .noise import NoiseParams

COMMANDS = ("pdf", "moments", "entropy", "bounds", "ba", "pam", "sweep", "validate")


class ConfigError(MgincapError, ValueError):
    """Invalid scenario file; the message names the file, line and field."""


@dataclass(frozen=True)
class BAOptions:
    tol: float = 1e-3
    step: float = 0.01
    input_ratio: int = 4
    amplitude_factor: float = 8.0
    max_points: int = 2**20
    workers: int = 1


@dataclass(frozen=True)
class ValidateThresholds:
    moment_rel: float = 1e-6
    central_mass: float = 1e-10
    entropy_closed: float = 1e-4
    ser: float = 1e-8
    ghq: float = 1e-4
    gaussian_bounds: float = 1e-9


@dataclass(frozen=True)
class ScenarioConfig:
    noise: NoiseParams
    p: float
    gsnr_grid: tuple
    commands: tuple = ()
    pam_order: int = 4
    output_path: str = "."
    units: str = "nats"
    seed: int = 0
    ghq_order: int = 30
    noise_entropy: str = "numeric"
    moment_bound: str = "symmetric"
    with_l1: bool = False
    pam_normalization: str = "sum"
    sweep_alphas: tuple = ()
    sweep_frame: str = "power"
    pdf_n_max: float = 10.0
    pdf_points: int = 401
    moment_orders: tuple = ()
    reference_power: float = 1.0
    ba: BAOptions = field(default_factory=BAOptions)
    thresholds: ValidateThresholds = field(default_factory=ValidateThresholds)

    def with_overrides(self, **kw) -> "ScenarioConfig":
        ba_kw = {k: kw.pop(k) for k in list(kw) if k in ("step",) and kw[k] is not None}
        kw = {k: v for k, v in kw.items() if v is not None}
        cfg = replace(self, **kw)
        if ba_kw:
            cfg = replace(cfg, ba=replace(cfg.ba, **ba_kw))
        return cfg


def _line_of(text: str, section: str, key: str | None) -> int | None:
    """Line number (1-based) of ``key`` inside ``[section]``, or of the header."""
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        head = re.match(r"\s*\[([^\]]+)\]", line)
        if head:
            current = head.group(1).strip()
            if key is None and current == section:
                return no
            continue
        if current == section and key is not None:
            m = re.match(r"\s*([^=:#;\s]+)\s*[=:]", line)
            if m and m.group(1).strip().lower() == key.lower():
                return no
    return None


class _Reader:
    def __init__(self, parser, text, source):
        self.parser = parser
        self.text = text
        self.source = source

    def fail(self, section, key, message):
        line = _line_of(self.text, section, key)
        where = f"{self.source}:{line}" if line else self.source
        field_name = f"[{section}] {key}" if key else f"[{section}]"
        raise ConfigError(f"{where}: {field_name}: {message}")

    def has(self, section, key):
        return self.parser.has_option(section, key)

    def raw(self, section, key):
        return self.parser.get(section, key).strip()

    def number(self, section, key, default=None, kind=float, check=None, rule=""):
        if not self.has(section, key):
            if default is None:
                self.fail(section, key, "missing required value")
            return default
        text = self.raw(section, key)
        try:
            value = kind(text)
        except ValueError:
            self.fail(section, key, f"expected {'an integer' if kind is int else 'a number'}, got {text!r}")
        if kind is float and not math.isfinite(value):
            self.fail(section, key, f"must be finite, got {text!r}")
        if check is not None and not check(value):
            self.fail(section, key, f"{rule}, got {text!r}")
        return value

    def number_list(self, section, key, default=()):
        if not self.has(section, key):
            return tuple(default)
        out = []
        for item in self.raw(section, key).split(","):
            item = item.strip()
            if not item:
                continue
            try:
                v = float(item)
            except ValueError:
                self.fail(section, key, f"expected a comma-separated list of numbers, got item {item!r}")
            if not math.isfinite(v):
                self.fail(section, key, f"list items must be finite, got {item!r}")
            out.append(v)
        return tuple(out)

    def choice(self, section, key, options, default):
        if not self.has(section, key):
            return default
        v = self.raw(section, key).lower()
        if v not in options:
            self.fail(section, key, f"expected one of {', '.join(options)}, got {v!r}")
        return v

    def flag(self, section, key, default=False):
        if not self.has(section, key):
            return default
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            self.fail(section, key, f"expected true or false, got {self.raw(section, key)!r}")


def parse_config(text: str, source: str = "<config>") -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: expected a [section] header before {exc.line.strip()!r}") from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"{source}:{lineno}: cannot parse {line.strip()!r} (expected key = value)") from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        what = f"[{exc.section}] {exc.option}" if hasattr(exc, "option") else f"[{exc.section}]"
        raise ConfigError(f"{source}:{exc.lineno}: {what}: duplicate entry") from None
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}".replace("\n", " ")) from None
    r = _Reader(parser, text, source)

    for section in ("noise", "scenario"):
        if not parser.has_section(section):
            raise ConfigError(f"{source}: missing section [{section}]")
    known = {"noise", "scenario", "ba", "bounds", "pam", "sweep", "pdf", "moments", "validate"}
    for section in parser.sections():
        if section not in known:
            r.fail(section, None, f"unknown section (expected one of {', '.join(sorted(known))})")

    positive = (lambda v: v > 0, "must be positive")
    alpha = r.number("noise", "alpha", check=lambda v: 0 < v <= 2, rule="must lie in (0, 2]")
    noise = NoiseParams(
        alpha=alpha,
        gamma_s=r.number("noise", "gamma_s", 1.0, check=positive[0], rule=positive[1]),
        gamma_g=r.number("noise", "gamma_g", 1.0, check=positive[0], rule=positive[1]),
        c1=r.number("noise", "c1", 0.5, check=lambda v: 0 <= v <= 1, rule="must lie in [0, 1]"),
        gamma_sg=r.number("noise", "gamma_sg", 1.0, check=positive[0], rule=positive[1]),
    )
    p_limit = alpha if alpha < 2.0 else math.inf
    p = r.number("scenario", "p", check=lambda v: 1 <= v < p_limit,
                 rule=f"must lie in [1, alpha) with alpha = {alpha:g}")
    grid = r.number_list("scenario", "gsnr_grid")
    if not grid:
        r.fail("scenario", "gsnr_grid", "must be a non-empty list")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        r.fail("scenario", "gsnr_grid", "must be strictly increasing")

    commands = ()
    if r.has("scenario", "commands"):
        commands = tuple(c.strip().lower() for c in r.raw("scenario", "commands").split(",") if c.strip())
        for c in commands:
            if c not in COMMANDS:
                r.fail("scenario", "commands", f"unknown command {c!r} (expected {', '.join(COMMANDS)})")

    pam_order = r.number("scenario", "pam_order", 4, kind=int,
                         check=lambda v: v >= 2 and v % 2 == 0, rule="must be an even integer >= 2")
    if r.has("pam", "order"):
        pam_order = r.number("pam", "order", kind=int, check=lambda v: v >= 2 and v % 2 == 0,
                             rule="must be an even integer >= 2")

    ba = BAOptions(
        tol=r.number("ba", "tol", 1e-3, check=positive[0], rule=positive[1]),
        step=r.number("ba", "step", 0.01, check=positive[0], rule=positive[1]),
        input_ratio=r.number("ba", "input_ratio", 4, kind=int, check=lambda v: v >= 1, rule="must be >= 1"),
        amplitude_factor=r.number("ba", "amplitude_factor", 8.0, check=positive[0], rule=positive[1]),
        max_points=r.number("ba", "max_points", 2**20, kind=int, check=lambda v: v >= 1000, rule="must be >= 1000"),
        workers=r.number("ba", "workers", 1, kind=int, check=lambda v: v >= 1, rule="must be >= 1"),
    )
    thresholds = ValidateThresholds(**{
        name: r.number("validate", name, getattr(ValidateThresholds, name), check=positive[0], rule=positive[1])
        for name in ValidateThresholds.__dataclass_fields__
    })

    alphas = r.number_list("sweep", "alphas", (alpha,))
    for a in alphas:
        if not (0 < a <= 2 and p < (a if a < 2 else math.inf)):
            r.fail("sweep", "alphas", f"every alpha must lie in (p, 2], got {a:g}")
    orders = r.number_list("moments", "orders", (1.0, p) if p != 1.0 else (1.0,))
    for q in orders:
        if not 0 < q < p_limit:
            r.fail("moments", "orders", f"orders must lie in (0, alpha), got {q:g}")

    return ScenarioConfig(
        noise=noise,
        p=p,
        gsnr_grid=grid,
        commands=commands,
        pam_order=pam_order,
        output_path=parser.get("scenario", "output_path", fallback=".").strip() or ".",
        units=r.choice("scenario", "units", ("nats", "bits"), "nats"),
        seed=r.number("scenario", "seed", 0, kind=int, check=lambda v: v >= 0, rule="must be >= 0"),
        ghq_order=r.number("pam", "ghq_order", 30, kind=int, check=lambda v: v >= 10, rule="must be an integer >= 10"),
        noise_entropy=r.choice("bounds", "noise_entropy", ("closed", "numeric"), "numeric"),
        moment_bound=r.choice("bounds", "moment_bound", ("symmetric", "minkowski"), "symmetric"),
        with_l1=r.flag("bounds", "with_l1", False),
        pam_normalization=r.choice("pam", "normalization", ("sum", "expectation"), "sum"),
        sweep_alphas=alphas,
        sweep_frame=r.choice("sweep", "frame", ("power", "gsnr"), "power"),
        pdf_n_max=r.number("pdf", "n_max", 10.0, check=positive[0], rule=positive[1]),
        pdf_points=r.number("pdf", "points", 401, kind=int, check=lambda v: v >= 2, rule="must be >= 2"),
        moment_orders=orders,
        reference_power=r.number("scenario", "reference_power", 1.0, check=positive[0], rule=positive[1]),
        ba=ba,
        thresholds=thresholds,
    )


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    return parse_config(text, str(path))
