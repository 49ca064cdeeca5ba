"""Command-line runner: ``qkr <subcommand> [options]``.

Options may also come from a flat ``key = value`` file given with
``--config``; command-line flags win over the file.  The output directory
can be overridden with the ``QKR_OUTPUT_DIR`` environment variable (flags
still win).  Every subcommand writes a CSV (``#`` provenance block, one
header row, 17 significant digits) plus a JSON manifest next to it.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import __version__
from .core import GaussianSpec, ResonanceParams
from .experiments import (MAX_SITES, ResourceError, auto_half_width, default_window, figure1_data,
                          fit_group_velocity, run_moment_series, snapshot_distributions,
                          sweep_kappa, sweep_theta)
from .theory import ExponentMode
from .verification import run_checks

ENV_OUTPUT_DIR = "QKR_OUTPUT_DIR"
COMMANDS = ("simulate", "snapshots", "sweep-theta", "sweep-kappa", "figure1", "verify")


class ConfigError(ValueError):
    """Invalid run configuration; ``field`` names the offending option."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# ---------------------------------------------------------------- value parsers

def parse_angle(text: str) -> float:
    """Radians, or a multiple of pi written as ``0.5pi``, ``-pi``, ``pi``."""
    text = str(text).strip()
    sign = -1.0 if text.startswith("-") else 1.0
    body = text.lstrip("+-").strip()
    if body.endswith("pi"):
        coeff = body[:-2].rstrip(" *")
        return sign * (float(coeff) if coeff else 1.0) * math.pi
    return float(text)


def parse_pq(text: str) -> tuple[int, int]:
    parts = str(text).strip().split("/")
    if len(parts) == 1:
        p, q = int(parts[0]), 1
    elif len(parts) == 2:
        p, q = int(parts[0]), int(parts[1])
    else:
        raise ValueError(f"expected p/q, got {text!r}")
    if p < 1 or q < 1:
        raise ValueError(f"p and q must be positive, got {text!r}")
    if math.gcd(p, q) != 1:
        f = Fraction(p, q)
        raise ValueError(f"p/q = {p}/{q} is not in lowest terms (use {f.numerator}/{f.denominator})")
    return p, q


def parse_grid(text: str, item: Callable[[str], float] = float) -> tuple[float, float, int]:
    """``start:stop:count``, both ends included."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ValueError(f"expected start:stop:count, got {text!r}")
    start, stop, count = item(parts[0]), item(parts[1]), int(parts[2])
    if count < 1:
        raise ValueError(f"grid count must be >= 1, got {count}")
    return start, stop, count


def parse_window(text: str) -> Optional[tuple[int, int]]:
    if str(text).strip() == "auto":
        return None
    parts = str(text).split(":")
    if len(parts) != 2:
        raise ValueError(f"expected n_min:n_max or auto, got {text!r}")
    lo, hi = int(parts[0]), int(parts[1])
    if lo >= hi:
        raise ValueError(f"window needs n_min < n_max, got {text!r}")
    return lo, hi


def parse_half_width(text: str) -> Optional[int]:
    if str(text).strip() == "auto":
        return None
    hw = int(text)
    if hw < 1:
        raise ValueError(f"half-width must be >= 1, got {hw}")
    return hw


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise ValueError(f"must be >= 1, got {v}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise ValueError(f"must be >= 0, got {v}")
    return v


def _nonneg_float(text: str) -> float:
    v = float(text)
    if not (math.isfinite(v) and v >= 0):
        raise ValueError(f"must be finite and >= 0, got {text}")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not (math.isfinite(v) and v > 0):
        raise ValueError(f"must be finite and > 0, got {text}")
    return v


def _float_list(text: str) -> tuple[float, ...]:
    vals = tuple(_positive_float(t) for t in str(text).split(",") if t.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


def _int_list(text: str) -> tuple[int, ...]:
    vals = tuple(int(t) for t in str(text).split(",") if t.strip())
    if not vals:
        raise ValueError("empty list")
    return vals


def _mode(text: str) -> str:
    return ExponentMode(str(text).strip()).value


def _method(text: str) -> str:
    text = str(text).strip()
    if text not in ("banded", "spectral"):
        raise ValueError(f"expected banded or spectral, got {text!r}")
    return text


# key -> (flag, parser, help)
FIELDS: dict[str, tuple[str, Callable[[str], Any], str]] = {
    "pq": ("--pq", parse_pq, "resonance p/q, e.g. 1 or 1/3"),
    "kappa": ("--kappa", _nonneg_float, "dimensionless kick strength"),
    "sigma0": ("--sigma0", _positive_float, "initial Gaussian width"),
    "theta0": ("--theta0", parse_angle, "initial angle, radians or e.g. 0.5pi"),
    "l_center": ("--l-center", int, "initial envelope center"),
    "half_width": ("--half-width", parse_half_width, "lattice half-width or 'auto'"),
    "steps": ("--steps", _nonneg_int, "number of kicks"),
    "record_every": ("--record-every", _positive_int, "moment recording stride"),
    "window": ("--window", parse_window, "fit window n_min:n_max or 'auto'"),
    "exponent_mode": ("--exponent-mode", _mode, "paper_printed or derived_squared"),
    "out": ("--out", Path, "output directory"),
    "theta_grid": ("--theta-grid", lambda t: parse_grid(t, parse_angle), "start:stop:count"),
    "kappa_grid": ("--kappa-grid", parse_grid, "start:stop:count"),
    "sigma0_list": ("--sigma0-list", _float_list, "comma-separated widths"),
    "times": ("--times", _int_list, "comma-separated snapshot times"),
    "method": ("--method", _method, "banded or spectral"),
    "workers": ("--workers", _positive_int, "processes for sweeps"),
    "max_sites": ("--max-sites", _positive_int, "lattice size cap"),
}

DEFAULTS = {
    "pq": "1", "sigma0": "1", "theta0": "0.5pi", "l_center": "0", "half_width": "auto",
    "steps": "600", "record_every": "1", "window": "auto",
    "exponent_mode": "derived_squared", "out": "qkr-output", "times": "0,250,500",
    "sigma0_list": "1,10,100", "method": "banded", "workers": "1", "max_sites": str(MAX_SITES),
}

COMMAND_DEFAULTS = {"figure1": {"theta_grid": "-1pi:1pi:201"}}

REQUIRED = {
    "simulate": ("kappa",),
    "snapshots": ("kappa",),
    "sweep-theta": ("kappa", "theta_grid"),
    "sweep-kappa": ("kappa_grid",),
    "figure1": (),
    "verify": (),
}


@dataclass
class RunConfig:
    command: str
    p: int = 1
    q: int = 1
    kappa: Optional[float] = None
    sigma0: float = 1.0
    theta0: float = math.pi / 2
    l_center: int = 0
    half_width: Optional[int] = None
    n_steps: int = 600
    record_every: int = 1
    window: Optional[tuple[int, int]] = None
    exponent_mode: str = "derived_squared"
    out: Path = Path("qkr-output")
    theta_grid: Optional[tuple[float, float, int]] = None
    kappa_grid: Optional[tuple[float, float, int]] = None
    sigma0_list: tuple[float, ...] = (1.0, 10.0, 100.0)
    times: tuple[int, ...] = (0, 250, 500)
    method: str = "banded"
    workers: int = 1
    max_sites: int = MAX_SITES
    sources: dict[str, str] = field(default_factory=dict, repr=False)

    @property
    def params(self) -> ResonanceParams:
        return ResonanceParams(self.p, self.q, self.kappa if self.kappa is not None else 0.0)

    @property
    def spec(self) -> GaussianSpec:
        return GaussianSpec(self.sigma0, self.theta0, self.l_center)

    def provenance(self) -> dict[str, Any]:
        d = asdict(self)
        d.pop("sources")
        d["out"] = str(self.out)
        return d


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError("arguments", message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qkr", description="Resonant quantum kicked rotor experiments")
    parser.add_argument("--version", action="version", version=f"qkr {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="flat key = value file")
        for key, (flag, _, help_) in FIELDS.items():
            sp.add_argument(flag, dest=key, default=None, help=help_)
    return parser


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in FIELDS:
            raise ConfigError(key, f"unknown key in {path} (line {lineno})")
        values[key] = value
    return values


def parse_config(args: Sequence[str], config_file: Optional[str] = None,
                 environ: Optional[dict[str, str]] = None) -> RunConfig:
    """Merge defaults, config file, environment and flags into a validated RunConfig."""
    ns = build_parser().parse_args(list(args))
    if ns.command is None:
        raise ConfigError("command", f"missing subcommand; choose from {', '.join(COMMANDS)}")
    environ = os.environ if environ is None else environ

    raw: dict[str, str] = dict(DEFAULTS)
    raw.update(COMMAND_DEFAULTS.get(ns.command, {}))
    sources = {k: "default" for k in raw}
    file_path = ns.config or config_file
    if file_path:
        for k, v in read_config_file(file_path).items():
            raw[k], sources[k] = v, "file"
    if environ.get(ENV_OUTPUT_DIR):
        raw["out"], sources["out"] = environ[ENV_OUTPUT_DIR], "env"
    for key in FIELDS:
        v = getattr(ns, key)
        if v is not None:
            raw[key], sources[key] = v, "flag"

    for key in REQUIRED[ns.command]:
        if key not in raw:
            raise ConfigError(key, f"required for '{ns.command}' (flag {FIELDS[key][0]})")

    values: dict[str, Any] = {}
    for key, text in raw.items():
        try:
            values[key] = FIELDS[key][1](text)
        except (ValueError, TypeError) as exc:
            raise ConfigError(key, f"malformed value {text!r}: {exc}") from None

    p, q = values.pop("pq")
    steps = values.pop("steps")
    cfg = RunConfig(command=ns.command, p=p, q=q, n_steps=steps, sources=sources, **values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    try:
        cfg.params
    except ValueError as exc:
        raise ConfigError("kappa", str(exc)) from None
    try:
        cfg.spec
    except ValueError as exc:
        raise ConfigError("sigma0", str(exc)) from None
    if cfg.command == "snapshots" and any(b <= a for a, b in zip(cfg.times, cfg.times[1:])):
        raise ConfigError("times", f"must be strictly increasing, got {cfg.times}")
    if cfg.command == "snapshots" and cfg.times[0] < 0:
        raise ConfigError("times", "must be nonnegative")


# ---------------------------------------------------------------- output

def fmt(x) -> str:
    if isinstance(x, str):
        return f'"{x}"' if "," in x else x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, header: Sequence[str], rows, provenance: dict[str, Any]) -> str:
    lines = [f"# {k} = {_prov_value(v)}" for k, v in provenance.items()]
    lines.append(",".join(header))
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    text = "\n".join(lines) + "\n"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return hashlib.sha256(text.encode()).hexdigest()


def _prov_value(v) -> str:
    if isinstance(v, float):
        return fmt(v)
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_prov_value(x) for x in v) + "]"
    return str(v)


def write_manifest(path: Path, cfg: RunConfig, outputs: dict[str, str], wall_time: float,
                   argv: Sequence[str], extra: Optional[dict] = None):
    manifest = {
        "program": "qkr",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "argv": list(argv),
        "config": cfg.provenance(),
        "sources": cfg.sources,
        "outputs": outputs,
        "wall_time_seconds": wall_time,
    }
    if extra:
        manifest.update(extra)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _grid(g: tuple[float, float, int]) -> np.ndarray:
    return np.linspace(g[0], g[1], g[2])


# ---------------------------------------------------------------- commands

def _resolve_half_width(cfg: RunConfig, n_steps: int, prov: dict):
    if cfg.half_width is None:
        prov["half_width"] = f"auto ({auto_half_width(cfg.spec, cfg.params.kappa, n_steps)})"


def _simulate(cfg: RunConfig, prov: dict):
    _resolve_half_width(cfg, cfg.n_steps, prov)
    series = run_moment_series(cfg.spec, cfg.params, cfg.n_steps, cfg.record_every,
                               half_width=cfg.half_width, method=cfg.method,
                               max_sites=cfg.max_sites)
    rows = [tuple(e) for e in series]
    extra = {}
    if len(series) >= 10:
        window = cfg.window or default_window(cfg.n_steps)
        try:
            fit = fit_group_velocity(series, window)
            prov["fit_vg"] = fit.slope
            prov["fit_window"] = fit.window
            extra["fit"] = asdict(fit)
        except ValueError:
            pass
    return "moments.csv", ("n", "m1", "m2", "variance", "norm", "tail_mass"), rows, extra


def _snapshots(cfg: RunConfig, prov: dict):
    _resolve_half_width(cfg, cfg.times[-1], prov)
    snaps = snapshot_distributions(cfg.spec, cfg.params, cfg.times, half_width=cfg.half_width,
                                   max_sites=cfg.max_sites)
    rows = [(s.time, int(l), p) for s in snaps for l, p in zip(s.l, s.p)]
    return "snapshots.csv", ("t", "l", "p"), rows, {}


def _sweep_rows(records):
    return [(r.value, r.vg, r.stderr, r.residual_rms, r.window[0], r.window[1]) for r in records]


def _sweep_theta(cfg: RunConfig, prov: dict):
    records = sweep_theta(cfg.params, cfg.sigma0, _grid(cfg.theta_grid), cfg.n_steps,
                          cfg.window, cfg.record_every, cfg.method, cfg.workers)
    return ("sweep_theta.csv", ("theta0", "vg", "stderr", "residual_rms", "n_min", "n_max"),
            _sweep_rows(records), {"records": [r.to_dict() for r in records]})


def _sweep_kappa(cfg: RunConfig, prov: dict):
    records = sweep_kappa(cfg.p, cfg.q, cfg.sigma0, cfg.theta0, _grid(cfg.kappa_grid),
                          cfg.n_steps, cfg.window, cfg.record_every, cfg.method, cfg.workers)
    return ("sweep_kappa.csv", ("kappa", "vg", "stderr", "residual_rms", "n_min", "n_max"),
            _sweep_rows(records), {"records": [r.to_dict() for r in records]})


def _figure1(cfg: RunConfig, prov: dict):
    rows = figure1_data(cfg.sigma0_list, _grid(cfg.theta_grid), cfg.exponent_mode)
    return "figure1.csv", ("sigma0", "theta0", "coefficient"), [tuple(r) for r in rows], {}


_VERIFY_FAILED = "verify_failed"


def _verify(cfg: RunConfig, prov: dict):
    checks = run_checks()
    width = max(len(c.name) for c in checks)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<{width}}  "
              f"{c.value:.3e} <= {c.tolerance:.1e}")
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    rows = [(c.name, c.value, c.tolerance, int(c.passed)) for c in checks]
    return ("verify.csv", ("check", "value", "tolerance", "passed"), rows,
            {_VERIFY_FAILED: len(failed)})


HANDLERS = {
    "simulate": _simulate,
    "snapshots": _snapshots,
    "sweep-theta": _sweep_theta,
    "sweep-kappa": _sweep_kappa,
    "figure1": _figure1,
    "verify": _verify,
}


def run(cfg: RunConfig, argv: Sequence[str] = ()) -> int:
    """Execute a validated configuration; returns the process exit status."""
    t0 = time.perf_counter()
    prov: dict[str, Any] = {"program": f"qkr {__version__}", "command": cfg.command}
    prov.update(cfg.provenance())
    del prov["out"]  # location is not part of the result
    try:
        name, header, rows, extra = HANDLERS[cfg.command](cfg, prov)
    except ResourceError as exc:
        print(f"qkr: resource cap exceeded: {exc}", file=sys.stderr)
        return 3
    out_dir = Path(cfg.out)
    try:
        digest = write_csv(out_dir / name, header, rows, prov)
        wall = time.perf_counter() - t0
        manifest = out_dir / (Path(name).stem + ".manifest.json")
        write_manifest(manifest, cfg, {name: digest}, wall, argv, extra)
    except OSError as exc:
        print(f"qkr: cannot write output: {exc}", file=sys.stderr)
        return 4
    print(f"wrote {out_dir / name}")
    if extra.get(_VERIFY_FAILED):
        return 1
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"qkr: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"qkr: cannot read config: {exc}", file=sys.stderr)
        return 2
    return run(cfg, argv)


if __name__ == "__main__":
    sys.exit(main())
