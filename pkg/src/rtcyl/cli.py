"""Command-line interface: ``rtcyl <command> [options]``.

Commands: eigen, threshold, dispersion, ntd, branch, kernels-selftest.
Options come from a flat JSON file (``--config``) and from flags; flags win.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__
from .errors import RTCylError

COMMANDS = ("eigen", "threshold", "dispersion", "ntd", "branch", "kernels-selftest")


@dataclass
class RunConfig:
    rho1: float | None = None
    rho2: float | None = None
    mu1: float | None = None
    mu2: float | None = None
    sigma: float | None = None
    gamma_a: float | None = None
    kind: str = "interval"
    R: float = 1.0
    H1: float = -1.0
    H2: float = 1.0
    N: int = 48
    m: int = 1
    m_max: int = 8
    M: int = 8
    Nh: int = 10
    count: int = 8
    ds: float = 0.01
    steps: int = 20
    direction: int = 1
    lambda_max: float = 100.0
    n_lambda: int = 20
    workers: int = 1
    format: str = "csv"
    out: str | None = None


FLUID_KEYS = ("rho1", "rho2", "mu1", "mu2", "sigma", "gamma_a")
NEEDS_FLUID = {"threshold", "dispersion", "ntd"}
_INT_KEYS = {"N", "m", "m_max", "M", "Nh", "count", "steps", "direction", "n_lambda", "workers"}
_STR_KEYS = {"kind", "format", "out"}


class ConfigError(Exception):
    def __init__(self, key, message):
        super().__init__(f"config error [{key}]: {message}")
        self.key = key


def _coerce(key, value):
    if value is None:
        return None
    if key in _STR_KEYS:
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    if isinstance(value, bool):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if key in _INT_KEYS:
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(key, f"must be finite, got {value!r}")
    return value


def _validate(cfg, command):
    if command in NEEDS_FLUID or (command == "threshold"):
        for key in FLUID_KEYS:
            if getattr(cfg, key) is None:
                raise ConfigError(key, "required but missing")
    for key in FLUID_KEYS:
        v = getattr(cfg, key)
        if v is not None and not v > 0:
            raise ConfigError(key, f"must be positive, got {v!r}")
    if cfg.kind not in ("interval", "disk"):
        raise ConfigError("kind", f"must be 'interval' or 'disk', got {cfg.kind!r}")
    if cfg.format not in ("csv", "json"):
        raise ConfigError("format", f"must be 'csv' or 'json', got {cfg.format!r}")
    if not cfg.R > 0:
        raise ConfigError("R", f"must be positive, got {cfg.R!r}")
    if not cfg.H1 < 0:
        raise ConfigError("H1", f"must be negative, got {cfg.H1!r}")
    if not cfg.H2 > 0:
        raise ConfigError("H2", f"must be positive, got {cfg.H2!r}")
    checks = (
        ("N", cfg.N >= 16, "must be >= 16"),
        ("m", cfg.m >= 1, "must be >= 1"),
        ("m_max", 1 <= cfg.m_max <= 64, "must be in [1, 64]"),
        ("M", cfg.M >= 1, "must be >= 1"),
        ("Nh", cfg.Nh >= 6, "must be >= 6"),
        ("count", 1 <= cfg.count <= 64, "must be in [1, 64]"),
        ("ds", 0 < cfg.ds <= 0.1, "must be in (0, 0.1]"),
        ("steps", 1 <= cfg.steps <= 200, "must be in [1, 200]"),
        ("direction", cfg.direction in (1, -1), "must be +1 or -1"),
        ("lambda_max", cfg.lambda_max > 0, "must be positive"),
        ("n_lambda", cfg.n_lambda >= 2, "must be >= 2"),
        ("workers", cfg.workers >= 1, "must be >= 1"),
    )
    for key, ok, msg in checks:
        if not ok:
            raise ConfigError(key, f"{msg}, got {getattr(cfg, key)!r}")
    if command in ("dispersion", "ntd") and cfg.kind != "interval":
        raise ConfigError("kind", f"{command} supports the interval cross-section only")
    return cfg


def load_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON in {path}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return data


def parse_config(command="eigen", path=None, overrides=None):
    """Build a validated RunConfig from an optional file and flag overrides.

    Unknown keys are rejected; ``None`` values count as unset.
    """
    known = {f.name for f in fields(RunConfig)}
    values = {}
    sources = []
    if path is not None:
        sources.append(load_config_file(path))
    if overrides:
        sources.append(overrides)
    for src in sources:
        for key, value in src.items():
            if key not in known:
                raise ConfigError(key, "unknown key")
            value = _coerce(key, value)
            if value is not None:
                values[key] = value
    return _validate(RunConfig(**values), command)


# --- serialisation ----------------------------------------------------------

def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return ""
        return format(x, ".17g")
    return str(x)


def to_csv(columns, rows):
    lines = [",".join(columns)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _json_value(x):
    if x is None:
        return "null"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_value(v)}" for k, v in x.items()) + "}"
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_json_value(v) for v in x) + "]"
    raise TypeError(f"cannot serialise {type(x).__name__}")


def to_json(command, columns, rows, meta=None):
    doc = {"command": command, "columns": list(columns), "rows": [list(r) for r in rows]}
    if meta is not None:
        doc["meta"] = meta
    return _json_value(doc) + "\n"


# --- commands ---------------------------------------------------------------

def _cross_section(cfg):
    from .geometry import CrossSection

    return CrossSection.disk(cfg.R) if cfg.kind == "disk" else CrossSection.interval(cfg.R)


def _fluid(cfg):
    from .thresholds import FluidPair

    return FluidPair(cfg.rho1, cfg.rho2, cfg.mu1, cfg.mu2, cfg.sigma, cfg.gamma_a)


def cmd_eigen(cfg):
    from .geometry import neumann_eigenvalues

    modes = neumann_eigenvalues(_cross_section(cfg), cfg.count)
    rows = [(i + 1, md.m, md.k, md.eigenvalue, md.wavenumber, md.multiplicity) for i, md in enumerate(modes)]
    return ("index", "m", "k", "eigenvalue", "wavenumber", "multiplicity"), rows, {}, 0


def cmd_threshold(cfg):
    from .thresholds import classify, critical_radius

    fp = _fluid(cfg)
    cs = _cross_section(cfg)
    verdict = classify(fp, cs, min(cfg.count, 8))
    r_c = critical_radius(fp, cs) if cfg.kind == "disk" and fp.rho_jump > 0 else None
    lam1 = verdict.margins and (verdict.margins[0][1] + fp.load) / fp.sigma
    row = (verdict.classification.value, verdict.sigma_c, lam1, fp.load / fp.sigma, r_c)
    return ("verdict", "sigma_c", "lambda_1", "alpha", "critical_radius"), [row], {}, 0


def cmd_dispersion(cfg):
    from .normal_modes import DISPERSION_COLUMNS, dispersion_sweep

    table = dispersion_sweep(_fluid(cfg), _cross_section(cfg), (cfg.H1, cfg.H2), cfg.m_max, cfg.N, cfg.workers)
    rows = [(r.m, r.k, r.lambda_m, r.margin, r.max_re_lambda) for r in table]
    errors = {str(r.m): r.error for r in table if r.error}
    return DISPERSION_COLUMNS, rows, ({"errors": errors} if errors else {}), (3 if errors else 0)


def cmd_ntd(cfg):
    from .normal_modes import ModeProblem, ntd_energy_residual, ntd_solve

    mp = ModeProblem(_fluid(cfg), _cross_section(cfg), cfg.H1, cfg.H2, cfg.m, cfg.N)
    grids = mp.grids()
    lam = np.concatenate([[0.0], np.geomspace(1e-2, cfg.lambda_max, cfg.n_lambda - 1)]) * mp.rate_scale
    rows = []
    for x in lam:
        sol = ntd_solve(mp, float(x), 1.0, grids)
        rows.append((float(x), sol.value, ntd_energy_residual(mp, sol, grids)))
    return ("lambda", "n_k", "energy_residual"), rows, {"k": mp.k}, 0


def cmd_branch(cfg):
    from .capillary import branch_trace, ls_diagnostics

    cs = _cross_section(cfg)
    kw = {} if cfg.kind == "interval" else {"M": cfg.M, "Nh": cfg.Nh}
    if cfg.kind == "interval":
        kw["N"] = min(cfg.N, 32)
    branch = branch_trace(cs, cfg.direction, cfg.steps, cfg.ds, **kw)
    rows = [(bp.s, bp.alpha, bp.residual, bp.min_jac_eig, bp.stability_tag.value) for bp in branch]
    extra = {"stop_reason": branch.stop_reason}
    try:
        diag = ls_diagnostics(branch)
    except RTCylError:
        diag = None
    if diag is not None:
        extra["ls_diagnostics"] = asdict(diag)
    code = 0 if branch.stop_reason in ("steps", "s_max") else 3
    return ("s", "alpha", "residual", "min_jac_eig", "tag"), rows, extra, code


def cmd_kernels_selftest(cfg):
    from .transform import selftest

    results = selftest(R=cfg.R, H1=cfg.H1, H2=cfg.H2)
    rows = [(r.name, r.value, r.tol, r.passed) for r in results]
    return ("name", "value", "tol", "passed"), rows, {}, (0 if all(r.passed for r in results) else 3)


HANDLERS = {
    "eigen": cmd_eigen,
    "threshold": cmd_threshold,
    "dispersion": cmd_dispersion,
    "ntd": cmd_ntd,
    "branch": cmd_branch,
    "kernels-selftest": cmd_kernels_selftest,
}


def build_parser():
    p = argparse.ArgumentParser(prog="rtcyl", description="Rayleigh-Taylor stability in a cylinder.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--no-meta", action="store_true", help="omit the wall-time field")
    for key in FLUID_KEYS + ("R", "H1", "H2", "ds", "lambda_max"):
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=float)
    for key in sorted(_INT_KEYS):
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=int)
    p.add_argument("--kind", choices=("interval", "disk"))
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {
        k: v for k, v in vars(args).items()
        if k not in ("command", "config", "no_meta") and v is not None
    }
    try:
        cfg = parse_config(args.command, args.config, overrides)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    try:
        columns, rows, extra, code = HANDLERS[args.command](cfg)
    except RTCylError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    meta = {"config": asdict(cfg), "version": __version__, **extra}
    if not args.no_meta:
        meta["wall_time"] = time.perf_counter() - t0
    if cfg.format == "json":
        text = to_json(args.command, columns, rows, meta)
    else:
        text = to_csv(columns, rows)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
