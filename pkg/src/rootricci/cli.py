"""Command-line front end.

Every subcommand reads one JSON config, validates it, runs a workflow and
writes CSV (or an aligned text table with ``format: human``). Exit codes:
0 success, 1 config or parameter error, 2 precondition or window failure,
3 comparison inequality violated by more than ``1e-7``.

Config keys
-----------
manifold
    ``"CH2"``, or an object with ``type`` one of ``constant`` (``kappa``,
    ``n``), ``rank_one`` (``family``, ``n_real``, ``scale``), ``profile``
    (``grid``, ``samples``) or ``random_class`` (``n``, ``grid_size``,
    ``amplitude``; drawn from ``params`` and the seed).
params
    ``rho`` and ``kappa`` (``kappa`` is optional for ``classify``).
r, steps, grid_points, seed, output, format
    Radius, RK4 steps, comparison grid size, base seed, output path and
    ``csv`` or ``human``.
n
    Dimension for ``extremal`` when no manifold is given.
seeds
    Ensemble size for ``compare`` on a ``random_class`` manifold.
phase_beta
    If present, ``extremal`` also runs the phase-plane uniqueness check
    with this constant and appends a ``phase_unique`` column.
sweep
    Lists ``rho``, ``kappa``, ``n``, ``r`` and a ``count`` of profiles
    assigned to the parameter grid round-robin, plus ``workers``.
"""

import argparse
import csv
import io
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import jsonschema
import numpy as np

from .candle import DEFAULT_STEPS, candle, integrate_jacobi
from .comparison import (
    DEFAULT_GRID_POINTS,
    check_conditions,
    class_window,
)
from .curvature import (
    ConstantCurvature,
    CurvatureProfile,
    ExplicitProfile,
    RankOneSymmetric,
    RicClassParams,
    classify_kappa,
    complex_hyperbolic_plane,
    is_ric_class,
    make_random_class_profile,
    model_operators,
    model_profile,
    root_ricci,
)
from .errors import (
    ConfigError,
    ConjugateBeforeR,
    InvalidParams,
    RootRicciError,
)
from .extremal import extremal_solve, phase_uniqueness_check

VIOLATION_TOL = 1e-7

EXIT_OK, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_VIOLATION = 0, 1, 2, 3

_NUMBER = {"type": "number"}
_INT = {"type": "integer"}
_NUMBERS = {"type": "array", "items": _NUMBER, "minItems": 1}

_MANIFOLD_SCHEMA = {
    "oneOf": [
        {"enum": ["CH2"]},
        {
            "type": "object",
            "properties": {"type": {"const": "constant"}, "kappa": _NUMBER, "n": _INT},
            "required": ["type", "kappa", "n"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "type": {"const": "rank_one"},
                "family": {"enum": ["R", "C", "H", "O"]},
                "n_real": _INT,
                "scale": _NUMBER,
            },
            "required": ["type", "family", "n_real"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "type": {"const": "profile"},
                "grid": _NUMBERS,
                "samples": {"type": "array", "minItems": 1},
            },
            "required": ["type", "grid", "samples"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "type": {"const": "random_class"},
                "n": _INT,
                "grid_size": _INT,
                "amplitude": _NUMBER,
            },
            "required": ["type", "n"],
            "additionalProperties": False,
        },
    ]
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "manifold": _MANIFOLD_SCHEMA,
        "params": {
            "type": "object",
            "properties": {"rho": _NUMBER, "kappa": _NUMBER},
            "required": ["rho"],
            "additionalProperties": False,
        },
        "r": _NUMBER,
        "n": _INT,
        "steps": _INT,
        "grid_points": _INT,
        "seed": _INT,
        "seeds": _INT,
        "phase_beta": _NUMBER,
        "output": {"type": "string"},
        "format": {"enum": ["csv", "human"]},
        "sweep": {
            "type": "object",
            "properties": {
                "rho": _NUMBERS,
                "kappa": _NUMBERS,
                "n": {"type": "array", "items": _INT, "minItems": 1},
                "r": _NUMBERS,
                "count": _INT,
                "workers": _INT,
            },
            "required": ["rho", "kappa", "n", "r"],
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


@dataclass(frozen=True)
class RunConfig:
    manifold: Optional[object]
    rho: Optional[float]
    kappa: Optional[float]
    r: Optional[float]
    n: Optional[int]
    steps: int = DEFAULT_STEPS
    grid_points: int = DEFAULT_GRID_POINTS
    seed: int = 0
    seeds: int = 1
    phase_beta: Optional[float] = None
    output: Optional[str] = None
    format: str = "csv"
    sweep: Optional[dict] = None

    @property
    def params(self):
        if self.rho is None or self.kappa is None:
            raise ConfigError("config.params: rho and kappa are required")
        return RicClassParams(self.rho, self.kappa)

    def require(self, *names):
        for name in names:
            if getattr(self, name) is None:
                raise ConfigError(f"config.{name}: required for this subcommand")


def _error_path(err):
    return ".".join(["config"] + [str(p) for p in err.absolute_path])


def parse_config(doc):
    """Validate a decoded JSON document and build a :class:`RunConfig`.

    Raises
    ------
    ConfigError
        On schema violations (with the offending path) and on values that
        fail module preconditions.
    """
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as err:
        raise ConfigError(f"{_error_path(err)}: {err.message}") from None
    params = doc.get("params", {})
    cfg = RunConfig(
        manifold=doc.get("manifold"),
        rho=params.get("rho"),
        kappa=params.get("kappa"),
        r=doc.get("r"),
        n=doc.get("n"),
        steps=doc.get("steps", DEFAULT_STEPS),
        grid_points=doc.get("grid_points", DEFAULT_GRID_POINTS),
        seed=doc.get("seed", 0),
        seeds=doc.get("seeds", 1),
        phase_beta=doc.get("phase_beta"),
        output=doc.get("output"),
        format=doc.get("format", "csv"),
        sweep=doc.get("sweep"),
    )
    checks = [
        (cfg.r is None or (math.isfinite(cfg.r) and cfg.r > 0), "r", "must be positive"),
        (cfg.steps >= 1, "steps", "must be positive"),
        (cfg.grid_points >= 1, "grid_points", "must be positive"),
        (cfg.seeds >= 1, "seeds", "must be positive"),
        (cfg.n is None or cfg.n >= 2, "n", "must be >= 2"),
    ]
    for ok, name, msg in checks:
        if not ok:
            raise ConfigError(f"config.{name}: {msg}")
    if cfg.rho is not None and cfg.rho < 0:
        raise InvalidParams(f"config.params.rho: must be >= 0, got {cfg.rho}")
    if cfg.rho is not None and cfg.kappa is not None:
        RicClassParams(cfg.rho, cfg.kappa)
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON: {err}") from None
    return parse_config(doc)


def build_model(cfg, seed=None):
    """Turn the manifold entry into a model; random profiles use ``seed``."""
    desc = cfg.manifold
    if desc is None:
        raise ConfigError("config.manifold: required for this subcommand")
    if desc == "CH2":
        return complex_hyperbolic_plane()
    kind = desc["type"]
    if kind == "constant":
        return ConstantCurvature(desc["kappa"], desc["n"])
    if kind == "rank_one":
        return RankOneSymmetric(desc["family"], desc["n_real"], desc.get("scale", 1.0))
    if kind == "profile":
        return ExplicitProfile(CurvatureProfile(desc["grid"], desc["samples"]))
    cfg.require("r")
    profile = make_random_class_profile(
        desc["n"],
        cfg.params,
        cfg.r,
        cfg.seed if seed is None else seed,
        grid_size=desc.get("grid_size", 65),
        amplitude=desc.get("amplitude", 1.0),
    )
    return ExplicitProfile(profile)


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None or (isinstance(value, (float, np.floating)) and np.isnan(value)):
        return "na"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


class Table:
    """Header, rows and ``#`` comment lines, rendered as CSV or aligned text."""

    def __init__(self, header):
        self.header = list(header)
        self.rows = []
        self.comments = []

    def add(self, row):
        self.rows.append([_cell(v) for v in row])

    def note(self, text):
        self.comments.append(text)

    def render(self, fmt="csv"):
        if fmt == "human":
            cells = [self.header] + self.rows
            widths = [max(len(r[i]) for r in cells) for i in range(len(self.header))]
            lines = ["# " + c for c in self.comments]
            lines += ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in cells]
            return "\n".join(lines) + "\n"
        buf = io.StringIO()
        for c in self.comments:
            buf.write(f"# {c}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        writer.writerows(self.rows)
        return buf.getvalue()


def cmd_classify(cfg):
    model = build_model(cfg)
    if cfg.rho is None:
        raise ConfigError("config.params.rho: required for classify")
    kappa_star = classify_kappa(model, cfg.rho)
    root = min(root_ricci(op, cfg.rho) for op in model_operators(model))
    table = Table(["rho", "root_ricci", "kappa_star", "kappa", "class_margin", "holds"])
    if cfg.kappa is None:
        table.add([cfg.rho, root, kappa_star, None, None, None])
    else:
        check = is_ric_class(model, cfg.params)
        table.add([cfg.rho, root, kappa_star, cfg.kappa, check.margin, check.holds])
    return EXIT_OK, table


def cmd_candle(cfg, trace=None):
    cfg.require("r")
    model = build_model(cfg)
    sol = integrate_jacobi(model_profile(model, cfg.r), cfg.r, cfg.steps)
    table = Table(["r", "s", "log_deriv", "first_conjugate"])
    code = EXIT_OK
    try:
        rep = candle(sol)
    except ConjugateBeforeR as err:
        rep = err.report
        table.note(str(err))
        code = EXIT_PRECONDITION
    table.add([rep.r, rep.s, rep.log_deriv, rep.first_conjugate])
    if trace is not None:
        tr = Table(["t", "det_Y", "tr_Yp_Yinv", "s"])
        det = np.linalg.det(sol.Y)
        lcd = sol.log_derivative()
        for row in zip(sol.grid, det, lcd, sol.candle_values()):
            tr.add(row)
        _write(tr.render("csv"), trace)
    return code, table


def _compare_rows(cfg, model, ell, seed=None):
    reports = check_conditions(
        model.profile if isinstance(model, ExplicitProfile) else model,
        cfg.kappa,
        ell,
        cfg.steps,
        cfg.grid_points,
        rho=cfg.rho,
    )
    prefix = [] if seed is None else [seed]
    return [prefix + rep.to_row() for rep in reports], min(
        (rep.worst_margin for rep in reports if rep.applicable), default=math.inf
    )


def cmd_compare(cfg):
    cfg.require("r")
    ell, truncated = class_window(cfg.params, cfg.r)
    ensemble = isinstance(cfg.manifold, dict) and cfg.manifold["type"] == "random_class"
    header = ["condition", "kappa", "ell", "holds", "worst_margin", "worst_r"]
    table = Table((["seed"] if ensemble else []) + header)
    if truncated:
        table.note(f"warning: r={cfg.r:.17g} truncated to pi/(2 sqrt(rho))={ell:.17g}")
    worst = math.inf
    seeds = range(cfg.seed, cfg.seed + cfg.seeds) if ensemble else [None]
    for seed in seeds:
        # random profiles are drawn on the truncated window
        sub = RunConfig(**{**cfg.__dict__, "r": ell})
        rows, margin = _compare_rows(cfg, build_model(sub, seed), ell, seed)
        for row in rows:
            table.add(row)
        worst = min(worst, margin)
    return (EXIT_VIOLATION if worst < -VIOLATION_TOL else EXIT_OK), table


def cmd_extremal(cfg):
    cfg.require("r")
    n = cfg.n
    if n is None:
        n = build_model(cfg).n
    params = cfg.params
    res = extremal_solve(params.rho, params.kappa, n, cfg.r, steps=cfg.steps, seed=cfg.seed)
    header = [
        "rho", "kappa", "n", "r", "min_log_deriv", "model_value", "gap", "isotropy_defect", "iterations",
    ]
    row = res.to_row()
    if cfg.phase_beta is not None:
        header.append("phase_unique")
        row.append(phase_uniqueness_check(cfg.rho, cfg.phase_beta, cfg.r))
    table = Table(header)
    table.add(row)
    return (EXIT_VIOLATION if res.gap < -VIOLATION_TOL else EXIT_OK), table


def sweep_cases(sweep, base_seed=0):
    """Deterministic ``(rho, kappa, n, r, seed)`` cases for a sweep block.

    The parameter grid is the product of the four lists in that order;
    ``count`` profiles are assigned to it round-robin with consecutive
    seeds. Radii are clipped to the class window of each ``rho``.
    """
    grid = list(itertools.product(sweep["rho"], sweep["kappa"], sweep["n"], sweep["r"]))
    count = sweep.get("count", len(grid))
    cases = []
    for k in range(count):
        rho, kappa, n, r = grid[k % len(grid)]
        ell, _ = class_window(RicClassParams(rho, kappa), r)
        cases.append((rho, kappa, n, ell, base_seed + k))
    return cases


def _sweep_case(args):
    rho, kappa, n, r, seed, steps, grid_points = args
    params = RicClassParams(rho, kappa)
    profile = make_random_class_profile(n, params, r, seed)
    lcd = check_conditions(profile, kappa, r, steps, grid_points, rho=rho)[0]
    return [rho, kappa, n, r, seed, lcd.holds, lcd.worst_margin, lcd.worst_r]


def cmd_sweep(cfg):
    if cfg.sweep is None:
        raise ConfigError("config.sweep: required for sweep")
    cases = sweep_cases(cfg.sweep, cfg.seed)
    jobs = [c + (cfg.steps, cfg.grid_points) for c in cases]
    workers = cfg.sweep.get("workers", 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_case, jobs))
    else:
        rows = [_sweep_case(j) for j in jobs]
    table = Table(["rho", "kappa", "n", "r", "seed", "lcd_holds", "worst_margin", "worst_r"])
    for row in rows:
        table.add(row)
    worst = min(row[6] for row in rows)
    return (EXIT_VIOLATION if worst < -VIOLATION_TOL else EXIT_OK), table


COMMANDS = {
    "classify": cmd_classify,
    "candle": cmd_candle,
    "compare": cmd_compare,
    "extremal": cmd_extremal,
    "sweep": cmd_sweep,
}


def _write(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def build_parser():
    parser = argparse.ArgumentParser(prog="rrc", description="Root-Ricci comparison toolkit")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--steps", type=int, help="override the config step count")
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--trace", help="candle only: write a per-node CSV trace here")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        overrides = {k: v for k, v in (("seed", args.seed), ("steps", args.steps)) if v is not None}
        if overrides:
            cfg = parse_config({**_as_doc(cfg), **overrides})
        if args.command == "candle":
            code, table = cmd_candle(cfg, trace=args.trace)
        else:
            code, table = COMMANDS[args.command](cfg)
    except InvalidParams as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except RootRicciError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PRECONDITION
    _write(table.render(cfg.format), args.out or cfg.output)
    return code


def _as_doc(cfg):
    doc = {
        k: v
        for k, v in cfg.__dict__.items()
        if v is not None and k not in ("rho", "kappa")
    }
    params = {k: v for k, v in (("rho", cfg.rho), ("kappa", cfg.kappa)) if v is not None}
    if params:
        doc["params"] = params
    return doc


if __name__ == "__main__":
    sys.exit(main())
