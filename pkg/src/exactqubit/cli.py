"""Command-line driver: solve, design-hadamard, narp, fringe and verify.

Every command writes CSV (or JSON) to --out, or to stdout when --out is not
given.  Exit status is 0 on success, 1 when a validation or tolerance check
fails (a JSON report goes to stdout), and 2 for a malformed configuration.
"""

from __future__ import annotations

import argparse
import ast
import io
import json
import math
import operator
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .core import ExactQubitError, TimeGrid, gate_fidelity, hadamard
from .families import (
    CubicFamily,
    GaussianFamily,
    PolyFamily,
    cubic_chi,
    cubic_envelope,
    design_hadamard,
    gaussian_chi,
    gaussian_envelope,
    poly_chi,
)
from .interferometry import fringe_peaks, fringe_scan
from .oracle import FieldFunctions, IntegratorConfig, integrate_lab, verify
from .solver import EnvelopeSpec, evolution_trace, synthesize_fields, validate

COMMANDS = ("solve", "design-hadamard", "narp", "fringe", "verify")
FAMILIES = ("gaussian", "poly", "cubic")
ENVELOPES = ("constant", "oscillating", "gaussian")
DEFAULT_FAMILY = {"solve": "gaussian", "design-hadamard": "poly", "narp": "cubic",
                  "fringe": "cubic", "verify": "cubic"}


class ConfigError(Exception):
    """Malformed or inconsistent configuration (exit status 2)."""


class CheckFailed(Exception):
    """A validation or tolerance check failed (exit status 1)."""

    def __init__(self, report: dict):
        super().__init__(report.get("reason", "check failed"))
        self.report = report


# -- numbers ------------------------------------------------------------------

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow,
        ast.USub: operator.neg, ast.UAdd: operator.pos}


def parse_number(text) -> float:
    """A float, or a small arithmetic expression in pi such as "pi/2.1" or "4/pi"."""
    if isinstance(text, (int, float)):
        return float(text)
    try:
        return float(text)
    except ValueError:
        pass

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"cannot read {text!r} as a number")

    try:
        return ev(ast.parse(str(text).strip(), mode="eval"))
    except (SyntaxError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot read {text!r} as a number") from exc


def fmt(x: float) -> str:
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    return f"{x + 0.0:.12g}"  # + 0.0 folds -0 into 0


# -- configuration ------------------------------------------------------------

@dataclass
class RunConfig:
    command: str
    family: str | None = None
    params: dict = field(default_factory=dict)
    envelope: str | None = None
    t_end: float | None = None
    samples: int = 201
    chi_final: float | None = None
    bx: float | None = None
    T: float | None = None
    T_min: float | None = None
    T_max: float | None = None
    steps: int = 50
    tol: float = 1e-6
    out: str | None = None
    format: str = "csv"

    def check(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.family is None:
            self.family = DEFAULT_FAMILY[self.command]
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        if self.envelope is not None and self.envelope not in ENVELOPES:
            raise ConfigError(f"unknown envelope {self.envelope!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.samples < 2 or self.steps < 1:
            raise ConfigError("samples must be >= 2 and steps >= 1")
        if not self.tol > 0.0:
            raise ConfigError("tol must be positive")


_KEYS = {"command", "family", "params", "envelope", "t_end", "samples", "chi_final", "bx",
         "T", "T_min", "T_max", "steps", "tol", "out", "format"}
_NUMERIC = {"t_end", "chi_final", "bx", "T", "T_min", "T_max", "tol"}


def _normalise(raw: dict) -> dict:
    out = {}
    for key, value in raw.items():
        k = key.replace("-", "_")
        if k not in _KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        if value is None:
            continue
        if k in _NUMERIC:
            value = parse_number(value)
        elif k in ("samples", "steps"):
            if isinstance(value, float) and not value.is_integer():
                raise ConfigError(f"{key} must be an integer")
            try:
                value = int(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{key} must be an integer") from exc
        elif k == "params":
            if not isinstance(value, dict):
                raise ConfigError("params must be a mapping of name to number")
            value = {str(n): parse_number(v) for n, v in value.items()}
        out[k] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="exactqubit", description=__doc__.splitlines()[0])
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--config", help="JSON file with any of the options below; flags win")
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--param", action="append", default=[], metavar="K=V",
                   help="family or envelope parameter, repeatable (e.g. mu=0.25, a6=4/pi)")
    p.add_argument("--envelope", choices=ENVELOPES)
    p.add_argument("--t-end")
    p.add_argument("--samples", type=int)
    p.add_argument("--chi-final", help="target chi(T), radians or e.g. pi/2.1")
    p.add_argument("--bx")
    p.add_argument("--T")
    p.add_argument("--T-min")
    p.add_argument("--T-max")
    p.add_argument("--steps", type=int)
    p.add_argument("--tol")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))
    return p


def config_from_args(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    raw: dict = {}
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        raw.update(_normalise(loaded))
    params = dict(raw.get("params", {}))
    for item in args.param:
        if "=" not in item:
            raise ConfigError(f"--param expects K=V, got {item!r}")
        k, v = item.split("=", 1)
        params[k.strip()] = parse_number(v)
    flags = {k: getattr(args, k) for k in ("command", "family", "envelope", "t_end", "samples",
                                           "chi_final", "bx", "T", "T_min", "T_max", "steps",
                                           "tol", "out", "format")}
    raw.update(_normalise({k: v for k, v in flags.items() if v is not None}))
    raw["params"] = params
    if "command" not in raw:
        raise ConfigError("no command given")
    cfg = RunConfig(**raw)
    cfg.check()
    return cfg


# -- building the physics from a config -----------------------------------------

def _take(params: dict, allowed: set[str], what: str):
    unknown = set(params) - allowed
    if unknown:
        raise ConfigError(f"unknown {what} parameter(s): {', '.join(sorted(unknown))}")


def _envelope(cfg: RunConfig, default: str, gaussian=None) -> EnvelopeSpec:
    name = cfg.envelope or default
    beta0 = cfg.params.get("beta0", 1.0)
    if name == "constant":
        return EnvelopeSpec.constant(beta0)
    if name == "oscillating":
        return EnvelopeSpec.oscillating(beta0)
    if gaussian is None:
        raise ConfigError("the gaussian envelope belongs to the gaussian family")
    return gaussian_envelope(gaussian)


def _cubic(cfg: RunConfig, T: float | None = None) -> CubicFamily:
    _take(cfg.params, {"a"}, "cubic")
    bx = cfg.bx if cfg.bx is not None else 1.0
    T = T if T is not None else (cfg.T if cfg.T is not None else 1.8 / bx)
    if "a" in cfg.params:
        if cfg.chi_final is not None:
            raise ConfigError("give either a or --chi-final for the cubic family, not both")
        return CubicFamily(cfg.params["a"], bx, T)
    chi_T = cfg.chi_final if cfg.chi_final is not None else math.pi / 2.0
    return CubicFamily.for_target(chi_T, bx, T)


def build_problem(cfg: RunConfig):
    """(chi, env, t_end) for the configured family."""
    p = cfg.params
    if cfg.family == "gaussian":
        _take(p, {"mu", "nu", "t0", "beta0"}, "gaussian")
        try:
            fam = GaussianFamily(p.get("mu", 0.25), p.get("nu", 3.0), p.get("t0", 5.0))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        env = _envelope(cfg, "gaussian", fam)
        return gaussian_chi(fam, env), env, cfg.t_end or 10.0
    if cfg.family == "poly":
        fam = _poly(cfg)
        env = _envelope(cfg, "oscillating" if fam.variable == "B" else "constant")
        try:
            chi = poly_chi(fam, env)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return chi, env, cfg.t_end or 10.0
    fam = _cubic(cfg)
    return cubic_chi(fam), cubic_envelope(fam), fam.T


def _poly(cfg: RunConfig) -> PolyFamily:
    p = dict(cfg.params)
    k = int(p.pop("k", 6))
    beta0 = p.pop("beta0", 1.0)
    variable = "t" if p.pop("time_form", 0.0) else "B"
    names = {f"a{j}" for j in range(2, k + 1, 2)}
    _take(p, names, "poly")
    if not p:
        return PolyFamily.hadamard(k, beta0, variable)
    a = tuple(p.get(f"a{j}", 0.0) for j in range(2, k + 1, 2))
    try:
        return PolyFamily(k, a, beta0, variable)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# -- output ----------------------------------------------------------------------

def _table(header: list[str], rows: list[list[float]], fmt_name: str) -> str:
    if fmt_name == "json":
        data = [{h: (fmt(v) if isinstance(v, float) and math.isinf(v) else v)
                 for h, v in zip(header, r)} for r in rows]
        return json.dumps(data, indent=1) + "\n"
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(fmt(float(v)) for v in r) + "\n")
    return buf.getvalue()


def _emit(text: str, out: str | None, suffix: str | None = None):
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if suffix is not None:
        path = path.with_suffix(suffix)
    path.write_text(text)


def _require_valid(chi, env, grid):
    rep = validate(chi, env, grid)
    if not rep.ok:
        raise CheckFailed({"reason": "validation failed",
                           "violations": [{"t": t, "reason": r} for t, r in rep.violations[:50]]})


# -- commands --------------------------------------------------------------------

SOLVE_HEADER = ["t", "bx", "by", "bz", "re_u11", "im_u11", "re_u21", "im_u21", "p2"]


def cmd_solve(cfg: RunConfig) -> int:
    chi, env, t_end = build_problem(cfg)
    grid = TimeGrid.linspace(0.0, t_end, cfg.samples)
    _require_valid(chi, env, grid)
    fields = synthesize_fields(chi, env, grid)
    us = evolution_trace(chi, env, grid)
    rows = []
    for i, u in enumerate(us):
        # the writer refuses rows that drifted off the unit sphere
        assert u.unitarity_drift <= 1e-10, u
        rows.append([float(grid.samples[i]), float(fields.bx[i]), float(fields.by[i]),
                     float(fields.bz[i]), u.u11.real, u.u11.imag, u.u21.real, u.u21.imag,
                     abs(u.u21) ** 2])
    _emit(_table(SOLVE_HEADER, rows, cfg.format), cfg.out)
    return 0


def cmd_design_hadamard(cfg: RunConfig) -> int:
    if cfg.family != "poly":
        raise ConfigError("design-hadamard works on the poly family")
    fam = _poly(cfg)
    env = _envelope(cfg, "oscillating" if fam.variable == "B" else "constant")
    try:
        d = design_hadamard(fam, env, samples=cfg.samples)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    num = integrate_lab(FieldFunctions.from_solution(d.chi, d.env, d.T),
                        TimeGrid.linspace(0.0, d.T, 2)).propagators[-1]
    summary = {"T": d.T, "fidelity": gate_fidelity(d.propagator, hadamard()),
               "oracle_fidelity": gate_fidelity(num, hadamard()), "phase": d.phase}
    fields = d.fields
    rows = [[float(t), float(x), float(y), float(z)]
            for t, x, y, z in zip(fields.times, fields.bx, fields.by, fields.bz)]
    if cfg.out is None:
        sys.stdout.write(json.dumps(summary, indent=1) + "\n")
    else:
        _emit(json.dumps(summary, indent=1) + "\n", cfg.out, ".json")
        _emit(_table(["t", "bx", "by", "bz"], rows, "csv"), cfg.out, ".csv")
    if summary["oracle_fidelity"] < 0.999:
        raise CheckFailed({"reason": "Hadamard fidelity below 0.999", **summary})
    return 0


def _T_values(cfg: RunConfig, chi_T: float, bx: float) -> list[float]:
    if cfg.T is not None and cfg.T_min is None and cfg.T_max is None:
        return [cfg.T]
    lo = cfg.T_min if cfg.T_min is not None else chi_T / bx
    hi = cfg.T_max if cfg.T_max is not None else 9.0 * chi_T / bx
    if cfg.steps == 1:
        return [lo]
    return [lo + (hi - lo) * i / (cfg.steps - 1) for i in range(cfg.steps)]


def cmd_narp(cfg: RunConfig) -> int:
    if cfg.family != "cubic":
        raise ConfigError("narp works on the cubic family")
    bx = cfg.bx if cfg.bx is not None else 1.0
    chi_T = cfg.chi_final if cfg.chi_final is not None else math.pi / 2.0
    rows = []
    for T in _T_values(cfg, chi_T, bx):
        fam = _cubic(cfg, T)
        chi = cubic_chi(fam)
        for i in range(cfg.samples):
            t = T * i / (cfg.samples - 1)
            rows.append([T, t, math.sin(chi.chi(t)) ** 2])
    _emit(_table(["T", "t", "p2"], rows, cfg.format), cfg.out)
    return 0


def cmd_fringe(cfg: RunConfig) -> int:
    if cfg.family not in ("cubic",):
        raise ConfigError("fringe works on the cubic family")
    bx = cfg.bx if cfg.bx is not None else 1.0
    chi_T = cfg.chi_final if cfg.chi_final is not None else math.pi / 2.1
    Ts = _T_values(cfg, chi_T, bx)
    scan = fringe_scan(chi_T, bx, (Ts[0], Ts[-1]), len(Ts))
    for T, why in scan.skipped:
        print(f"skipped T={fmt(T)}: {why}", file=sys.stderr)
    rows = [[p.T, p.xi0_T, p.p2_bar] for p in scan.points]
    if cfg.format == "json":
        text = json.dumps({"points": [dict(zip(("T", "xi0", "p2_bar"), r)) for r in rows],
                           "peaks": fringe_peaks(scan),
                           "skipped": [{"T": T, "reason": w} for T, w in scan.skipped]},
                          indent=1) + "\n"
    else:
        text = _table(["T", "xi0", "p2_bar"], rows, "csv")
    _emit(text, cfg.out)
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    chi, env, t_end = build_problem(cfg)
    grid = TimeGrid.linspace(0.0, t_end, cfg.samples)
    _require_valid(chi, env, grid)
    v = verify(chi, env, t_end, samples=min(cfg.samples, 101), cfg=IntegratorConfig(), tol=cfg.tol)
    report = {"family": cfg.family, "max_frobenius": v.comparison.max_frobenius,
              "max_unitarity_drift": v.comparison.max_unitarity_drift,
              "worst_t": v.comparison.worst_t, "interval": list(v.interval),
              "halved_clip_frobenius": v.halved_clip, "tol": cfg.tol, "ok": v.ok}
    if not v.ok:
        report["reason"] = "analytic and numerical propagators disagree beyond tol"
        raise CheckFailed(report)
    _emit(json.dumps(report, indent=1) + "\n", cfg.out)
    return 0


HANDLERS = {"solve": cmd_solve, "design-hadamard": cmd_design_hadamard, "narp": cmd_narp,
            "fringe": cmd_fringe, "verify": cmd_verify}


def run(cfg: RunConfig) -> int:
    try:
        return HANDLERS[cfg.command](cfg)
    except CheckFailed as exc:
        sys.stdout.write(json.dumps(exc.report, indent=1, default=str) + "\n")
        return 1
    except ExactQubitError as exc:
        sys.stdout.write(json.dumps({"reason": type(exc).__name__, "detail": str(exc)}) + "\n")
        return 1


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return run(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
