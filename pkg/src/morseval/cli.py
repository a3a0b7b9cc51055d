"""Command line: ``morseval <command> [options]``.

Every command prints a JSON report on stdout.  With ``--out DIR`` it also
writes ``report.json`` and, for commands that produce a deformation path,
``frames.csv`` and ``figure.svg``.  ``--format csv|svg`` prints that artifact
on stdout instead of the JSON.

Exit codes: 0 success, 1 usage error, 2 precondition violation, 3 a numerical
certification missed its tolerance.  Errors are also written to stderr as a
JSON object ``{"error", "stage", "witness"}``.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from . import bump as Bm
from . import dromedary as D
from . import eliminate as El
from . import moser as Ms
from . import normal_form as NF
from . import plotting
from . import report as R
from . import transverse as Tv
from .errors import CertificationError, MorsevalError, PreconditionError
from .fields import Box, Grid, brute_force_census, critical_census, eval_jet, parse, same_census
from .val import TubeChart, lower_value, move_values_1d

FORMATS = ("json", "csv", "svg")
VARS = ("x", "y", "z")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    params: dict
    out: Path | None = None
    format: str = "json"
    seed: int = 0
    artifacts: dict = dc_field(default_factory=dict)


@dataclass
class Result:
    report: dict
    frames: str | None = None
    figure: str | None = None
    failure: CertificationError | None = None


# argument parsing ----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def numbers(text: str) -> list:
    try:
        return [float(v) for v in re.split(r"[,;\s]+", text.strip()) if v]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def box_arg(text: str) -> Box:
    v = numbers(text)
    if not v or len(v) % 2:
        raise UsageError(f"a box needs lo,hi pairs, got {text!r}")
    lo, hi = v[0::2], v[1::2]
    if any(a >= b for a, b in zip(lo, hi)):
        raise PreconditionError("box needs lo < hi on every axis", stage="cli",
                                witness={"box": [lo, hi]})
    return Box(tuple(lo), tuple(hi))


def ints(text: str) -> list:
    v = numbers(text) if text else []
    if any(x != int(x) for x in v):
        raise UsageError(f"expected integers, got {text!r}")
    return [int(x) for x in v]


def _common(p):
    p.add_argument("--out", help="directory for report.json, frames.csv, figure.svg")
    p.add_argument("--format", default="json", choices=FORMATS, help="what to print on stdout")
    p.add_argument("--grid", type=int, help="census grid per axis")
    p.add_argument("--tol", type=float, help="census / certification tolerance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON file with option defaults (flags win)")


def build_parser():
    parser = _Parser(prog="morseval", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("parse", help="parse an expression and print its canonical form")
    p.add_argument("--expr", required=True)
    p.add_argument("--vars", default="x")
    p.add_argument("--point", help="also evaluate value, gradient and Hessian here")

    p = sub.add_parser("census", help="critical points in a box")
    p.add_argument("--expr", required=True)
    p.add_argument("--vars")
    p.add_argument("--box", required=True)
    p.add_argument("--oracle", action="store_true", help="compare with the brute-force census")

    p = sub.add_parser("bump", help="kernel and cutoff diagnostics")
    p.add_argument("--plot", action="store_true", help="print CSV x, rho, beta")
    p.add_argument("--resolution", type=int, default=201)
    p.add_argument("--kind", choices=Bm.KINDS, help="also run a cutoff flow")
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--x", type=float, default=0.0)

    p = sub.add_parser("normal-form", help="Morse chart at a critical point")
    p.add_argument("--expr", required=True)
    p.add_argument("--vars")
    p.add_argument("--point", required=True)
    p.add_argument("--radius", type=float, default=0.5)
    p.add_argument("--samples", type=int, default=1000)

    p = sub.add_parser("lower", help="lower the top critical level of a val")
    p.add_argument("--expr", required=True)
    p.add_argument("--vars")
    p.add_argument("--box", required=True)
    p.add_argument("--base-axes", default="", help="axes spanning W (empty: W is the origin)")
    p.add_argument("--size", type=float, required=True, help="tube size r_W")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--u", type=float, required=True)
    p.add_argument("--u-prime", type=float, required=True)
    p.add_argument("--frames", type=int, default=9)
    p.add_argument("--resolution", type=int)

    p = sub.add_parser("move", help="move critical values of a one-variable function")
    p.add_argument("--expr", required=True)
    p.add_argument("--box", required=True)
    p.add_argument("--targets", required=True, help="location:value pairs, comma separated")
    p.add_argument("--frames", type=int, default=9)
    p.add_argument("--resolution", type=int, default=401)

    p = sub.add_parser("moser", help="conjugate h to k by the path method")
    p.add_argument("--h", required=True)
    p.add_argument("--k", required=True)
    p.add_argument("--domain", required=True)
    p.add_argument("--W", default="0", help="fixed points, comma separated")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--samples", type=int, default=201)

    p = sub.add_parser("dromedary", help="cancel the hump and dip of a one-variable function")
    p.add_argument("--expr", required=True)
    p.add_argument("--interval", required=True)
    p.add_argument("--frames", type=int, default=9)
    p.add_argument("--resolution", type=int, default=401)

    p = sub.add_parser("transverse", help="extension of an invariant sheet in the split model")
    p.add_argument("--theta", default="", help="one expression per R coordinate, ';' separated")
    p.add_argument("--dims", default="1,1", help="dim N, dim R")
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=2.0)
    p.add_argument("--delta", type=float, default=0.3)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--extra-ray", action="append", default=None,
                   help="extra invariant ray direction in P (repeatable)")

    p = sub.add_parser("eliminate", help="eliminate a critical pair in the product model")
    p.add_argument("--k", required=True)
    p.add_argument("--interval", required=True)
    p.add_argument("--fiber-dims", default="0,1", help="a,b: negative and positive fiber dims")
    p.add_argument("--radius", type=float, default=16.0)
    p.add_argument("--nape", type=float)
    p.add_argument("--frames", type=int, default=7)
    p.add_argument("--resolution", type=int, default=97)

    for p in sub.choices.values():
        _common(p)
    return parser


def _value_options(parser):
    opts = set()
    for p in parser._subparsers._group_actions[0].choices.values():
        for a in p._actions:
            if a.option_strings and a.nargs is None and not isinstance(
                    a, (argparse._StoreTrueAction, argparse._HelpAction)):
                opts.update(s for s in a.option_strings if s.startswith("--"))
    return opts


def _glue(argv, opts):
    """Attach values to their option so that '--box -3,3' is not read as a flag."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in opts and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def _config_path(argv):
    for i, tok in enumerate(argv):
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
    return None


def _apply_config(parser, command, path):
    try:
        conf = json.loads(Path(path).read_text())
    except (OSError, ValueError) as err:
        raise UsageError(f"cannot read config: {err}") from None
    if not isinstance(conf, dict):
        raise UsageError("config must be a JSON object")
    sp = parser._subparsers._group_actions[0].choices[command]
    conf = {k.replace("-", "_"): v for k, v in conf.items()}
    by_dest = {a.dest: a for a in sp._actions}
    unknown = [k for k in conf if k not in by_dest or k in ("config", "help")]
    if unknown:
        raise UsageError(f"unknown config keys: {unknown}")
    for k, v in conf.items():
        act = by_dest[k]
        # config values go through the same conversion as flags
        if act.type is not None and v is not None and not isinstance(v, bool):
            try:
                v = act.type(v)
            except (TypeError, ValueError):
                raise UsageError(f"bad config value for {k}: {v!r}") from None
        if act.choices is not None and v not in act.choices:
            raise UsageError(f"bad config value for {k}: {v!r}")
        act.default = v
        act.required = False


def parse_args(argv) -> RunConfig:
    parser = build_parser()
    argv = list(argv)
    path = _config_path(argv)
    if path is not None and argv and argv[0] in parser._subparsers._group_actions[0].choices:
        _apply_config(parser, argv[0], path)
    args = parser.parse_args(_glue(argv, _value_options(parser)))
    params = {k: v for k, v in vars(args).items()
              if k not in ("command", "out", "format", "seed", "config")}
    cfg = RunConfig(args.command, params, Path(args.out) if args.out else None,
                    args.format, int(args.seed))
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    p = cfg.params
    for key in ("grid", "frames", "resolution", "samples", "steps"):
        v = p.get(key)
        if v is not None and v < (2 if key in ("grid", "frames", "resolution") else 1):
            raise PreconditionError(f"--{key} is too small", stage="cli", witness={key: v})
    if p.get("tol") is not None and not p["tol"] > 0:
        raise PreconditionError("--tol must be positive", stage="cli", witness={"tol": p["tol"]})
    if cfg.format == "csv" and cfg.command in ("parse", "census", "normal-form", "moser", "transverse"):
        raise UsageError(f"{cfg.command} has no CSV output")
    if cfg.format == "svg" and cfg.command in ("parse", "census", "normal-form", "moser", "transverse"):
        raise UsageError(f"{cfg.command} has no figure")


# helpers -------------------------------------------------------------------------

def _vars(spec, dim):
    if spec:
        names = [v.strip() for v in spec.split(",") if v.strip()]
    else:
        names = list(VARS[:dim])
    if len(names) != dim:
        raise UsageError(f"expected {dim} variable names, got {names}")
    return names


def _check_tol(value, tol, stage, message, witness=None):
    if not value <= tol:
        return CertificationError(message, stage=stage,
                                  witness={"value": value, "tolerance": tol, **(witness or {})})
    return None


def _frames(path, s_values, box, counts, title, marks=None):
    s, pts, vals = R.sample_frames(path, s_values, box, counts)
    return R.frames_csv(s, pts, vals), plotting.frames_figure(s, pts, vals, title, marks)


# commands ------------------------------------------------------------------------

def cmd_parse(cfg: RunConfig) -> Result:
    p = cfg.params
    names = _vars(p["vars"], len(p["vars"].split(",")))
    f = parse(p["expr"], names)
    canon = f.to_source()
    again = parse(canon, names)
    body = {"source": p["expr"], "canonical": canon, "vars": names,
            "round_trip": again.to_source() == canon}
    if p.get("point"):
        pt = numbers(p["point"])
        if len(pt) != len(names):
            raise UsageError("point dimension does not match the variables")
        v, g, h = eval_jet(f, pt, 2)
        body["jet"] = {"point": pt, "value": v, "gradient": g, "hessian": h}
    return Result(R.envelope("parse", body))


def cmd_census(cfg: RunConfig) -> Result:
    p = cfg.params
    box = box_arg(p["box"])
    f = parse(p["expr"], _vars(p["vars"], box.dim), box)
    grid = p["grid"] or 64
    tol = p["tol"] or 1e-8
    cen = critical_census(f, box, grid, tol)
    body = {"expr": p["expr"], "box": box, "grid": grid, "tol": tol, "count": len(cen), "census": cen}
    failure = None
    if p["oracle"]:
        ref = brute_force_census(f, box, grid, tol)
        match = same_census(cen, ref, tol)
        body["oracle"] = {"count": len(ref), "match": match}
        if not match:
            failure = CertificationError("Newton census disagrees with the brute-force census",
                                         stage="census", witness={"newton": len(cen), "oracle": len(ref)})
    return Result(R.envelope("census", body), failure=failure)


def cmd_bump(cfg: RunConfig) -> Result:
    p = cfg.params
    integral, _ = quad(Bm.rho2, 0, 1, epsabs=1e-13, epsrel=1e-13, limit=400)
    body = {"rho2_integral": integral,
            "beta": {"0": float(Bm.beta(0.0)), "0.5": float(Bm.beta(0.5)), "1": float(Bm.beta(1.0))}}
    failure = _check_tol(abs(integral - 1), 1e-8, "bump", "kernel normalization off")
    if p["kind"]:
        spec = Bm.CutoffSpec(p["kind"], p["eps"], p["a"])
        val = float(Bm.cutoff_flow(spec, p["t"], np.array([p["x"]]))[0])
        ref = Bm.flow_by_integration(spec, p["t"], p["x"])
        body["flow"] = {"kind": p["kind"], "eps": p["eps"], "a": p["a"], "t": p["t"], "x": p["x"],
                        "value": val, "integrated": ref, "difference": abs(val - ref)}
        failure = failure or _check_tol(abs(val - ref), 1e-8, "bump", "flow disagrees with integration")
    x = np.linspace(-0.25, 1.25, p["resolution"])
    rho, b = Bm.kernel(x), Bm.beta(x)
    rows = ["x,rho,beta"] + [f"{R.fmt(a)},{R.fmt(r)},{R.fmt(c)}" for a, r, c in zip(x, rho, b)]
    fig = plotting.curves(x, {"rho": rho, "beta": b}, "bump kernel and its primitive")
    return Result(R.envelope("bump", body), "\n".join(rows) + "\n", fig, failure)


def cmd_normal_form(cfg: RunConfig) -> Result:
    p = cfg.params
    c = numbers(p["point"])
    f = parse(p["expr"], _vars(p["vars"], len(c)))
    chart = NF.morse_chart(f, c, p["radius"], samples=p["samples"], seed=cfg.seed,
                           tol=p["tol"] or 1e-8)
    body = {"center": c, "index": chart.index, "coindex": chart.coindex,
            "residual_bound": chart.residual_bound, "radius_used": chart.radius,
            "inverse_error": chart.inverse_error}
    return Result(R.envelope("normal-form", body))


def _path_report(path, box, grid, tol, extra):
    before = critical_census(path.start(), box, grid, tol)
    after = critical_census(path.end(), box, grid, tol)
    return {"landmarks": path.landmarks, "census_before": before, "census_after": after,
            "support": path.support, **extra}


def cmd_lower(cfg: RunConfig) -> Result:
    p = cfg.params
    box = box_arg(p["box"])
    f = parse(p["expr"], _vars(p["vars"], box.dim), box)
    axes = ints(p["base_axes"])
    if any(a < 0 or a >= box.dim for a in axes):
        raise PreconditionError("base axis out of range", stage="lower", witness={"axes": axes})
    if axes:
        tube = TubeChart.from_field(f, axes, p["size"], box)
    else:
        tube = TubeChart(box.dim, (), p["size"], float(f(np.zeros((1, box.dim)))[0]), box=box)
    path = lower_value(f, tube, p["kappa"], p["u"], p["u_prime"])
    path.landmarks.update({k: path.info[k] for k in ("a", "eps", "kappa", "u", "u_prime")})
    res = p["resolution"] or (401 if box.dim == 1 else 65)
    pts = Grid.uniform(box.dim, res).points(box)
    end, f0 = path.end()(pts), f(pts)
    nb = path.info["neighborhood"].contains(pts)
    shift = float(np.max(np.abs(end[nb] - (f0[nb] - (p["kappa"] - p["u"]))), initial=0.0))
    sig = np.linspace(0, 1, 9)
    vals = np.array([path(s)(pts) for s in sig])
    mono = float(np.max(np.diff(vals, axis=0)))
    grid, tol = p["grid"] or 64, p["tol"] or 1e-8
    body = _path_report(path, box, grid, tol, {
        "neighborhood_points": int(nb.sum()), "neighborhood_residual": shift,
        "max_increase": mono})
    failure = (_check_tol(shift, 1e-6, "lower", "final function is not the shifted one on the neighborhood")
               or _check_tol(mono, 1e-10, "lower", "path is not nonincreasing"))
    csv_text, fig = _frames(path, np.linspace(0, 1, p["frames"]), box, res, "lowering a critical level")
    return Result(R.envelope("lower", body), csv_text, fig, failure)


def cmd_move(cfg: RunConfig) -> Result:
    p = cfg.params
    box = box_arg(p["box"])
    if box.dim != 1:
        raise PreconditionError("move works on one-variable functions", stage="move")
    k = parse(p["expr"], ["x"], box)
    targets = {}
    for item in p["targets"].split(","):
        try:
            loc, val = item.split(":")
            targets[float(loc)] = float(val)
        except ValueError:
            raise UsageError(f"targets are location:value pairs, got {item!r}") from None
    grid, tol = p["grid"] or 512, p["tol"] or 1e-8
    path = move_values_1d(k, targets, box, grid, tol)
    body = _path_report(path, box, grid, tol, {"targets": path.info.get("targets", [])})
    csv_text, fig = _frames(path, np.linspace(0, 1, p["frames"]), box, p["resolution"],
                            "moving critical values")
    return Result(R.envelope("move", body), csv_text, fig)


def cmd_moser(cfg: RunConfig) -> Result:
    p = cfg.params
    dom = box_arg(p["domain"])
    names = list(VARS[:dom.dim])
    h, k = parse(p["h"], names, dom), parse(p["k"], names, dom)
    W = np.array(numbers(p["W"])) if p["W"] else np.zeros(0)
    tol = p["tol"] or 1e-6
    body = {"domain": dom, "W": W}
    if dom.dim == 1 and len(W):
        sur = Ms.surrogate_check(h, h - k, W)
        body["surrogate"] = sur
        if not sur["passed"]:
            bad = next(r for r in sur["points"] if not r["passed"])
            raise PreconditionError("d = h - k fails the vanishing-order condition", stage="moser",
                                    witness=bad)
    prob = Ms.MoserProblem(h, k, W.reshape(-1, dom.dim))
    iso = Ms.moser_isotopy(prob, dom, p["steps"], p["samples"])
    body.update({"residual": iso.residual, "sub_box": dom, "fixed_W_error": iso.fixed_W_error,
                 "order_check": Ms.order_check(prob, dom, p["steps"], p["samples"])})
    failure = (_check_tol(iso.residual, tol, "moser", "conjugacy residual above tolerance")
               or _check_tol(iso.fixed_W_error, 1e-10, "moser", "flow does not fix W"))
    return Result(R.envelope("moser", body), failure=failure)


def cmd_dromedary(cfg: RunConfig) -> Result:
    p = cfg.params
    lo, hi = numbers(p["interval"])
    box = Box((lo,), (hi,))
    k = parse(p["expr"], ["x"], box)
    frame = D.detect(k, (lo, hi))
    path = D.path(k, frame)
    t0 = path.landmarks["t0"]
    grid, tol = p["grid"] or 4096, p["tol"] or 1e-8
    sweep = D.census_sweep(path, [0.0, 0.5, 1.0, t0 - 1e-3, t0 + 1e-3, 2.0], grid, tol)
    degen = D.degenerate_at_t0(path, grid)
    checks = D.verify_path(path, k)
    first, second = path.info["scolie"]
    body = {"expr": p["expr"], "frame": frame, "scale": path.info["scale"],
            "eta": [first.eta, second.eta], "e": [first.e, second.e],
            "t0": t0, "t0_closed_form": path.landmarks["t0_closed_form"],
            "support": path.support, "census_sweep": sweep, "degenerate_at_t0": degen,
            "checks": checks}
    counts = [row["count"] for row in sweep]
    failure = None
    if counts[:4] != [2, 2, 2, 2] or counts[4:] != [0, 0] or not degen["degenerate"]:
        failure = CertificationError("census sweep does not go 2 -> degenerate -> 0", stage="dromedary",
                                     witness={"counts": counts, "at_t0": degen["count"]})
    elif not checks["passed"]:
        failure = CertificationError("path checks failed", stage="dromedary", witness=checks)
    elif abs(t0 - path.landmarks["t0_closed_form"]) > 1e-3:
        failure = CertificationError("bisection t0 disagrees with the closed form", stage="dromedary",
                                     witness={"t0": t0, "closed_form": path.landmarks["t0_closed_form"]})
    s_values = np.unique(np.append(np.linspace(0, 2, p["frames"]), t0))
    csv_text, fig = _frames(path, s_values, box, p["resolution"], "dromedary path",
                            [frame.b, frame.c, frame.d, frame.n])
    return Result(R.envelope("dromedary", body), csv_text, fig, failure)


def cmd_transverse(cfg: RunConfig) -> Result:
    p = cfg.params
    dims = ints(p["dims"])
    if len(dims) != 2:
        raise UsageError("--dims takes dim N, dim R")
    n_dim, r_dim = dims
    model = Tv.SplitModel(n_dim, r_dim, p["s"], p["nu"], p["rho"], p["delta"])
    names = ["n"] if n_dim == 1 else [f"n{i + 1}" for i in range(n_dim)]
    exprs = [e for e in p["theta"].split(";") if e.strip()]
    if not exprs and r_dim:
        exprs = ["0"] * r_dim
    theta = [parse(e, names) for e in exprs]
    rays = [numbers(r) for r in (p["extra_ray"] or [])]
    sheet = Tv.GraphSheet(theta, np.array(rays, dtype=float).reshape(len(rays), -1)
                          if rays else np.zeros((0, 1 + r_dim)))
    rep = Tv.verify_extension(model, sheet, p["samples"], cfg.seed, p["grid"])
    body = {"dims": dims, "theta": exprs, "extra_rays": rays, **rep}
    failure = None
    if not rep["passed"]:
        name, clause = next((k, v) for k, v in rep.items() if isinstance(v, dict) and not v["passed"])
        failure = CertificationError(f"clause {name} failed", stage="transverse",
                                     witness={"clause": name, "point": clause.get("witness")})
    return Result(R.envelope("transverse", body), failure=failure)


def cmd_eliminate(cfg: RunConfig) -> Result:
    p = cfg.params
    lo, hi = numbers(p["interval"])
    fd = ints(p["fiber_dims"])
    if len(fd) != 2:
        raise UsageError("--fiber-dims takes a,b")
    k = parse(p["k"], ["u"], Box((lo,), (hi,)))
    model = El.ProductModel(k, fd[0], fd[1], (lo, hi), p["radius"], p["radius"], nape=p["nape"])
    grid = None
    if p["grid"]:
        grid = Grid(tuple([p["grid"]] + [17] * (model.dim - 1)))
    path, rep = El.eliminate_pair(model, verify=True, grid=grid)
    body = {"k": p["k"], "fiber_dims": fd, "radius": p["radius"], "box": model.box, **rep.to_dict()}
    failure = None
    if not rep.passed:
        failure = CertificationError("elimination checks failed", stage="eliminate",
                                     witness={"counts": rep.counts,
                                              "outside_max_dev": rep.outside_max_dev})
    t0 = path.landmarks["t0"]
    s_values = np.unique(np.append(np.linspace(path.s_min, path.s_max, p["frames"]), t0))
    counts = [p["resolution"]] + [max(9, p["resolution"] // 3) | 1] * (model.dim - 1)
    csv_text, fig = _frames(path, s_values, model.box, counts, "eliminating a critical pair")
    return Result(R.envelope("eliminate", body), csv_text, fig, failure)


COMMANDS = {
    "parse": cmd_parse, "census": cmd_census, "bump": cmd_bump, "normal-form": cmd_normal_form,
    "lower": cmd_lower, "move": cmd_move, "moser": cmd_moser, "dromedary": cmd_dromedary,
    "transverse": cmd_transverse, "eliminate": cmd_eliminate,
}


# entry points ----------------------------------------------------------------------

def _error(obj, stream):
    stream.write(R.dumps(obj))


def _write(cfg: RunConfig, res: Result, stdout):
    text = R.dumps(res.report)
    if cfg.out is not None:
        cfg.out.mkdir(parents=True, exist_ok=True)
        (cfg.out / "report.json").write_text(text)
        if res.frames is not None:
            (cfg.out / "frames.csv").write_text(res.frames)
        if res.figure is not None:
            (cfg.out / "figure.svg").write_text(res.figure)
    if cfg.format == "csv" or (cfg.command == "bump" and cfg.params.get("plot")):
        stdout.write(res.frames or "")
    elif cfg.format == "svg":
        stdout.write(res.figure or "")
    else:
        stdout.write(text)


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_args(argv)
        res = COMMANDS[cfg.command](cfg)
        _write(cfg, res, stdout)
        if res.failure is not None:
            raise res.failure
        return 0
    except UsageError as err:
        _error({"error": str(err), "stage": "usage", "witness": None}, stderr)
        return 1
    except CertificationError as err:
        _error(err.to_dict(), stderr)
        return 3
    except MorsevalError as err:
        _error(err.to_dict(), stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
