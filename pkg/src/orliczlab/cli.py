"""Configuration-driven experiment runner.

Usage::

    orliczlab <command> --config cfg.json --out outdir [--seed N] [--jobs N]
    orliczlab sweep --config cfg.json --out outdir --param s --values 0.6,0.7

Exit status: 0 on success, 2 for invalid configurations, 3 for numeric
failures (a partial report is still written).
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import jsonschema
import numpy as np

from . import __version__
from .degiorgi import SampleSpec, dg_membership, reports_to_csv
from .domain import GridFunction, build_grid, kernel_from_spec
from .energy import ModularKind, energy_If, luxemburg_norm, modular, tail_fprime_bounds
from .errors import ConfigurationError, DomainError, NumericError, OrliczLabError
from .expr import compile_expression
from .growth import check_growth_bounds, growth_from_dict, lemma_suite, log_grid, normalize
from .regularity import (
    _jsonable,
    interpolation_check,
    isoperimetric_check,
    sobolev_embedding_check,
    verify_holder_bound,
    verify_local_bound,
)
from .solve import euler_lagrange, minimize, residual_norm

TASKS = ["growth-check", "minimize", "dg-check", "holder", "bound", "inequalities"]
SWEEP_PARAMS = ["s", "delta", "h", "p", "q"]
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_S = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}
_POS = {"type": "number", "exclusiveMinimum": 0}
_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 1, "maxItems": 2}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["task", "growth"],
    "additionalProperties": False,
    "properties": {
        "task": {"enum": TASKS},
        "growth": {
            "type": "object",
            "required": ["family"],
            "properties": {
                "family": {"enum": ["power", "sum", "powerlog", "polynomial", "sampled"]},
                "params": {"type": "object"},
            },
        },
        "kernel": {"type": "string", "pattern": r"^(one|(lambda|checker):[0-9.eE+-]+)$"},
        "structure": {
            "type": "object",
            "properties": {
                "type": {"enum": ["euler_lagrange"]},
                "factor": _POS,
            },
            "additionalProperties": False,
        },
        "grid": {
            "type": "object",
            "required": ["dim", "h", "omega_radius", "R_infinity"],
            "additionalProperties": False,
            "properties": {
                "dim": {"enum": [1, 2]},
                "h": _POS,
                "omega_radius": _POS,
                "R_infinity": _POS,
                "center": _POINT,
            },
        },
        "s": {"oneOf": [_S, {"type": "array", "items": _S, "minItems": 1}]},
        "s_min": _S,
        "exterior": {"type": "string"},
        "tol": _POS,
        "method": {"enum": ["newton", "gradient"]},
        "max_iter": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "x0": _POINT,
        "R": _POS,
        "deltas": {"type": "array", "items": _S, "minItems": 1},
        "samples": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_samples": {"type": "integer", "minimum": 1},
                "R_range": {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2},
                "r_ratio": {"type": "array", "items": _S, "minItems": 2, "maxItems": 2},
                "snap": _POS,
            },
        },
        "inequalities": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "p": {"type": "number", "minimum": 1},
                "R_ball": _POS,
                "h_level": {"type": "number"},
                "k_level": {"type": "number"},
                "gamma": _S,
                "gamma0": _S,
                "C0": _POS,
                "sigma_t": _S,
                "p_t": {"type": "number", "minimum": 1},
            },
        },
        "t_grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"lo": _POS, "hi": _POS, "n": {"type": "integer", "minimum": 2}},
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "parameter": {"enum": SWEEP_PARAMS},
                "values": {"type": "array", "items": {"type": "number"}},
            },
        },
    },
    "allOf": [
        {
            "if": {"properties": {"task": {"enum": TASKS[1:]}}},
            "then": {"required": ["s", "grid", "exterior"]},
        }
    ],
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["task", "status", "version", "config", "results"],
    "properties": {
        "task": {"enum": TASKS + ["sweep"]},
        "status": {"enum": ["ok", "error"]},
        "error": {"type": ["string", "null"]},
        "version": {"type": "string"},
        "config": {"type": "object"},
        "results": {"type": "object"},
    },
}


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"config invalid at {where}: {exc.message}") from None
    for s in _s_list(cfg):
        if s <= cfg.get("s_min", 0.0):
            raise ConfigurationError(f"s = {s} is not above s_min = {cfg['s_min']}")


def _s_list(cfg):
    s = cfg.get("s")
    if s is None:
        return []
    return [float(v) for v in (s if isinstance(s, list) else [s])]


def _growth(cfg):
    try:
        return normalize(growth_from_dict(cfg["growth"]))
    except (TypeError, KeyError, DomainError) as exc:
        raise ConfigurationError(f"bad growth parameters: {exc}") from None


def _setup(cfg):
    g = cfg["grid"]
    dom = build_grid(g["dim"], g["h"], g["omega_radius"], g["R_infinity"], g.get("center"))
    expr = compile_expression(cfg["exterior"], dom.dim)
    vals = np.where(dom.is_interior, 0.0, expr(dom.coords))
    if not np.all(np.isfinite(vals)):
        raise ConfigurationError(f"exterior expression {cfg['exterior']!r} is not finite on the grid")
    ext = GridFunction(dom, vals)
    kernel = kernel_from_spec(cfg.get("kernel", "one"))
    x0 = np.asarray(cfg.get("x0", dom.center), dtype=float)
    if x0.size != dom.dim:
        raise ConfigurationError("x0 must have dim coordinates")
    return dom, ext, kernel, x0


def _solve(cfg, gf, dom, ext, kernel, s):
    return minimize(gf, kernel, dom, ext, tol=cfg.get("tol", 1e-8), s=s,
                    method=cfg.get("method", "newton"),
                    max_iter=cfg.get("max_iter", 50_000))


def _sample_spec(cfg, dom):
    smp = cfg.get("samples", {})
    rho = dom.omega_radius
    return SampleSpec(
        n_samples=smp.get("n_samples", 50),
        seed=cfg.get("seed", 0),
        R_range=tuple(smp.get("R_range", (0.2 * rho, 0.5 * rho))),
        r_ratio=tuple(smp.get("r_ratio", (0.3, 0.8))),
        snap=smp.get("snap"),
    )


# ---------------------------------------------------------------------------
# tasks: each fills ``res`` (the partial report) and ``files``
# ---------------------------------------------------------------------------

def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _task_growth_check(cfg, res, files):
    gf = _growth(cfg)
    tg = cfg.get("t_grid", {})
    grid = log_grid(tg.get("lo", 1e-4), tg.get("hi", 1e4), tg.get("n", 200))
    res["growth"] = gf.to_dict()
    p_est, q_est = check_growth_bounds(gf, grid)
    res["p_est"], res["q_est"] = p_est, q_est
    checks = {k: v for k, v in lemma_suite(gf, grid).items() if isinstance(v, bool)}
    res["checks"] = checks
    res["all_pass"] = all(checks.values())
    res["summary"] = {"p_est": p_est, "q_est": q_est, "all_pass": res["all_pass"]}


def _minimize_run(cfg, gf, dom, ext, kernel, x0, s, run):
    u, rep = _solve(cfg, gf, dom, ext, kernel, s)
    run["solve"] = rep.to_dict()
    st = cfg.get("structure", {})
    hs = euler_lagrange(gf, kernel, st.get("factor", 1.0))
    run["residual_norm"] = residual_norm(hs, u, s)
    run["energy"] = energy_If(gf, kernel, u, s)
    run["modular"] = modular(ModularKind.Vsf(s), gf, u)
    run["norm"] = luxemburg_norm(ModularKind.Vsf(s), gf, u)
    R = cfg.get("R", dom.omega_radius / 4.0)
    tb = tail_fprime_bounds(gf, u, x0, R, s)
    run["tail"], run["tail_upper_bound"] = tb["tail"], tb["tail_upper_bound"]
    return u


def _task_minimize(cfg, res, files):
    gf = _growth(cfg)
    dom, ext, kernel, x0 = _setup(cfg)
    res["runs"] = []
    for s in _s_list(cfg):
        run = {"s": s}
        res["runs"].append(run)
        u = _minimize_run(cfg, gf, dom, ext, kernel, x0, s, run)
        files[f"solution_s{s:g}.csv"] = u.to_csv()
    last = res["runs"][-1]
    res["summary"] = {"final_energy": last["solve"]["final_energy"],
                      "gradient_norm": last["solve"]["gradient_norm"],
                      "iterations": last["solve"]["iterations"],
                      "residual_norm": last["residual_norm"]}


def _task_dg(cfg, res, files):
    gf = _growth(cfg)
    dom, ext, kernel, x0 = _setup(cfg)
    res["runs"] = []
    all_reports = []
    for s in _s_list(cfg):
        run = {"s": s}
        res["runs"].append(run)
        u, rep = _solve(cfg, gf, dom, ext, kernel, s)
        run["solve"] = rep.to_dict()
        dg = dg_membership(gf, u, s, _sample_spec(cfg, dom))
        run["c_empirical"] = dg["c_empirical"]
        run["worst_sample"] = dg["worst_sample"].to_dict()
        run["samples"] = [r.to_dict() for r in dg["reports"]]
        run["generator"], run["sample_based"] = dg["generator"], True
        all_reports.extend(dg["reports"])
        files[f"dg_samples_s{s:g}.csv"] = reports_to_csv(dg["reports"])
    res["summary"] = {"c_empirical": max(r["c_empirical"] for r in res["runs"])}


def _task_holder(cfg, res, files):
    gf = _growth(cfg)
    dom, ext, kernel, x0 = _setup(cfg)
    R = cfg.get("R", dom.omega_radius / 8.0)
    res["runs"] = []
    rows, osc_rows = [], []
    for s in _s_list(cfg):
        run = {"s": s}
        res["runs"].append(run)
        u, rep = _solve(cfg, gf, dom, ext, kernel, s)
        run["solve"] = rep.to_dict()
        dg = dg_membership(gf, u, s, _sample_spec(cfg, dom))
        run["c_empirical"] = dg["c_empirical"]
        hb = verify_holder_bound(gf, u, s, x0, R)
        run["holder"] = hb
        rows.append([s, hb["alpha_hat"], hb["C_fit"], hb["lhs"], hb["tail"], hb["supnorm"]])
        osc_rows.extend([s, r, o] for r, o in hb["osc_decay"])
    files["holder.csv"] = _csv(["s", "alpha_hat", "C_fit", "lhs", "tail", "supnorm"], rows)
    files["osc_decay.csv"] = _csv(["s", "radius", "oscillation"], osc_rows)
    last = res["runs"][-1]["holder"]
    res["summary"] = {"alpha_hat": last["alpha_hat"], "C_fit": last["C_fit"],
                      "lhs": last["lhs"], "tail": last["tail"], "supnorm": last["supnorm"]}


def _task_bound(cfg, res, files):
    gf = _growth(cfg)
    dom, ext, kernel, x0 = _setup(cfg)
    R = cfg.get("R", dom.omega_radius / 2.0)
    deltas = cfg.get("deltas", [0.5, 0.25, 0.125, 0.0625])
    res["runs"] = []
    rows = []
    for s in _s_list(cfg):
        run = {"s": s}
        res["runs"].append(run)
        u, rep = _solve(cfg, gf, dom, ext, kernel, s)
        run["solve"] = rep.to_dict()
        lb = verify_local_bound(gf, u, s, x0, R, deltas)
        run["bound"] = lb
        rows.extend([s, r["delta"], r["lhs"], r["rhs"], r["C_delta"]] for r in lb["rows"])
    files["bound.csv"] = _csv(["s", "delta", "lhs", "rhs", "C_delta"], rows)
    last = res["runs"][-1]["bound"]
    res["summary"] = {"C_fit": last["C_fit"], "p_star": last["p_star"]}


def _task_inequalities(cfg, res, files):
    gf = _growth(cfg)
    dom, ext, kernel, x0 = _setup(cfg)
    iq = cfg.get("inequalities", {})
    p = iq.get("p", gf.p_lower)
    R_ball = iq.get("R_ball", dom.omega_radius / 2.0)
    res["runs"] = []
    for s in _s_list(cfg):
        run = {"s": s}
        res["runs"].append(run)
        u, rep = _solve(cfg, gf, dom, ext, kernel, s)
        run["solve"] = rep.to_dict()
        try:
            run["sobolev"] = sobolev_embedding_check(u, s, p, R_ball, x0)
        except ConfigurationError as exc:
            run["sobolev"] = {"unsupported": str(exc)}
        vals = u.values[dom.ball(x0, R_ball)]
        lo, hi = float(vals.min()), float(vals.max())
        run["isoperimetric"] = isoperimetric_check(
            u, s, p, R_ball,
            iq.get("h_level", lo + 0.25 * (hi - lo)), iq.get("k_level", lo + 0.75 * (hi - lo)),
            iq.get("gamma", 0.1), iq.get("gamma0", 0.1), iq.get("C0", 1e3), x0)
        ball = dom.ball(x0, R_ball)
        run["interpolation"] = interpolation_check(
            u, s, p, iq.get("sigma_t", s / 2.0), iq.get("p_t", 1.0 + (p - 1.0) / 2.0),
            ball, dom.interior)
    last = res["runs"][-1]
    res["summary"] = {"sobolev_ratio": last["sobolev"].get("ratio"),
                      "isoperimetric_C": last["isoperimetric"]["holds_with_C"],
                      "interpolation_holds": last["interpolation"]["holds"]}


_TASK_FUNCS = {
    "growth-check": _task_growth_check,
    "minimize": _task_minimize,
    "dg-check": _task_dg,
    "holder": _task_holder,
    "bound": _task_bound,
    "inequalities": _task_inequalities,
}


# ---------------------------------------------------------------------------
# running and writing
# ---------------------------------------------------------------------------

def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def execute(cfg: dict):
    """Run one validated config; returns (exit code, report dict, files)."""
    res, files = {}, {}
    status, error, code = "ok", None, EXIT_OK
    try:
        _TASK_FUNCS[cfg["task"]](cfg, res, files)
    except NumericError as exc:
        status, error, code = "error", str(exc), EXIT_NUMERIC
        diag = {k: v for k, v in exc.diagnostics.items() if k not in ("u", "report")}
        if "report" in exc.diagnostics:
            diag["solve"] = exc.diagnostics["report"].to_dict()
        res["diagnostics"] = diag
    except ConfigurationError as exc:
        status, error, code = "error", str(exc), EXIT_CONFIG
    except OrliczLabError as exc:
        status, error, code = "error", f"{type(exc).__name__}: {exc}", EXIT_NUMERIC
    report = {"task": cfg["task"], "status": status, "error": error,
              "version": __version__, "config": cfg, "results": res}
    return code, report, files


def _write(out_dir, report, files):
    os.makedirs(out_dir, exist_ok=True)
    for name, text in sorted(files.items()):
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            fh.write(text)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        fh.write(dumps(report))


def run(config: dict, out_dir: str | None = None) -> int:
    """Validate and execute a config, writing report files to ``out_dir``."""
    cfg = copy.deepcopy(config)
    try:
        validate_config(cfg)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code, report, files = execute(cfg)
    if code == EXIT_CONFIG:
        print(f"error: {report['error']}", file=sys.stderr)
        return code
    if out_dir is not None:
        _write(out_dir, report, files)
    if code != EXIT_OK:
        print(f"error: {report['error']}", file=sys.stderr)
    return code


def _apply_param(cfg: dict, name: str, value: float) -> dict:
    cfg = copy.deepcopy(cfg)
    cfg.pop("sweep", None)
    if name == "s":
        cfg["s"] = value
    elif name == "delta":
        cfg["deltas"] = [value]
    elif name == "h":
        cfg.setdefault("grid", {})["h"] = value
    else:
        params = cfg["growth"].setdefault("params", {})
        family = cfg["growth"]["family"]
        if family == "power":
            params["p"] = value
        elif family in ("sum", "powerlog") and (name == "p" or family == "sum"):
            params[name] = value
        else:
            raise ConfigurationError(f"cannot sweep {name} for growth family {family}")
    return cfg


def _sweep_row(args):
    cfg, name, value = args
    row = {"parameter": name, "value": value}
    try:
        sub = _apply_param(cfg, name, value)
        validate_config(sub)
        code, report, _ = execute(sub)
    except ConfigurationError as exc:
        row.update(status="error", error=str(exc))
        return row
    row["status"] = report["status"]
    row["error"] = report["error"] or ""
    row.update(report["results"].get("summary", {}))
    return row


def sweep(config: dict, parameter: str, values, out_dir: str | None = None, jobs: int = 1):
    """Run the base task once per value; returns (exit code, merged rows)."""
    if parameter not in SWEEP_PARAMS:
        print(f"error: sweep parameter must be one of {SWEEP_PARAMS}", file=sys.stderr)
        return EXIT_CONFIG, []
    values = [float(v) for v in values]
    if not values:
        print("error: sweep needs at least one value", file=sys.stderr)
        return EXIT_CONFIG, []
    cfg = copy.deepcopy(config)
    cfg.pop("sweep", None)
    try:
        validate_config(cfg)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG, []
    tasks = [(cfg, parameter, v) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_row, tasks))
    else:
        rows = [_sweep_row(t) for t in tasks]
    metric_keys = sorted({k for r in rows for k in r} - {"parameter", "value", "status", "error"})
    header = ["parameter", "value", "status", "error"] + metric_keys
    csv_rows = [[r.get(k, "") for k in header] for r in rows]
    if out_dir is not None:
        report = {"task": "sweep", "status": "ok", "error": None, "version": __version__,
                  "config": cfg, "results": {"parameter": parameter, "values": values,
                                             "base_task": cfg["task"], "rows": rows}}
        _write(out_dir, report, {"sweep.csv": _csv(header, csv_rows)})
    return EXIT_OK, rows


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="orliczlab", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in TASKS + ["sweep"]:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", default=None, help="output directory for reports")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes (sweep)")
        if name == "sweep":
            sp.add_argument("--param", default=None, choices=SWEEP_PARAMS)
            sp.add_argument("--values", default=None, help="comma separated values")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not isinstance(cfg, dict):
        print("error: config must be a JSON object", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.command == "sweep":
        sw = cfg.get("sweep", {})
        param = args.param or sw.get("parameter")
        if args.values is not None:
            try:
                values = [float(v) for v in args.values.split(",") if v.strip()]
            except ValueError:
                print("error: --values must be numbers", file=sys.stderr)
                return EXIT_CONFIG
        else:
            values = sw.get("values", [])
        if param is None:
            print("error: sweep needs --param or sweep.parameter", file=sys.stderr)
            return EXIT_CONFIG
        code, _ = sweep(cfg, param, values, args.out, max(1, args.jobs))
        return code
    cfg["task"] = args.command
    return run(cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
