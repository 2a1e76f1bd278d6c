"""Configuration-driven command line front end.

Subcommands map one-to-one onto the main computations:

    index     minimize the pairwise Chernoff index over parameter boxes
    contour   pairwise index on an explicit grid, written as CSV
    nonsep    the inf-sup-inf tilt program and its rate
    glm       fixed-design GLM rate or the joint Gaussian closed form
    simulate  importance-sampled error decay curve with its LS fit

Each command reads a JSON config (schema-checked, unknown keys
rejected), writes JSON to stdout or ``--out``, and exits 0 on success,
2 on configuration errors, 3 on numeric errors, 4 on nonconvergence.
Outputs carry the config hash and package version for provenance.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from . import __version__, chernoff, families, glm, nonsep, simulate
from .errors import (ConfigError, ConvergenceError, GlrtExpError,
                     NumericError)

_EXIT_CONFIG = 2
_EXIT_NUMERIC = 3
_EXIT_NONCONV = 4


def _fail(msg: str) -> ConfigError:
    return ConfigError(msg)


def _check_keys(doc: dict, allowed: set, required: set, where: str):
    unknown = set(doc) - allowed
    if unknown:
        raise _fail(f"unknown keys in {where}: {sorted(unknown)}")
    missing = required - set(doc)
    if missing:
        raise _fail(f"missing keys in {where}: {sorted(missing)}")


def _load_config(path: str) -> tuple:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as err:
        raise _fail(f"cannot read config {path}: {err}") from err
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as err:
        raise _fail(f"config {path} is not valid JSON: {err}") from err
    if not isinstance(doc, dict):
        raise _fail("config root must be a JSON object")
    return doc, hashlib.sha256(raw).hexdigest()


def _family(doc, key):
    if key not in doc:
        raise _fail(f"missing family {key!r}")
    try:
        return families.make_family(doc[key])
    except (TypeError, KeyError, GlrtExpError) as err:
        raise _fail(f"bad family spec for {key!r}: {err}") from err


def _box(doc, key, fam):
    spec = doc.get(key)
    if spec is None:
        return fam.space
    if isinstance(spec, dict) and "point" in spec:
        return families.ParamBox.point(spec["point"])
    _check_keys(spec, {"lower", "upper", "artificial"}, {"lower", "upper"},
                key)
    art = tuple(tuple(bool(b) for b in pair)
                for pair in spec.get("artificial", ()))
    try:
        return families.ParamBox(np.asarray(spec["lower"], float),
                                 np.asarray(spec["upper"], float),
                                 artificial=art)
    except GlrtExpError as err:
        raise _fail(f"bad box {key!r}: {err}") from err


def _axis(doc, key):
    spec = doc.get(key)
    if spec is None:
        raise _fail(f"missing axis {key!r}")
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    _check_keys(spec, {"min", "max", "count", "scale"},
                {"min", "max", "count"}, key)
    scale = spec.get("scale", "linear")
    if scale == "log":
        return np.exp(np.linspace(np.log(spec["min"]), np.log(spec["max"]),
                                  int(spec["count"])))
    if scale != "linear":
        raise _fail(f"axis scale must be 'linear' or 'log', got {scale!r}")
    return np.linspace(spec["min"], spec["max"], int(spec["count"]))


def _round_floats(obj, sig: int = 6):
    if isinstance(obj, float):
        return float(f"{obj:.{sig}g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v, sig) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v, sig) for v in obj]
    return obj


def _emit_json(payload: dict, args, cfg_hash: str):
    payload["_provenance"] = {"config_sha256": cfg_hash,
                              "version": __version__}
    if not args.raw:
        payload = _round_floats(payload)
    text = json.dumps(payload, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)


def _emit_text(text: str, args, cfg_hash: str):
    header = f"# glrtexp {__version__} config_sha256={cfg_hash}\n"
    body = header + text
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(body)
    else:
        print(body, end="")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_index(args):
    doc, cfg_hash = _load_config(args.config)
    _check_keys(doc, {"g_family", "h_family", "theta_box", "gamma_box",
                      "grid_points", "check_separation", "seed"},
                {"g_family", "h_family"}, "index config")
    gfam = _family(doc, "g_family")
    hfam = _family(doc, "h_family")
    tb = _box(doc, "theta_box", gfam)
    gb = _box(doc, "gamma_box", hfam)
    cfg = chernoff.IndexConfig(
        grid_points=int(doc.get("grid_points", 41)),
        check_separation=bool(doc.get("check_separation", True)),
    )
    res = chernoff.generalized_index(gfam, hfam, tb, gb, config=cfg)
    _emit_json(res.to_dict(), args, cfg_hash)


def cmd_contour(args):
    doc, cfg_hash = _load_config(args.config)
    _check_keys(doc, {"g_family", "h_family", "theta_axis", "gamma_axis",
                      "seed"},
                {"g_family", "h_family", "theta_axis", "gamma_axis"},
                "contour config")
    gfam = _family(doc, "g_family")
    hfam = _family(doc, "h_family")
    grid = chernoff.contour_grid(gfam, hfam, _axis(doc, "theta_axis"),
                                 _axis(doc, "gamma_axis"))
    _emit_text(grid.to_csv(), args, cfg_hash)


def cmd_nonsep(args):
    doc, cfg_hash = _load_config(args.config)
    _check_keys(doc, {"g_family", "h_family", "theta_box", "gamma_box",
                      "theta0", "b", "grid_points", "seed"},
                {"g_family", "h_family", "theta0"}, "nonsep config")
    gfam = _family(doc, "g_family")
    hfam = _family(doc, "h_family")
    tb = _box(doc, "theta_box", gfam)
    gb = _box(doc, "gamma_box", hfam)
    b = float(doc.get("b", 0.0))
    theta0 = np.asarray(doc["theta0"], dtype=float)
    rep = nonsep.feasibility_b(gfam, theta0, hfam, gb, b)
    if not rep.feasible:
        raise NumericError(
            f"threshold b={b} is infeasible: sup drift {rep.sup_drift:.6g}"
        )
    cfg = nonsep.NonsepConfig(grid_points=int(doc.get("grid_points", 17)))
    tilt = nonsep.solve_tilt(gfam, hfam, tb, gb, theta0=theta0, b=b,
                             config=cfg)
    payload = tilt.to_dict()
    payload["feasibility"] = {"sup_drift": rep.sup_drift,
                              "kl_inf": rep.kl_inf}
    _emit_json(payload, args, cfg_hash)


def cmd_glm(args):
    doc, cfg_hash = _load_config(args.config)
    mode = doc.get("mode")
    if mode == "joint":
        _check_keys(doc, {"mode", "sigma", "beta0", "b", "coef_bound",
                          "seed"},
                    {"mode", "sigma", "beta0"}, "glm config")
        tilt = glm.gaussian_joint_tilt(
            np.asarray(doc["sigma"], dtype=float),
            np.asarray(doc["beta0"], dtype=float),
            float(doc.get("b", 0.0)),
            coef_bound=float(doc.get("coef_bound", 10.0)),
        )
        payload = {"mode": "joint", "rho": tilt.rate, **tilt.to_dict()}
    elif mode == "fixed-design":
        _check_keys(doc, {"mode", "design_csv", "sidecar", "seed"},
                    {"mode", "design_csv", "sidecar"}, "glm config")
        design = glm.GlmDesign.from_csv(doc["design_csv"], doc["sidecar"])
        res = glm.glm_rate(design)
        payload = {
            "mode": "fixed-design",
            "rho": res.rho,
            "beta_dag": list(res.beta_dag),
            "gamma_dag": list(res.gamma_dag),
            "lambda_dag": res.lambda_dag,
            "checks": res.diagnostics["checks"],
        }
    else:
        raise _fail("glm config needs mode 'joint' or 'fixed-design'")
    _emit_json(payload, args, cfg_hash)


def cmd_simulate(args):
    doc, cfg_hash = _load_config(args.config)
    _check_keys(doc, {"g_family", "h_family", "theta_box", "gamma_box",
                      "side", "n_list", "b", "seed", "rel_err_target",
                      "max_reps", "saddle", "theta0", "grid_points"},
                {"g_family", "h_family", "n_list"}, "simulate config")
    gfam = _family(doc, "g_family")
    hfam = _family(doc, "h_family")
    tb = _box(doc, "theta_box", gfam)
    gb = _box(doc, "gamma_box", hfam)
    test = simulate.TestSpec(gfam, hfam, tb, gb)
    side = doc.get("side", "type-I")
    if side not in ("type-I", "type-II"):
        raise _fail("side must be 'type-I' or 'type-II'")
    b = float(doc.get("b", 0.0))
    seed = int(args.seed if args.seed is not None else doc.get("seed", 0))
    n_list = [int(n) for n in doc["n_list"]]

    if "theta0" in doc:
        base = np.asarray(doc["theta0"], dtype=float)
        tilt = nonsep.solve_tilt(gfam, hfam, tb, gb, theta0=base, b=b,
                                 config=nonsep.NonsepConfig(
                                     grid_points=int(doc.get("grid_points", 17))))
        if side == "type-II":
            raise _fail("type-II with an explicit theta0 is expressed by "
                        "swapping the families in the config")
    else:
        if "saddle" in doc:
            sd = doc["saddle"]
            _check_keys(sd, {"theta_star", "gamma_star"},
                        {"theta_star", "gamma_star"}, "saddle")
            pair = chernoff.pairwise_index(gfam, sd["theta_star"],
                                           hfam, sd["gamma_star"])
        else:
            res = chernoff.generalized_index(gfam, hfam, tb, gb)
            pair = res
        tilt = nonsep.tilt_from_pairwise(
            gfam, hfam, pair.theta_star, pair.gamma_star, pair.z_star,
            pair.rho, swap=(side == "type-II"))
    curve = simulate.decay_curve(
        test, tilt, n_list, seed=seed, side=side,
        rel_err_target=float(doc.get("rel_err_target", 0.1)),
        max_reps=int(doc.get("max_reps", 10_000_000)),
    )
    _emit_text(curve.to_csv(), args, cfg_hash)
    fit = {"fit": curve.fit_dict()}
    fit["_provenance"] = {"config_sha256": cfg_hash, "version": __version__}
    if not args.raw:
        fit = _round_floats(fit)
    text = json.dumps(fit, indent=2)
    if args.out:
        with open(args.out + ".fit.json", "w") as fh:
            fh.write(text + "\n")
    print(text)


# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="glrtexp",
        description="Error exponents for generalized likelihood ratio tests",
    )
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in (("index", cmd_index), ("contour", cmd_contour),
                     ("nonsep", cmd_nonsep), ("glm", cmd_glm),
                     ("simulate", cmd_simulate)):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=int, default=1,
                        help="worker hint; results are independent of it")
        sp.add_argument("--raw", action="store_true",
                        help="full-precision numbers instead of 6 digits")
        sp.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return _EXIT_CONFIG
    try:
        args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return _EXIT_CONFIG
    except ConvergenceError as err:
        print(f"nonconvergence: {err}", file=sys.stderr)
        return _EXIT_NONCONV
    except NumericError as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return _EXIT_NUMERIC
    except GlrtExpError as err:
        print(f"error: {err}", file=sys.stderr)
        return _EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
