"""Command-line interface.

    fxts simulate --system NAME[:k=v,...] [--scale SPEC] --x0 1,2 [--out traj.csv]
    fxts verify   --system ... [--scale ...] --condition {i,ii,phi1,phi2} ...
    fxts bound    (--formula NAME --a .. | --phi SPEC --v0 VALUE)
    fxts sweep    --system ... [--scale ...] --radii 1,1e2,... [--out sweep.csv]
    fxts compare  --system ... [--radii ...] [--out compare.csv]

Every command prints (or writes with --report) a JSON document with the keys
tool_version, command_echo, params, results and warnings. With --figures,
PNG figures and long-format plot data are written next to the CSV output.
Exit status: 0 ok, 2 usage, 3 numeric failure, 4 I/O.
"""

import argparse
import json
import math
import os
import shlex
import sys
from dataclasses import dataclass

import numpy as np

from .errors import FxtsError, InputError, NumericError, ParameterError
from .field_core import parse_system_spec
from .lyapunov_verify import (SamplingPlan, verify_condition_i, verify_condition_ii,
                              verify_phi_decrease, verify_second_order)
from .reports import (ArtifactWriter, CompareReport, classify_profile, json_text,
                      profile_long_csv, report_document, sweep_csv, trajectory_csv,
                      trajectory_long_csv)
from .scaling import PiecewiseScaleParams, ScaleExponentsEq5, apply_scale, parse_scale_spec
from .settling_bounds import (PiecewisePhi, PolyakovPhi, closed_form_bound, parse_phi_spec,
                              phi_admissible, settling_integral)
from .sim_engine import SimConfig, integrate, stays_in_sublevel, sweep, v_monotone

MODULE = "cli_harness"


# argument types -----------------------------------------------------------------

def float_value(text):
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def float_list(text):
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def vector_list(text):
    return tuple(float_list(part) for part in text.split(";") if part.strip())


def domain_value(text):
    kind, _, rest = text.partition(":")
    vals = float_list(rest)
    if kind not in ("ball", "annulus"):
        raise argparse.ArgumentTypeError("domain is ball:R or annulus:RMIN,RMAX")
    return (kind, *vals)


def _show(value):
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ";".join(_show(v) for v in value)
        if value and isinstance(value[0], str):
            return value[0] + ":" + ",".join(_show(v) for v in value[1:])
        return ",".join(_show(v) for v in value)
    if isinstance(value, float):
        return "inf" if value == math.inf else repr(value)
    return str(value)


# parser -------------------------------------------------------------------------

def _system_parent(with_scale=True):
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("system")
    g.add_argument("--system", required=True,
                   help="catalog system, NAME[:key=value,...], e.g. quadratic_gradient:q=1,4")
    if with_scale:
        g.add_argument("--scale", default=None,
                       help="eq5:p=P,q=Q (0<P<1, Q<0) or eq6:alpha=A,beta=B (0<A<1, B<0)")
    return p


def _sim_parent():
    d = SimConfig()
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("integrator")
    g.add_argument("--method", choices=("rk45", "rk4"), default=d.method)
    g.add_argument("--dt", type=float_value, default=d.dt, help="rk4 step")
    g.add_argument("--rtol", type=float_value, default=d.rel_tol)
    g.add_argument("--atol", type=float_value, default=d.abs_tol)
    g.add_argument("--dt-min", type=float_value, default=d.dt_min)
    g.add_argument("--dt-max", type=float_value, default=d.dt_max)
    g.add_argument("--t-max", type=float_value, default=d.t_max)
    g.add_argument("--eps", type=float_value, default=d.eps, help="settling ball radius")
    g.add_argument("--dwell", type=float_value, default=None,
                   help="time to stay inside the ball (default 10 x smallest step)")
    g.add_argument("--stride", type=int, default=d.record_stride, help="record every N steps")
    return p


def _out_parent():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("output")
    g.add_argument("--out", default=None, help="CSV artifact path")
    g.add_argument("--report", default=None, help="JSON report path (default: stdout)")
    g.add_argument("--figures", action="store_true",
                   help="render PNG figures and long-format plot CSV next to --out")
    g.add_argument("--seed", type=int, default=0)
    return p


def build_parser():
    parser = argparse.ArgumentParser(prog="fxts", description=__doc__.split("\n\n")[0],
                                     formatter_class=argparse.RawDescriptionHelpFormatter,
                                     epilog="Exit status: 0 ok, 2 usage, 3 numeric failure, 4 I/O. "
                                            "FXTS_THREADS caps parallelism.")
    sub = parser.add_subparsers(dest="command", required=True)
    sysp, sysp_noscale, simp, outp = _system_parent(), _system_parent(False), _sim_parent(), _out_parent()

    p = sub.add_parser("simulate", parents=[sysp, simp, outp], help="integrate one trajectory")
    p.add_argument("--x0", type=float_list, required=True, help="initial state, comma separated")
    p.add_argument("--v", choices=("norm_sq", "potential"), default="norm_sq",
                   help="Lyapunov-like function recorded along the path")

    p = sub.add_parser("verify", parents=[sysp, outp], help="sampled condition checks")
    p.add_argument("--condition", choices=("i", "ii", "phi1", "phi2"), required=True)
    p.add_argument("--convention", choices=("theorem4", "theorem5"), default="theorem4")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--grid-radii", type=int, default=16)
    p.add_argument("--domain", type=domain_value, default=("annulus", 1e-3, 1e3),
                   help="ball:R or annulus:RMIN,RMAX")
    p.add_argument("--threshold", type=float_value, default=1e-6)
    p.add_argument("--zero-tol", type=float_value, default=1e-8)
    p.add_argument("--phi", default=None, help="comparison function (default: from the scaling)")
    p.add_argument("--lambda0", type=float_value, default=None)
    p.add_argument("--v", choices=("norm_sq", "potential"), default=None)
    p.add_argument("--delta", type=float_value, default=1e-6, help="flow step for phi2")
    p.add_argument("--tol", type=float_value, default=None)

    p = sub.add_parser("bound", parents=[outp], help="settling-time bounds")
    p.add_argument("--formula", choices=("lemma3", "theorem1", "theorem4", "theorem5"), default=None)
    p.add_argument("--phi", default=None, help="power:a=..,p=.. | polyakov:.. | theorem5:.. | table:..")
    p.add_argument("--v0", type=float_value, default=None)
    for name in ("a", "b", "p", "q", "c", "alpha", "beta", "lambda0"):
        p.add_argument(f"--{name}", type=float_value, default=None)

    p = sub.add_parser("sweep", parents=[sysp, simp, outp], help="settling time over initial radii")
    p.add_argument("--radii", type=float_list, required=True)
    p.add_argument("--directions", type=vector_list, default=None, help="v1;v2;... (default e1)")
    p.add_argument("--n-directions", type=int, default=None, help="seeded random unit directions")
    p.add_argument("--lambda0", type=float_value, default=None)

    p = sub.add_parser("compare", parents=[sysp_noscale, simp, outp],
                       help="unscaled vs eq5 vs eq6 settling profiles")
    p.add_argument("--radii", type=float_list, default=(1.0, 10.0, 100.0, 1e3, 1e4))
    p.add_argument("--directions", type=vector_list, default=None)
    p.add_argument("--n-directions", type=int, default=None)
    p.add_argument("--eq5", default="eq5:p=0.5,q=-2")
    p.add_argument("--eq6", default="eq6:alpha=0.5,beta=-2")
    p.add_argument("--lambda0", type=float_value, default=None)
    return parser


def _subparser(parser, command):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


@dataclass(frozen=True)
class RunConfig:
    command: str
    options: tuple

    @property
    def opts(self):
        return dict(self.options)

    @classmethod
    def from_namespace(cls, ns):
        d = dict(vars(ns))
        command = d.pop("command")
        return cls(command, tuple(sorted(d.items())))

    @classmethod
    def parse(cls, argv):
        if isinstance(argv, str):
            argv = shlex.split(argv)
            if argv and argv[0] == "fxts":
                argv = argv[1:]
        return cls.from_namespace(build_parser().parse_args(argv))

    def argv(self):
        sp = _subparser(build_parser(), self.command)
        opts = self.opts
        out = [self.command]
        for action in sp._actions:
            if not action.option_strings or action.dest == "help":
                continue
            val = opts.get(action.dest, action.default)
            if val == action.default and not action.required:
                continue
            flag = action.option_strings[0]
            if isinstance(action, argparse._StoreTrueAction):
                out.append(flag)
            else:
                out.extend([flag, _show(val)])
        return out

    def echo(self):
        return "fxts " + shlex.join(self.argv())


# commands -------------------------------------------------------------------------

def sim_config(o):
    return SimConfig(method=o["method"], dt=o["dt"], rel_tol=o["rtol"], abs_tol=o["atol"],
                     dt_min=o["dt_min"], dt_max=o["dt_max"], t_max=o["t_max"], eps=o["eps"],
                     settle_dwell=o["dwell"], record_stride=o["stride"])


def _resolve(o, scale_text=None):
    entry = parse_system_spec(o["system"])
    text = scale_text if scale_text is not None else o.get("scale")
    scale = parse_scale_spec(text) if text else None
    system = apply_scale(entry.field, scale)
    return entry, scale, system


def _lambda0(o, entry, convention):
    if o.get("lambda0") is not None:
        return o["lambda0"]
    return entry.known_constants.get("lambda0", {}).get(convention)


def _auto_bound(entry, scale, o):
    if isinstance(scale, ScaleExponentsEq5):
        lam = _lambda0(o, entry, "theorem4")
        if lam and lam > 0:
            return closed_form_bound("theorem4", lambda0=lam, p=scale.p, q=scale.q)
    elif isinstance(scale, PiecewiseScaleParams) and entry.field.gradient_field:
        lam = _lambda0(o, entry, "theorem5")
        if lam and lam > 0:
            return closed_form_bound("theorem5", lambda0=lam, params=scale)
    return None


def _system_params(entry, scale):
    return {"system": entry.spec, "scale": None if scale is None else scale.as_dict()}


def _stem(o):
    path = o.get("out") or o.get("report")
    if not path:
        raise InputError("--figures needs --out or --report to place the files", module=MODULE)
    return os.path.splitext(path)[0]


def cmd_simulate(o, writer):
    entry, scale, system = _resolve(o)
    x0 = np.asarray(o["x0"], dtype=float)
    selector = o["v"]
    if selector == "potential" and not entry.field.gradient_field:
        raise ParameterError("--v potential needs a gradient-field system", module=MODULE)
    traj = integrate(system, x0, sim_config(o), v_selector=selector)
    mono_ok, worst = v_monotone(traj)
    results = {"termination": traj.termination, "t_settle": traj.t_settle,
               "steps": traj.steps, "rejected_steps": traj.rejected,
               "final_state": traj.final_state, "samples": len(traj.times),
               "v_selector": selector, "v_non_increasing": mono_ok, "v_worst_increase": worst,
               "stays_in_initial_sublevel": stays_in_sublevel(traj)}
    if o["out"]:
        writer.add_text(o["out"], trajectory_csv(traj, entry.field))
    if o["figures"]:
        stem = _stem(o)
        writer.add_text(stem + "_plot.csv", trajectory_long_csv(traj))
        from .plotting import trajectory_figure
        writer.add_figure(stem + ".png", lambda p: trajectory_figure(traj, p, entry.spec))
    params = {**_system_params(entry, scale), "x0": x0, "sim": sim_config(o).as_dict()}
    return params, results, []


def _default_phi(entry, scale, o):
    if isinstance(scale, ScaleExponentsEq5):
        lam = _lambda0(o, entry, "theorem4")
        if lam and lam > 0:
            return PolyakovPhi(lam, lam, (2 - scale.p) / 2, (2 - scale.q) / 2), "norm_sq"
    if isinstance(scale, PiecewiseScaleParams):
        lam = _lambda0(o, entry, "theorem5")
        if lam and lam > 0:
            return PiecewisePhi(scale, lam), "potential"
    raise ParameterError("no default comparison function for this system; pass --phi",
                         module=MODULE)


def cmd_verify(o, writer):
    entry, scale, system = _resolve(o)
    plan = SamplingPlan(o["domain"], o["samples"], o["seed"], o["grid_radii"])
    cond = o["condition"]
    warnings = []
    params = {**_system_params(entry, scale), "plan": plan.as_dict(), "condition": cond}
    if cond in ("i", "ii"):
        if scale is not None:
            warnings.append("conditions (i)/(ii) are checked on the base field; --scale is echoed only")
        if cond == "i":
            rep = verify_condition_i(entry.field, plan, o["convention"], o["threshold"])
        else:
            rep = verify_condition_ii(entry.field, plan, o["convention"], o["threshold"], o["zero_tol"])
        warnings += rep.warnings
        params["convention"] = o["convention"]
        results = {"condition": cond, "lambda0_estimate": rep.lambda0_estimate,
                   "worst_point": rep.worst_point, "margins": rep.as_dict()["margins"],
                   "verdict": rep.verdict, "params_echo": params, "detail": rep}
        return params, results, warnings
    if o["phi"]:
        phi = parse_phi_spec(o["phi"])
        selector = o["v"] or ("potential" if isinstance(scale, PiecewiseScaleParams) else "norm_sq")
    else:
        phi, selector = _default_phi(entry, scale, o)
        selector = o["v"] or selector
    params.update({"phi": phi.spec, "v_selector": selector})
    if cond == "phi1":
        tol = 1e-9 if o["tol"] is None else o["tol"]
        rep = verify_phi_decrease(system, selector, phi, plan, tol)
    else:
        tol = 1e-3 if o["tol"] is None else o["tol"]
        rep = verify_second_order(system, selector, phi, plan, o["delta"], tol)
        params["delta"] = o["delta"]
    params["tol"] = tol
    lam = getattr(phi, "lambda0", None)
    results = {"condition": cond, "lambda0_estimate": lam, "worst_point": rep.worst_point,
               "margins": {"worst": rep.worst_margin}, "verdict": "holds" if rep.holds else "fails",
               "params_echo": params, "detail": rep}
    return params, results, warnings + rep.warnings


def cmd_bound(o, writer):
    if o["formula"]:
        need = {"lemma3": ("c", "alpha", "v0"), "theorem1": ("a", "b", "p", "q"),
                "theorem4": ("lambda0", "p", "q"), "theorem5": ("lambda0", "alpha", "beta")}[o["formula"]]
        missing = [k for k in need if o[k] is None]
        if missing:
            raise ParameterError(f"--formula {o['formula']} needs " + ", ".join("--" + k for k in missing),
                                 module=MODULE)
        b = closed_form_bound(o["formula"], **{k: o[k] for k in need})
        params = {"formula": o["formula"], **b.inputs}
        extra = {}
    elif o["phi"]:
        if o["v0"] is None:
            raise ParameterError("--phi needs --v0", module=MODULE)
        phi = parse_phi_spec(o["phi"])
        adm = phi_admissible(phi)
        if adm.classification == "not_admissible":
            raise ParameterError("phi is not admissible", module="settling_bounds",
                                 witness=adm.witness)
        b = settling_integral(phi, o["v0"])
        params = {"phi": phi.spec, "v0": o["v0"]}
        extra = {"admissibility": adm.classification}
    else:
        raise ParameterError("bound needs --formula or --phi", module=MODULE)
    results = {"value": b.value, "kind": b.kind, "formula_id": b.formula_id,
               "achieved_tolerance": b.achieved_tolerance, **extra}
    if o["out"]:
        writer.add_text(o["out"], "value,kind,formula_id\n%s,%s,%s\n" % (
            "inf" if math.isinf(b.value) else "%.17g" % b.value, b.kind, b.formula_id))
    return params, results, []


def _directions(o, dim):
    if o["directions"] is not None:
        return [np.asarray(d) for d in o["directions"]]
    if o["n_directions"]:
        rng = np.random.default_rng(o["seed"])
        d = rng.standard_normal((o["n_directions"], dim))
        return list(d / np.linalg.norm(d, axis=1, keepdims=True))
    e = np.zeros(dim)
    e[0] = 1.0
    return [e]


def cmd_sweep(o, writer):
    entry, scale, system = _resolve(o)
    dirs = _directions(o, entry.field.dimension)
    bound = _auto_bound(entry, scale, o)
    prof = sweep(system, o["radii"], dirs, sim_config(o), bound=bound)
    label, stats = classify_profile(prof)
    results = {"rows": [dict(zip(("radius", "direction_index", "t_settle", "bound", "margin"), r))
                        for r in prof.rows()],
               "saturation": prof.saturation, "terminations": prof.terminations,
               "bound": bound, "classification": label, "stats": stats}
    if o["out"]:
        writer.add_text(o["out"], sweep_csv(prof))
    if o["figures"]:
        stem = _stem(o)
        name = entry.spec if scale is None else scale.spec
        writer.add_text(stem + "_plot.csv", profile_long_csv({name: prof}))
        from .plotting import profile_figure
        writer.add_figure(stem + ".png", lambda p: profile_figure({name: prof}, p, entry.spec))
    params = {**_system_params(entry, scale), "radii": o["radii"], "directions": dirs,
              "sim": sim_config(o).as_dict()}
    return params, results, []


def cmd_compare(o, writer):
    entry = parse_system_spec(o["system"])
    dirs = _directions(o, entry.field.dimension)
    cfg = sim_config(o)
    variants = {"unscaled": None, "eq5": parse_scale_spec(o["eq5"]), "eq6": parse_scale_spec(o["eq6"])}
    warnings = []
    if not entry.field.gradient_field:
        warnings.append("eq6 bound needs a gradient field; eq6 profile is reported without a bound")
    profiles, bounds, labels, stats = {}, {}, {}, {}
    for name, scale in variants.items():
        system = apply_scale(entry.field, scale)
        bound = _auto_bound(entry, scale, o)
        prof = sweep(system, o["radii"], dirs, cfg, bound=bound)
        shrinking = None
        if not np.all(np.isfinite(prof.times)):
            shrinking = all(t in ("t_max_reached", "settled") for t in prof.terminations)
        profiles[name] = prof
        bounds[name] = bound
        labels[name], stats[name] = classify_profile(prof, shrinking)
    rep = CompareReport(entry.spec, profiles, bounds, labels, stats)
    if o["out"]:
        text = "".join(sweep_csv(p, name) if i == 0 else sweep_csv(p, name).split("\n", 1)[1]
                       for i, (name, p) in enumerate(profiles.items()))
        writer.add_text(o["out"], text)
    if o["figures"]:
        stem = _stem(o)
        writer.add_text(stem + "_plot.csv", profile_long_csv(profiles))
        from .plotting import profile_figure
        writer.add_figure(stem + ".png", lambda p: profile_figure(profiles, p, entry.spec))
    params = {"system": entry.spec, "variants": {k: (None if v is None else v.as_dict())
                                                 for k, v in variants.items()},
              "radii": o["radii"], "directions": dirs, "sim": cfg.as_dict()}
    return params, rep, warnings


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "bound": cmd_bound,
            "sweep": cmd_sweep, "compare": cmd_compare}


def run_command(argv):
    """Parse, execute and write artifacts. Returns the process exit status."""
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    config = RunConfig.from_namespace(ns)
    o = config.opts
    writer = ArtifactWriter()
    try:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            params, results, warnings = COMMANDS[config.command](o, writer)
        doc = report_document(config.echo(), params, results, warnings)
        text = json_text(doc)
        if o["report"]:
            writer.add_text(o["report"], text)
        writer.commit()
        if not o["report"]:
            sys.stdout.write(text)
        return 0
    except FxtsError as exc:
        _error(exc.to_dict())
        return exc.exit_status
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        _error(NumericError(str(exc), module=MODULE).to_dict())
        return 3


def _error(payload):
    sys.stderr.write(json.dumps({"error": payload}, sort_keys=True, default=str) + "\n")


def main(argv=None):
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
