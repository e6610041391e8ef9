"""Artifact writing and the cross-variant comparison report."""

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import __version__
from .errors import OutputError

MODULE = "cli_harness"


def jsonable(obj):
    """Plain JSON types; +-inf become the strings "inf"/"-inf", NaN becomes null."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if hasattr(obj, "as_dict"):
        return jsonable(obj.as_dict())
    return obj


def report_document(command_echo, params, results, warnings=()):
    warnings = list(warnings)
    if isinstance(results, list) and not results:
        warnings.append("no results")
    return jsonable({"tool_version": __version__, "command_echo": command_echo,
                     "params": params, "results": results, "warnings": warnings})


def json_text(doc):
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def fmt(x):
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def trajectory_csv(traj, base_field):
    from .field_core import evaluate

    n = traj.states.shape[1]
    header = ["t"] + [f"x{i + 1}" for i in range(n)]
    if traj.v_values is not None:
        header.append("V")
    header.append("normf")
    rows = []
    for k, (t, x) in enumerate(zip(traj.times, traj.states)):
        row = [t, *x]
        if traj.v_values is not None:
            row.append(traj.v_values[k])
        row.append(np.linalg.norm(evaluate(base_field, x)))
        rows.append(row)
    return csv_text(header, rows)


def trajectory_long_csv(traj):
    rows = []
    norms = np.linalg.norm(traj.states, axis=1)
    for t, v in zip(traj.times, norms):
        rows.append(["norm_x", t, v])
    if traj.v_values is not None:
        for t, v in zip(traj.times, traj.v_values):
            rows.append(["V", t, v])
    return csv_text(["series", "t", "value"], rows)


SWEEP_HEADER = ["radius", "direction_index", "t_settle", "bound", "margin"]


def sweep_csv(profile, variant=None):
    rows = profile.rows()
    if variant is None:
        return csv_text(SWEEP_HEADER, rows)
    return csv_text(["variant"] + SWEEP_HEADER, [[variant, *r] for r in rows])


def profile_long_csv(profiles):
    rows = []
    for label, prof in profiles.items():
        for r, j, t, b, _ in prof.rows():
            rows.append([label, "t_settle", r, j, t])
            if b is not None:
                rows.append([label, "bound", r, j, b])
    return csv_text(["variant", "series", "radius", "direction_index", "value"], rows)


class ArtifactWriter:
    """Collects outputs and commits them atomically.

    Text is staged in temporary files in the target directory and renamed
    into place; on any failure every file written so far is removed.
    """

    def __init__(self):
        self.pending = []

    def add_text(self, path, text):
        self.pending.append((path, text.encode()))

    def add_figure(self, path, render):
        self.pending.append((path, render))

    def commit(self):
        done = []
        try:
            for path, payload in self.pending:
                d = os.path.dirname(os.path.abspath(path)) or "."
                fd, tmp = tempfile.mkstemp(dir=d, prefix=".fxts-", suffix=".tmp")
                try:
                    with os.fdopen(fd, "wb") as fh:
                        if callable(payload):
                            fh.close()
                            payload(tmp)
                        else:
                            fh.write(payload)
                    os.replace(tmp, path)
                except BaseException:
                    if os.path.exists(tmp):
                        os.unlink(tmp)
                    raise
                done.append(path)
        except OSError as exc:
            for p in done:
                try:
                    os.unlink(p)
                except OSError:
                    pass
            raise OutputError(f"cannot write {path}: {exc.strerror or exc}",
                              module=MODULE) from None
        return done


# comparison ------------------------------------------------------------------

SATURATION_FRACTION = 0.01
MIN_DECADES = 4.0
LOG_FIT_R2 = 0.99


def log_fit_r2(radii, times):
    r = np.asarray(radii, dtype=float)
    t = np.asarray(times, dtype=float)
    ok = np.isfinite(t) & (r > 0)
    if ok.sum() < 3:
        return None, None
    x, y = np.log(r[ok]), t[ok]
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss = float(np.sum((y - y.mean()) ** 2))
    if ss == 0:
        return 1.0 if float(np.sum(resid ** 2)) == 0 else 0.0, float(slope)
    return 1.0 - float(np.sum(resid ** 2)) / ss, float(slope)


def classify_profile(profile, shrinking=None):
    """Label a settling profile as FxTS/FTS/AS evidence.

    Rules, in order:
      * FxTS-evidence: radii span at least four decades, every cell settled
        and T(r_max) - T(r_max/100) is below 1% of the reference time (the
        closed-form bound when available, otherwise the largest measured time);
      * AS-evidence: settling time grows like log |x(0)| (straight-line fit of
        T against ln r with R^2 > 0.99 and positive slope);
      * FTS-evidence: every cell settled but neither of the above;
      * AS-evidence: some cells did not settle but all trajectories shrank;
      * inconclusive otherwise.
    """
    radii = np.asarray(profile.radii, dtype=float)
    T = np.nanmax(profile.times, axis=1) if profile.times.size else np.array([])
    all_settled = bool(np.all(np.isfinite(profile.times)))
    decades = float(np.log10(radii.max() / radii.min())) if radii.size > 1 else 0.0
    ref = None
    if profile.bound_reference is not None and np.isfinite(profile.bound_reference.value):
        ref = float(profile.bound_reference.value)
    elif all_settled and T.size:
        ref = float(T.max())
    sat = profile.saturation
    r2, slope = log_fit_r2(radii, T)
    stats = {"decades": decades, "saturation": sat, "reference_time": ref,
             "log_fit_r2": r2, "log_fit_slope": slope, "all_settled": all_settled}
    if (all_settled and decades >= MIN_DECADES and sat is not None and ref is not None
            and np.isfinite(sat) and sat < SATURATION_FRACTION * ref):
        label = "FxTS-evidence"
    elif all_settled and r2 is not None and r2 > LOG_FIT_R2 and slope > 0:
        label = "AS-evidence"
    elif all_settled:
        label = "FTS-evidence"
    elif shrinking:
        label = "AS-evidence"
    else:
        label = "inconclusive"
    return label, stats


@dataclass
class CompareReport:
    system: str
    profiles: dict
    bounds: dict
    classifications: dict
    stats: dict
    verdicts: dict = dc_field(default_factory=dict)
    note: str = "classifications are evidence from finite sweeps, not proofs"

    def as_dict(self):
        return {
            "system": self.system,
            "variants": {
                name: {
                    "radii": prof.radii,
                    "directions": prof.directions,
                    "times": prof.times,
                    "terminations": prof.terminations,
                    "saturation": prof.saturation,
                    "bound": self.bounds.get(name),
                    "classification": self.classifications[name],
                    "stats": self.stats[name],
                    "verdict": self.verdicts.get(name),
                }
                for name, prof in self.profiles.items()
            },
            "note": self.note,
        }
