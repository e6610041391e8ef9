"""Trajectory simulation and empirical settling times.

Exact arrival at the origin cannot be observed in floating point, so a
trajectory counts as settled when it enters the ball of radius ``eps`` and
stays inside for ``settle_dwell``; the state is then snapped to the origin,
which is an equilibrium of every system handled here.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .errors import InputError, ParameterError
from .field_core import as_field, evaluate
from .lyapunov_verify import v_value

MODULE = "sim_engine"

# Dormand-Prince 5(4)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


@dataclass(frozen=True)
class SimConfig:
    """Integrator settings.

    ``method`` is ``rk4`` (fixed step ``dt``) or ``rk45`` (Dormand-Prince with
    ``rel_tol``/``abs_tol`` and steps clamped to ``[dt_min, dt_max]``).
    ``settle_dwell`` of None means ten times the smallest step.
    """

    method: str = "rk45"
    dt: float = 1e-3
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    dt_min: float = 1e-16
    dt_max: float = 0.1
    t_max: float = 50.0
    eps: float = 1e-9
    settle_dwell: Optional[float] = None
    record_stride: int = 1
    max_steps: int = 2_000_000

    def __post_init__(self):
        if self.method not in ("rk4", "rk45"):
            raise ParameterError(f"unknown method {self.method!r}", module=MODULE)
        if self.method == "rk4" and not self.dt > 0:
            raise ParameterError("dt must be positive", module=MODULE)
        if self.method == "rk45":
            if not 0 < self.dt_min < self.dt_max:
                raise ParameterError("need 0 < dt_min < dt_max", module=MODULE)
            if not (self.rel_tol > 0 and self.abs_tol > 0):
                raise ParameterError("tolerances must be positive", module=MODULE)
        if not self.t_max > 0 or not self.eps > 0:
            raise ParameterError("t_max and eps must be positive", module=MODULE)
        if self.settle_dwell is not None and self.settle_dwell < 0:
            raise ParameterError("settle_dwell must be nonnegative", module=MODULE)
        if int(self.record_stride) < 1:
            raise ParameterError("record_stride must be a positive integer", module=MODULE)

    @property
    def dwell(self):
        if self.settle_dwell is not None:
            return self.settle_dwell
        return 10 * (self.dt if self.method == "rk4" else self.dt_min)

    def as_dict(self):
        d = dict(self.__dict__)
        d["settle_dwell"] = self.dwell
        return d


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    termination: str
    eps: float
    dwell: float
    t_max: float
    v_values: Optional[np.ndarray] = None
    settle_event: Optional[dict] = None
    steps: int = 0
    rejected: int = 0

    @property
    def final_state(self):
        if self.termination == "settled":
            return np.zeros(self.states.shape[1])
        return self.states[-1]

    @property
    def t_settle(self):
        return None if self.settle_event is None else self.settle_event["t_settle"]


def _ball_entry(a, b, eps):
    """Smallest s in [0, 1] with |a + s (b - a)| <= eps, or None."""
    if np.linalg.norm(a) <= eps:
        return 0.0
    d = b - a
    dd = float(d @ d)
    if dd == 0.0:
        return None
    # |a + s d|^2 = eps^2, first root
    ad = float(a @ d)
    disc = ad * ad - dd * (float(a @ a) - eps * eps)
    if disc < 0:
        return None
    s = (-ad - math.sqrt(disc)) / dd
    if 0.0 <= s <= 1.0:
        return s
    return 1.0 if np.linalg.norm(b) <= eps else None


def _rk4_step(f, x, h):
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _dp_step(f, x, h, k0):
    K = [k0]
    for i in range(1, 7):
        y = x + h * sum(a * k for a, k in zip(_A[i], K))
        K.append(f(y))
    x5 = x + h * sum(b * k for b, k in zip(_B5, K) if b)
    err = h * sum(e * k for e, k in zip(_E, K))
    return x5, err, K[6]


def _initial_step(f, x, fx, cfg):
    sc = cfg.abs_tol + cfg.rel_tol * np.abs(x)
    d0 = np.sqrt(np.mean((x / sc) ** 2))
    d1 = np.sqrt(np.mean((fx / sc) ** 2))
    h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    return min(max(h, cfg.dt_min), cfg.dt_max)


def integrate(system, x0, config=SimConfig(), v_selector=None):
    """Integrate from x0 until settled, t_max, or an unrecoverable step."""
    fld = as_field(system)
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.size != fld.dimension:
        raise InputError(f"x0 has length {x.size}, expected {fld.dimension}", module=MODULE)
    if not np.all(np.isfinite(x)):
        raise InputError("x0 must be finite", module=MODULE)
    cfg = config
    if not cfg.eps > fld.equilibrium_tolerance:
        raise ParameterError("eps must exceed the field's equilibrium tolerance", module=MODULE)

    def f(y):
        return evaluate(fld, y)

    eps, dwell, stride = cfg.eps, cfg.dwell, int(cfg.record_stride)
    times, states = [0.0], [x.copy()]
    t = 0.0
    entry = 0.0 if np.linalg.norm(x) <= eps else None
    termination = "t_max_reached"
    steps = rejected = 0
    last_recorded = 0
    fx = f(x)
    h = cfg.dt if cfg.method == "rk4" else _initial_step(f, x, fx, cfg)

    def record(tt, xx):
        nonlocal last_recorded
        if tt > times[-1]:
            times.append(tt)
            states.append(xx.copy())
            last_recorded = steps

    while True:
        if entry is not None and (t - entry >= dwell or not np.any(x)):
            termination = "settled"
            x = np.zeros_like(x)
            # the snapped origin is recorded only if it gets its own time stamp,
            # so the bracketing pair of the entry stays intact
            record(t, x)
            break
        if t >= cfg.t_max:
            if entry is not None:
                termination = "settled"
            break
        if steps >= cfg.max_steps:
            termination = "step_failure"
            break
        h = min(h, cfg.t_max - t)
        if cfg.method == "rk4":
            xn = _rk4_step(f, x, h)
            fxn = None
        else:
            xn, err, fxn = _dp_step(f, x, h, fx)
            sc = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(x), np.abs(xn))
            e = float(np.sqrt(np.mean((err / sc) ** 2)))
            if not np.isfinite(e) or e > 1.0:
                if h <= cfg.dt_min * (1 + 1e-12):
                    termination = "step_failure"
                    break
                rejected += 1
                fac = 0.2 if not np.isfinite(e) else max(0.2, 0.9 * e ** -0.2)
                h = max(cfg.dt_min, h * fac)
                continue
        if not np.all(np.isfinite(xn)):
            termination = "step_failure"
            break
        steps += 1
        prev_x, prev_t = x, t
        t = t + h
        x = xn
        fx = fxn if fxn is not None else None
        inside = np.linalg.norm(x) <= eps
        if entry is None:
            s = _ball_entry(prev_x, x, eps)
            if s is not None:
                # same arithmetic as settling_time, so both report the same instant
                entry = prev_t + s * (t - prev_t)
                # keep the bracketing pair in the record
                if prev_t > times[-1]:
                    record(prev_t, prev_x)
                if inside:
                    record(t, x)
        elif not inside:
            entry = None
            record(t, x)
        if steps - last_recorded >= stride:
            record(t, x)
        if cfg.method == "rk45":
            if fx is None:
                fx = f(x)
            e_safe = max(e, 1e-10)
            h = min(cfg.dt_max, max(cfg.dt_min, h * min(5.0, 0.9 * e_safe ** -0.2)))
        else:
            h = cfg.dt
    if times[-1] < t:
        record(t, x)
    T = np.array(times)
    X = np.array(states)
    settle = None
    if termination == "settled":
        settle = {"t_settle": float(entry), "confirmed": bool(t - entry >= dwell or not np.any(x))}
    V = None
    if v_selector is not None:
        V = np.array([v_value(system, v_selector, xi) for xi in X])
    return Trajectory(T, X, termination, eps, dwell, cfg.t_max, V, settle, steps, rejected)


def settling_time(traj, eps=None, dwell=None):
    """First eps-ball entry (linear interpolation) that is confirmed by the dwell.

    Confirmation means every recorded sample within ``dwell`` after the entry
    stays inside the ball and the record reaches ``entry + dwell`` (or the
    trajectory ends in the ``settled`` or ``t_max_reached`` state).
    """
    eps = traj.eps if eps is None else eps
    dwell = traj.dwell if dwell is None else dwell
    T, X = traj.times, traj.states
    norms = np.linalg.norm(X, axis=1)
    i = 0
    n = len(T)
    while i < n:
        if i == 0 and norms[0] <= eps:
            t_entry, j = float(T[0]), 0
        else:
            if i == 0:
                i = 1
                continue
            s = _ball_entry(X[i - 1], X[i], eps)
            if s is None:
                i += 1
                continue
            t_entry, j = float(T[i - 1] + s * (T[i] - T[i - 1])), i
            if norms[i] > eps:
                # passed through the ball within one step
                if dwell == 0:
                    return t_entry
                i += 1
                continue
        k = j
        while k < n and T[k] <= t_entry + dwell and norms[k] <= eps:
            k += 1
        if k < n and T[k] <= t_entry + dwell:
            i = k + 1
            continue
        if k < n or T[-1] >= t_entry + dwell or traj.termination in ("settled", "t_max_reached"):
            return t_entry
        return None
    return None


# trajectory-level checks ------------------------------------------------------

def v_monotone(traj, slack=1e-9):
    """(ok, worst increase) for V along the record; slack is relative above V = 1."""
    V = traj.v_values
    if V is None or V.size < 2:
        return True, 0.0
    inc = np.diff(V) / np.maximum(1.0, np.abs(V[:-1]))
    worst = float(inc.max())
    return worst <= slack, worst


def stays_in_sublevel(traj, slack=1e-9):
    V = traj.v_values
    if V is None:
        return True
    return bool(np.all(V <= V[0] + slack * max(1.0, abs(V[0]))))


# sweeps -----------------------------------------------------------------------

@dataclass
class SettlingProfile:
    radii: list
    directions: list
    times: np.ndarray
    terminations: list
    bound_reference: Optional[object] = None
    saturation: Optional[float] = None
    notes: list = dc_field(default_factory=list)

    def rows(self):
        """Flat rows (radius, direction index, t_settle, bound, margin)."""
        b = None if self.bound_reference is None else self.bound_reference.value
        out = []
        for i, r in enumerate(self.radii):
            for j in range(len(self.directions)):
                t = self.times[i, j]
                ts = None if np.isnan(t) else float(t)
                margin = None if (b is None or ts is None) else b - ts
                out.append((r, j, ts, b, margin))
        return out


def _workers(workers):
    if workers is not None:
        return max(1, int(workers))
    try:
        return max(1, int(os.environ.get("FXTS_THREADS", "1")))
    except ValueError:
        return 1


def saturation_statistic(radii, times):
    """T(r_max) - T(r_max/100), worst over directions; None when r_max/100 is absent."""
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0:
        return None
    imax = int(np.argmax(radii))
    target = radii[imax] / 100.0
    hits = np.flatnonzero(np.isclose(radii, target, rtol=1e-9))
    if hits.size == 0:
        return None
    d = times[imax] - times[hits[0]]
    return float(np.max(d)) if not np.any(np.isnan(d)) else float("nan")


def sweep(system, radii, directions, config=SimConfig(), bound=None, workers=None):
    """Settling time from every radius x direction, in input order."""
    fld = as_field(system)
    radii = [float(r) for r in radii]
    dirs = [np.asarray(d, dtype=float).reshape(-1) for d in directions]
    if not radii:
        raise ParameterError("sweep needs at least one radius", module=MODULE)
    if not dirs:
        raise ParameterError("sweep needs at least one direction", module=MODULE)
    for d in dirs:
        if d.size != fld.dimension or not np.linalg.norm(d) > 0:
            raise ParameterError("directions must be nonzero vectors of the system dimension",
                                 module=MODULE)
    dirs = [d / np.linalg.norm(d) for d in dirs]
    cells = [(r, d) for r in radii for d in dirs]

    def run(cell):
        r, d = cell
        try:
            tr = integrate(system, r * d, config)
        except Exception as exc:  # failed cell is marked, sweep continues
            return float("nan"), f"error: {exc}"
        ts = settling_time(tr) if tr.termination != "step_failure" else None
        return (float("nan") if ts is None else ts), tr.termination

    n = _workers(workers)
    if n > 1:
        with ThreadPoolExecutor(n) as pool:
            out = list(pool.map(run, cells))
    else:
        out = [run(c) for c in cells]
    times = np.array([o[0] for o in out]).reshape(len(radii), len(dirs))
    terms = [o[1] for o in out]
    return SettlingProfile(radii, [d.tolist() for d in dirs], times, terms, bound,
                           saturation_statistic(radii, times))
