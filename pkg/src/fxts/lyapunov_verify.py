"""Sampled checks of the sufficient conditions for finite/fixed-time stability.

The conditions are universally quantified over x != 0; here they are
evaluated on a deterministic set of samples (pseudo-random points plus a
log-radial grid along the coordinate axes). Every verdict is sampled
evidence, not a proof.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Union

import numpy as np

from .errors import ContractError, InputError, NumericError, ParameterError
from .field_core import as_field, evaluate, jacobian, potential
from .settling_bounds import phi_admissible

MODULE = "lyapunov_verify"
CONVENTIONS = ("theorem4", "theorem5")
EVIDENCE_NOTE = "sampled evidence, not a proof"


def _threads():
    try:
        return max(1, int(os.environ.get("FXTS_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    # results come back in input order whatever the worker count
    n = _threads()
    if n == 1 or len(items) < 64:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(n) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class SamplingPlan:
    """Deterministic sample set.

    ``domain`` is ``("ball", radius)`` or ``("annulus", r_min, r_max)``.
    ``count`` pseudo-random points are drawn (uniform in volume for a ball,
    log-uniform radius for an annulus); ``grid_radii`` log-spaced radii along
    every signed coordinate axis are appended, endpoints included.
    """

    domain: tuple = ("annulus", 1e-3, 1e3)
    count: int = 1000
    seed: int = 0
    grid_radii: int = 16

    def __post_init__(self):
        kind = self.domain[0]
        if kind == "ball":
            if len(self.domain) != 2 or not self.domain[1] > 0:
                raise ParameterError("ball domain needs a positive radius", module=MODULE)
        elif kind == "annulus":
            if len(self.domain) != 3 or not 0 < self.domain[1] < self.domain[2]:
                raise ParameterError("annulus needs 0 < r_min < r_max", module=MODULE)
        else:
            raise ParameterError(f"unknown sampling domain {kind!r}", module=MODULE)
        if self.count < 0 or self.grid_radii < 0 or self.count + self.grid_radii == 0:
            raise ParameterError("sampling plan is empty", module=MODULE)

    def samples(self, dimension, exclude=0.0):
        rng = np.random.default_rng(self.seed)
        d = rng.standard_normal((self.count, dimension))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        u = rng.random(self.count)
        if self.domain[0] == "ball":
            R = float(self.domain[1])
            radii = R * u ** (1.0 / dimension)
            lo, hi = max(R * 1e-3, 10 * exclude), R
        else:
            lo, hi = float(self.domain[1]), float(self.domain[2])
            radii = np.exp(np.log(lo) + u * (np.log(hi) - np.log(lo)))
        pts = d * radii[:, None]
        if self.grid_radii:
            g = np.logspace(np.log10(lo), np.log10(hi), self.grid_radii)
            axes = np.vstack([np.eye(dimension), -np.eye(dimension)])
            pts = np.vstack([pts, (g[:, None, None] * axes[None]).reshape(-1, dimension)])
        keep = np.linalg.norm(pts, axis=1) > exclude
        return pts[keep]

    def as_dict(self):
        return {"domain": list(self.domain), "count": self.count, "seed": self.seed,
                "grid_radii": self.grid_radii}


def h_matrix(field, x, conv="theorem4"):
    """-(J + J^T) (theorem4) or -(J + J^T)/2 (theorem5); exactly symmetric."""
    if conv not in CONVENTIONS:
        raise ParameterError(f"unknown H convention {conv!r}", module=MODULE)
    field = as_field(field)
    x = np.asarray(x, dtype=float).reshape(field.dimension)
    if np.linalg.norm(x) <= field.equilibrium_tolerance:
        raise InputError("H is only defined away from the origin", module=MODULE)
    J = jacobian(field, x)
    S = J + J.T
    return -S if conv == "theorem4" else -0.5 * S


@dataclass
class SpectralReport:
    condition: str
    convention: str
    lambda0_estimate: float
    worst_point: list
    verdict: str
    threshold: float
    sample_count: int
    zero_multiplicity: list = dc_field(default_factory=list)
    orthogonality_residual_max: float = 0.0
    min_eigenvalue: Optional[float] = None
    warnings: list = dc_field(default_factory=list)
    note: str = EVIDENCE_NOTE

    def as_dict(self):
        d = dict(self.__dict__)
        mult = sorted(set(self.zero_multiplicity))
        d["zero_multiplicity"] = mult
        d["margins"] = {"lambda0_minus_threshold": self.lambda0_estimate - self.threshold}
        return d


def _eig(field, x, conv, eigvecs=False):
    H = h_matrix(field, x, conv)
    try:
        return np.linalg.eigh(H) if eigvecs else np.linalg.eigvalsh(H)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver failed: {exc}", module=MODULE, point=list(map(float, x))) from None


def verify_condition_i(field, plan=SamplingPlan(), conv="theorem4", threshold=1e-6):
    """Smallest eigenvalue of H over the samples against a positive threshold."""
    f = as_field(field)
    pts = plan.samples(f.dimension, exclude=f.equilibrium_tolerance)
    mins = np.array(_map(lambda x: _eig(f, x, conv)[0], list(pts)))
    k = int(np.argmin(mins))
    lam = float(mins[k])
    verdict = "condition_i_holds" if lam >= threshold else "neither"
    warnings = []
    if not f.nonvanishing:
        warnings.append("base field is not declared to vanish only at the origin")
    return SpectralReport("i", conv, lam, pts[k].tolist(), verdict, threshold, len(pts),
                          min_eigenvalue=lam, warnings=warnings)


def verify_condition_ii(field, plan=SamplingPlan(), conv="theorem4", threshold=1e-6, zero_tol=1e-8):
    """Positive semidefinite H with a constant-dimension null space orthogonal
    to f, and a positive second eigenvalue band."""
    f = as_field(field)
    pts = plan.samples(f.dimension, exclude=f.equilibrium_tolerance)

    def one(x):
        w, V = _eig(f, x, conv, eigvecs=True)
        zero = np.abs(w) <= zero_tol
        fx = evaluate(f, x)
        nf = np.linalg.norm(fx)
        if zero.any() and nf > 0:
            resid = float(np.linalg.norm(V[:, zero].T @ fx) / nf)
        else:
            resid = 0.0
        above = w[w > zero_tol]
        lam2 = float(above[0]) if above.size else np.inf
        return int(zero.sum()), resid, lam2, float(w[0]), nf

    rows = _map(one, list(pts))
    mult = [r[0] for r in rows]
    resid = np.array([r[1] for r in rows])
    lam2 = np.array([r[2] for r in rows])
    wmin = np.array([r[3] for r in rows])
    k = int(np.argmin(lam2))
    warnings = []
    if not f.nonvanishing:
        warnings.append("contract: base field is not declared to vanish only at the origin "
                        "(f(x) = 0 iff x = 0 fails)")
    if any(r[4] == 0.0 for r in rows):
        warnings.append("f vanishes at some sampled x != 0")
    holds = (len(set(mult)) == 1 and bool(np.all(wmin >= -zero_tol))
             and float(resid.max()) < zero_tol and bool(np.all(lam2 >= threshold)))
    return SpectralReport("ii", conv, float(lam2[k]), pts[k].tolist(),
                          "condition_ii_holds" if holds else "neither", threshold, len(pts),
                          zero_multiplicity=mult, orthogonality_residual_max=float(resid.max()),
                          min_eigenvalue=float(wmin.min()), warnings=warnings)


# Lie derivatives ----------------------------------------------------------------

VSelector = Union[str, Callable[[np.ndarray], float]]


def _base(system):
    return getattr(system, "base", as_field(system))


def v_value(system, selector, x):
    """Value of the selected Lyapunov-like function at x.

    ``norm_sq`` is ``|f(x)|^2`` of the base field; ``potential`` is
    ``-int_0^x f^T dy`` (closed form when the field carries one); a callable
    is used as is.
    """
    base = _base(system)
    x = np.asarray(x, dtype=float).reshape(base.dimension)
    if callable(selector):
        return float(selector(x))
    if selector == "norm_sq":
        fx = evaluate(base, x)
        return float(fx @ fx)
    if selector == "potential":
        if not base.gradient_field:
            raise ContractError("potential selector needs a gradient field", module=MODULE)
        if base.potential_fn is not None:
            return float(base.potential_fn(x))
        return potential(base, x)
    raise ParameterError(f"unknown V selector {selector!r}", module=MODULE)


def v_gradient(system, selector, x, h=None):
    base = _base(system)
    x = np.asarray(x, dtype=float).reshape(base.dimension)
    if selector == "norm_sq":
        if np.linalg.norm(x) <= base.equilibrium_tolerance:
            return np.zeros(base.dimension)
        return 2.0 * jacobian(base, x).T @ evaluate(base, x)
    if selector == "potential":
        if not base.gradient_field:
            raise ContractError("potential selector needs a gradient field", module=MODULE)
        return -evaluate(base, x)
    if callable(selector):
        h = h if h is not None else 1e-6 * max(1.0, np.linalg.norm(x))
        g = np.empty(base.dimension)
        for i in range(base.dimension):
            e = np.zeros(base.dimension)
            e[i] = h
            g[i] = (selector(x + e) - selector(x - e)) / (2 * h)
        return g
    raise ParameterError(f"unknown V selector {selector!r}", module=MODULE)


def lie_derivative(system, selector, x):
    """grad V(x) . g(x) where g is the (possibly scaled) right-hand side."""
    g = evaluate(as_field(system), x)
    return float(v_gradient(system, selector, x) @ g)


@dataclass
class DecreaseReport:
    condition: str
    holds: bool
    worst_margin: float
    worst_point: Optional[list]
    sample_count: int
    skipped: int = 0
    failing_points: list = dc_field(default_factory=list)
    warnings: list = dc_field(default_factory=list)
    note: str = EVIDENCE_NOTE

    def as_dict(self):
        return dict(self.__dict__)


def _margin(lhs, rhs):
    """Signed margin lhs - rhs, relative once the magnitudes exceed one."""
    return (lhs - rhs) / max(1.0, abs(lhs), abs(rhs))


def _admissible_or_raise(phi, integrable=True):
    rep = phi_admissible(phi)
    bad = rep.classification == "not_admissible" if integrable else not (
        rep.zero_at_origin and rep.sign_ok and rep.monotone)
    if bad:
        raise ContractError("phi is not admissible (sign, monotonicity or integrability fails)",
                            module=MODULE, witness=rep.witness)


def _points(plan, f, points):
    if points is None:
        return plan.samples(f.dimension, exclude=f.equilibrium_tolerance)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != f.dimension:
        raise InputError("sample points have the wrong dimension", module=MODULE)
    return pts[np.linalg.norm(pts, axis=1) > f.equilibrium_tolerance]


def verify_phi_decrease(system, selector, phi, plan=SamplingPlan(), tol=1e-9, max_failing=20,
                        points=None):
    """dV/dt <= -phi(V) at every sample, up to ``tol`` in the scaled margin.

    The margin at a sample is ``(-phi(V) - dV/dt) / max(1, |dV/dt|, phi(V))``.
    """
    _admissible_or_raise(phi)
    f = as_field(system)
    pts = _points(plan, f, points)

    def one(x):
        return _margin(-phi(v_value(system, selector, x)), lie_derivative(system, selector, x))

    margins = np.array(_map(one, list(pts)))
    return _decrease_report("phi1", margins, pts, tol, 0, max_failing)


def _decrease_report(condition, margins, pts, tol, skipped, max_failing):
    if margins.size == 0:
        return DecreaseReport(condition, False, float("nan"), None, 0, skipped,
                              warnings=["no usable samples"])
    k = int(np.argmin(margins))
    bad = np.flatnonzero(margins < -tol)
    failing = [{"point": pts[i].tolist(), "margin": float(margins[i])} for i in bad[:max_failing]]
    return DecreaseReport(condition, bad.size == 0, float(margins[k]), pts[k].tolist(),
                          int(margins.size), skipped, failing)


def _segment_hits_ball(a, b, radius):
    d = b - a
    dd = float(d @ d)
    t = 0.0 if dd == 0 else min(1.0, max(0.0, -float(a @ d) / dd))
    return np.linalg.norm(a + t * d) <= radius


def verify_second_order(system, selector, phi, plan=SamplingPlan(), delta=1e-6, tol=1e-3,
                        max_failing=20, points=None):
    """Growth of dV/dt along the flow against ``phi(-dV/dt)``.

    The time derivative of ``dV/dt`` is a central difference along the
    flow, ``(Vdot(x + delta g) - Vdot(x - delta g)) / (2 delta)``. Samples
    whose step segment reaches the equilibrium ball are skipped and counted.
    """
    _admissible_or_raise(phi, integrable=False)
    f = as_field(system)
    pts = _points(plan, f, points)
    radius = f.equilibrium_tolerance

    def one(x):
        g = evaluate(f, x)
        xp, xm = x + delta * g, x - delta * g
        if _segment_hits_ball(xm, xp, radius):
            return None
        vdot = lie_derivative(system, selector, x)
        growth = (lie_derivative(system, selector, xp) - lie_derivative(system, selector, xm)) / (2 * delta)
        return _margin(growth, phi(max(-vdot, 0.0)))

    out = _map(one, list(pts))
    used = [i for i, m in enumerate(out) if m is not None]
    margins = np.array([out[i] for i in used])
    return _decrease_report("phi2", margins, pts[used], tol, len(pts) - len(used), max_failing)
