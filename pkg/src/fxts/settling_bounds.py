"""Comparison functions phi and settling-time bounds.

A comparison function bounds the decay of a Lyapunov-like value,
``dV/dt <= -phi(V)``, and the time to reach zero is then at most
``int_0^V0 dV / phi(V)``. This module evaluates that integral (whose
integrand is singular at zero) and the closed-form upper estimates that
exist for the power-law families.
"""

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .errors import InputError, ParameterError, QuadratureError
from .field_core import parse_keyvals
from .quadrature import adaptive_gauss
from .scaling import PiecewiseScaleParams, compute_c_and_exponents

MODULE = "settling_bounds"


class PhiFunction:
    """Base class; subclasses implement ``_eval`` on positive arrays."""

    kind = "phi"
    breakpoints = ()

    def __init__(self, exponent_at_zero, exponent_at_infinity):
        self.exponent_at_zero = exponent_at_zero
        self.exponent_at_infinity = exponent_at_infinity

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        pos = r > 0
        out[pos] = self._eval(r[pos])
        return out if out.ndim else float(out)

    def _eval(self, r):
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.spec}>"


class PowerPhi(PhiFunction):
    """phi(r) = a r^p with 0 < p < 1; finite-time but not fixed-time."""

    kind = "power"

    def __init__(self, a, p, p0=None):
        if not a > 0:
            raise ParameterError("power phi needs a > 0", module=MODULE)
        if not 0 < p < 1:
            raise ParameterError("power phi needs 0 < p < 1", module=MODULE)
        self.a, self.p = float(a), float(p)
        super().__init__(self.p if p0 is None else float(p0), self.p)

    def _eval(self, r):
        return self.a * r ** self.p

    @property
    def spec(self):
        s = f"power:a={self.a!r},p={self.p!r}"
        return s if self.exponent_at_zero == self.p else s + f",p0={self.exponent_at_zero!r}"


class PolyakovPhi(PhiFunction):
    """phi(r) = a r^p + b r^q with 0 < p < 1 < q."""

    kind = "polyakov"

    def __init__(self, a, b, p, q, p0=None):
        if not (a > 0 and b > 0):
            raise ParameterError("polyakov phi needs a, b > 0", module=MODULE)
        if not 0 < p < 1:
            raise ParameterError("polyakov phi needs 0 < p < 1", module=MODULE)
        if not q > 1:
            raise ParameterError("polyakov phi needs q > 1", module=MODULE)
        self.a, self.b, self.p, self.q = float(a), float(b), float(p), float(q)
        super().__init__(self.p if p0 is None else float(p0), self.q)

    def _eval(self, r):
        return self.a * r ** self.p + self.b * r ** self.q

    @property
    def spec(self):
        s = f"polyakov:a={self.a!r},b={self.b!r},p={self.p!r},q={self.q!r}"
        return s if self.exponent_at_zero == self.p else s + f",p0={self.exponent_at_zero!r}"


class PiecewisePhi(PhiFunction):
    """Two power-law branches built from the piecewise scaling parameters.

    ``K_lo r^p`` for ``r <= 1`` and ``K_hi r^q`` for ``r > 1`` where
    ``K_lo = c^(2-p) (2-alpha) lambda0 / 2`` and
    ``K_hi = c^(2-q) (2-beta) lambda0 / 2``.

    With ``switch="gain"`` the branch point moves to ``r = c``, which is
    where the piecewise dynamics actually change branch (``|f| = 1`` gives
    ``-dV/dt = c``), and the upper branch becomes ``K_lo c^p (r/c)^q`` so the
    function stays continuous there.
    """

    kind = "theorem5"

    def __init__(self, params, lambda0, switch="unit"):
        if not isinstance(params, PiecewiseScaleParams):
            params = compute_c_and_exponents(*params)
        if not lambda0 > 0:
            raise ParameterError("lambda0 must be positive", module=MODULE)
        if switch not in ("unit", "gain"):
            raise ParameterError("switch must be 'unit' or 'gain'", module=MODULE)
        self.params, self.lambda0, self.switch = params, float(lambda0), switch
        c, a, b = params.c, params.alpha, params.beta
        self.k_lo = c ** (2 - params.p) * (2 - a) * self.lambda0 / 2
        self.k_hi = c ** (2 - params.q) * (2 - b) * self.lambda0 / 2
        self.r_switch = 1.0 if switch == "unit" else c
        if switch == "gain":
            self.k_hi = self.k_lo * c ** (params.p - params.q)
        self.breakpoints = (self.r_switch,)
        super().__init__(params.p, params.q)

    def _eval(self, r):
        P = self.params
        return np.where(r <= self.r_switch, self.k_lo * r ** P.p, self.k_hi * r ** P.q)

    @property
    def spec(self):
        s = f"theorem5:alpha={self.params.alpha!r},beta={self.params.beta!r},lambda0={self.lambda0!r}"
        return s + (",switch=gain" if self.switch == "gain" else "")


class TablePhi(PhiFunction):
    """User-supplied samples, interpolated log-log (power law per segment).

    Outside the table the first and last segments are extended as power
    laws, so the local exponents at zero and at infinity are those of the
    end segments unless ``p0`` overrides the former. The table is not
    validated here; :func:`phi_admissible` reports non-monotone input.
    """

    kind = "table"

    def __init__(self, r, values, p0=None):
        r = np.asarray(r, dtype=float)
        v = np.asarray(values, dtype=float)
        keep = r > 0
        r, v = r[keep], v[keep]
        if r.size < 2 or r.shape != v.shape:
            raise InputError("table phi needs at least two positive-r samples", module=MODULE)
        order = np.argsort(r)
        self.r, self.v = r[order], v[order]
        self.loglog = bool(np.all(self.v > 0))
        if self.loglog:
            lr, lv = np.log(self.r), np.log(self.v)
            self.slopes = np.diff(lv) / np.diff(lr)
        else:
            self.slopes = np.diff(self.v) / np.diff(self.r)
        e0 = float(self.slopes[0]) if self.loglog else 1.0
        einf = float(self.slopes[-1]) if self.loglog else 1.0
        self.breakpoints = tuple(self.r)
        self.p0 = None if p0 is None else float(p0)
        super().__init__(e0 if p0 is None else self.p0, einf)

    def _eval(self, r):
        if not self.loglog:
            idx = np.clip(np.searchsorted(self.r, r) - 1, 0, self.r.size - 2)
            return self.v[idx] + self.slopes[idx] * (r - self.r[idx])
        lr = np.log(r)
        idx = np.clip(np.searchsorted(self.r, r) - 1, 0, self.r.size - 2)
        return np.exp(np.log(self.v[idx]) + self.slopes[idx] * (lr - np.log(self.r[idx])))

    @property
    def spec(self):
        s = "table:" + ",".join(f"{float(a)!r}/{float(b)!r}" for a, b in zip(self.r, self.v))
        return s if self.p0 is None else s + f",p0={self.p0!r}"


def parse_phi_spec(text):
    """Build a phi from ``power:a=..,p=..``, ``polyakov:a=..,b=..,p=..,q=..``,
    ``theorem5:alpha=..,beta=..,lambda0=..[,switch=gain]`` or
    ``table:r1/v1,r2/v2,...``. Any variant accepts ``p0=..``."""
    kind, _, rest = text.partition(":")
    kind = kind.strip()
    if kind == "table":
        pairs, p0 = [], None
        for tok in rest.split(","):
            tok = tok.strip()
            if tok.startswith("p0="):
                p0 = float(tok[3:])
            elif tok:
                try:
                    a, b = tok.split("/")
                    pairs.append((float(a), float(b)))
                except ValueError:
                    raise InputError(f"bad table entry {tok!r}", module=MODULE) from None
        arr = np.array(pairs)
        return TablePhi(arr[:, 0], arr[:, 1], p0=p0)
    switch = "unit"
    if "switch=gain" in rest:
        switch = "gain"
        rest = ",".join(t for t in rest.split(",") if t.strip() != "switch=gain")
    kv = parse_keyvals(rest)
    p0 = kv.pop("p0", None)
    try:
        if kind == "power":
            return PowerPhi(kv["a"], kv["p"], p0=p0)
        if kind == "polyakov":
            return PolyakovPhi(kv["a"], kv["b"], kv["p"], kv["q"], p0=p0)
        if kind == "theorem5":
            phi = PiecewisePhi(compute_c_and_exponents(kv["alpha"], kv["beta"]), kv["lambda0"], switch)
            if p0 is not None:
                phi.exponent_at_zero = float(p0)
            return phi
    except KeyError as exc:
        raise ParameterError(f"phi spec {text!r} is missing {exc.args[0]!r}", module=MODULE) from None
    raise ParameterError(f"unknown phi kind {kind!r}", module=MODULE)


def phi_eval(phi, r):
    if r < 0:
        raise InputError("phi is evaluated on nonnegative arguments only", module=MODULE)
    return float(phi(float(r)))


# admissibility ----------------------------------------------------------------

DEFAULT_PROBE = np.logspace(-8, 8, 161)
DECAY_RATIO = 0.9
DECAY_RUN = 3


@dataclass
class AdmissibilityReport:
    classification: str
    zero_at_origin: bool
    sign_ok: bool
    monotone: bool
    finite_time: bool
    fixed_time: bool
    witness: Optional[list] = None
    zero_decade_ratios: list = dc_field(default_factory=list)
    tail_decade_ratios: list = dc_field(default_factory=list)
    notes: list = dc_field(default_factory=list)

    def as_dict(self):
        return dict(self.__dict__)


def _log_integral(phi, lo, hi):
    """int_lo^hi dV/phi(V) in the variable s = log V."""
    val, _ = adaptive_gauss(lambda s: np.exp(s) / phi(np.exp(s)), math.log(lo), math.log(hi),
                            rtol=1e-10, module=MODULE)
    return val


def _geometric_decay(values):
    ratios = [b / a if a > 0 else math.inf for a, b in zip(values, values[1:])]
    tail = ratios[-DECAY_RUN:]
    return ratios, len(tail) == DECAY_RUN and all(r < DECAY_RATIO for r in tail)


def phi_admissible(phi, probe_grid=None):
    """Check sign, monotonicity and integrability of a comparison function.

    Integrability is judged from decade integrals: near zero over
    [10^-(k+1), 10^-k], k = 0..11, and in the tail over [10^k, 10^(k+1)],
    k = 0..7. Each is accepted when the last three decade-to-decade ratios
    are below 0.9. This is a heuristic and is labelled as such.
    """
    grid = DEFAULT_PROBE if probe_grid is None else np.asarray(probe_grid, dtype=float)
    grid = np.unique(grid[grid > 0])
    vals = np.asarray(phi(grid), dtype=float)
    zero_ok = phi(0.0) == 0.0
    sign_ok = bool(np.all(grid * vals > 0))
    diffs = np.diff(vals)
    monotone = bool(np.all(diffs > 0))
    witness = None
    if not monotone:
        i = int(np.argmax(diffs <= 0))
        witness = [[float(grid[i]), float(vals[i])], [float(grid[i + 1]), float(vals[i + 1])]]
    elif not sign_ok:
        i = int(np.argmax(grid * vals <= 0))
        witness = [[float(grid[i]), float(vals[i])]]
    notes = ["integrability verdicts are heuristic (decade-ratio test)"]
    if not (zero_ok and sign_ok and monotone):
        return AdmissibilityReport("not_admissible", zero_ok, sign_ok, monotone, False, False,
                                   witness, notes=notes)
    zero_dec = [_log_integral(phi, 10.0 ** -(k + 1), 10.0 ** -k) for k in range(12)]
    tail_dec = [_log_integral(phi, 10.0 ** k, 10.0 ** (k + 1)) for k in range(8)]
    zr, finite = _geometric_decay(zero_dec)
    tr, tail_ok = _geometric_decay(tail_dec)
    fixed = finite and tail_ok
    if not finite:
        cls = "not_admissible"
        notes.append("int_0 dV/phi(V) does not converge as the lower limit goes to 0")
    else:
        cls = "fixed_time" if fixed else "finite_time"
    return AdmissibilityReport(cls, zero_ok, sign_ok, monotone, finite, fixed, None, zr, tr, notes)


# settling bounds --------------------------------------------------------------

@dataclass
class SettlingBound:
    value: float
    kind: str
    formula_id: str
    inputs: dict
    achieved_tolerance: Optional[float] = None

    def as_dict(self):
        return {"value": self.value, "kind": self.kind, "formula_id": self.formula_id,
                "inputs": self.inputs, "achieved_tolerance": self.achieved_tolerance}


def _head_integral(phi, upper, p0, rtol):
    """int_0^upper dV/phi(V) with V = w^(1/(1-p0)), which cancels a V^-p0 singularity."""
    k = 1.0 / (1.0 - p0)

    def integrand(w):
        # a wrong p0 can overflow here; the quadrature then reports non-finite values
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            return k * w ** (k - 1.0) / phi(w ** k)

    return adaptive_gauss(integrand, 0.0, upper ** (1.0 - p0), rtol=rtol, module=MODULE)


def _tail_integral(phi, lower, q_inf, rtol):
    """int_lower^inf dV/phi(V) with V = lower * w^(-1/(q_inf-1)), w in (0, 1]."""
    k = 1.0 / (q_inf - 1.0)

    def integrand(w):
        return lower * k * w ** (-k - 1.0) / phi(lower * w ** -k)

    return adaptive_gauss(integrand, 0.0, 1.0, rtol=rtol, module=MODULE)


def settling_integral(phi, V0, rtol=1e-10):
    """Upper bound ``int_0^V0 dV/phi(V)`` on the settling time.

    The stretch (0, min(1, V0)] uses the power substitution driven by
    ``phi.exponent_at_zero``; (1, V0] is integrated in log V, split at the
    breakpoints of phi; an infinite V0 maps the tail onto (0, 1] using the
    growth exponent at infinity. The value is +inf when the integral
    diverges at either end.
    """
    V0 = float(V0)
    inputs = {"phi": phi.spec, "v0": V0}
    if not V0 >= 0 or math.isnan(V0):
        raise InputError("V0 must be nonnegative", module=MODULE)
    if V0 == 0:
        return SettlingBound(0.0, "quadrature", "phi_integral", inputs, 0.0)
    p0 = phi.exponent_at_zero
    if p0 is None or p0 >= 1:
        return SettlingBound(math.inf, "quadrature", "phi_integral", inputs, None)
    if p0 <= 0:
        raise QuadratureError("declared exponent at zero must be positive", module=MODULE)
    seg_rtol = rtol * 1e-2
    value, err = _head_integral(phi, min(1.0, V0), p0, seg_rtol)
    if V0 > 1:
        stops = [1.0] + [b for b in phi.breakpoints if 1.0 < b < V0]
        if math.isinf(V0):
            q_inf = phi.exponent_at_infinity
            if q_inf is None or q_inf <= 1:
                return SettlingBound(math.inf, "quadrature", "phi_integral", inputs, None)
        else:
            stops.append(V0)
        for lo, hi in zip(stops, stops[1:]):
            v, e = adaptive_gauss(lambda s: np.exp(s) / phi(np.exp(s)), math.log(lo), math.log(hi),
                                  rtol=seg_rtol, module=MODULE)
            value += v
            err += e
        if math.isinf(V0):
            v, e = _tail_integral(phi, stops[-1], q_inf, seg_rtol)
            value += v
            err += e
    achieved = err / value if value > 0 else 0.0
    if achieved > rtol:
        raise QuadratureError(f"achieved relative tolerance {achieved:.3g} exceeds {rtol:.3g}",
                              module=MODULE)
    return SettlingBound(value, "quadrature", "phi_integral", inputs, achieved)


def lemma3_bound(c, alpha, V0):
    """V0^(1-alpha) / (c (1-alpha)) for dV/dt <= -c V^alpha."""
    if not c > 0:
        raise ParameterError("lemma3 needs c > 0", module=MODULE)
    if not 0 < alpha < 1:
        raise ParameterError("lemma3 needs 0 < alpha < 1", module=MODULE)
    if not V0 >= 0:
        raise ParameterError("lemma3 needs V0 >= 0", module=MODULE)
    return V0 ** (1 - alpha) / (c * (1 - alpha))


def theorem1_bound(a, b, p, q):
    """1/(a(1-p)) + 1/(b(q-1)) for dV/dt <= -a V^p - b V^q."""
    if not (a > 0 and b > 0):
        raise ParameterError("theorem1 needs a, b > 0", module=MODULE)
    if not 0 < p < 1:
        raise ParameterError("theorem1 needs 0 < p < 1", module=MODULE)
    if not q > 1:
        raise ParameterError("theorem1 needs q > 1", module=MODULE)
    return 1.0 / (a * (1 - p)) + 1.0 / (b * (q - 1))


def theorem4_bound(lambda0, p, q):
    """Bound for the |f|^-p + |f|^-q scaling with V = |f|^2.

    The decay exponents of V are (2-p)/2 in (0.5, 1) and (2-q)/2 > 1.
    """
    if not lambda0 > 0:
        raise ParameterError("theorem4 needs lambda0 > 0", module=MODULE)
    if not 0 < p < 1:
        raise ParameterError("theorem4 needs 0 < p < 1", module=MODULE)
    if not q < 0:
        raise ParameterError("theorem4 needs q < 0", module=MODULE)
    lo, hi = (2 - p) / 2, (2 - q) / 2
    return 1.0 / (lambda0 * (1 - lo)) + 1.0 / (lambda0 * (hi - 1))


def theorem5_bound(lambda0, params):
    """Sum of the two branch integrals of the piecewise comparison function."""
    if not lambda0 > 0:
        raise ParameterError("theorem5 needs lambda0 > 0", module=MODULE)
    P = params
    return (2 * P.c ** (P.p - 2) / ((2 - P.alpha) * lambda0 * (1 - P.p))
            + 2 * P.c ** (P.q - 2) / ((2 - P.beta) * lambda0 * (P.q - 1)))


def closed_form_bound(formula, **kw):
    """Dispatch to a named closed form; returns a SettlingBound."""
    if formula == "lemma3":
        value = lemma3_bound(kw["c"], kw["alpha"], kw["v0"])
        inputs = {k: kw[k] for k in ("c", "alpha", "v0")}
    elif formula == "theorem1":
        value = theorem1_bound(kw["a"], kw["b"], kw["p"], kw["q"])
        inputs = {k: kw[k] for k in ("a", "b", "p", "q")}
    elif formula == "theorem4":
        value = theorem4_bound(kw["lambda0"], kw["p"], kw["q"])
        inputs = {k: kw[k] for k in ("lambda0", "p", "q")}
    elif formula == "theorem5":
        params = kw.get("params") or compute_c_and_exponents(kw["alpha"], kw["beta"])
        value = theorem5_bound(kw["lambda0"], params)
        inputs = {"lambda0": kw["lambda0"], **params.as_dict()}
    else:
        raise ParameterError(f"unknown formula {formula!r}", module=MODULE)
    return SettlingBound(float(value), "closed_form", formula, inputs)
