"""Norm-based rescalings of a base vector field.

Two constructions are supported:

* ``fxts_scale``: ``(|f|^-p + |f|^-q) f`` with 0 < p < 1 and q < 0;
* ``piecewise_scale``: ``c f / |f|^alpha`` where ``|f| <= 1`` and
  ``c f / |f|^beta`` where ``|f| > 1``, with alpha in (0, 1) and beta < 0.

Both are continuous at the origin (the exponents ``1 - p`` and ``1 - q``
are positive) and take the value zero there. Neither carries an analytic
Jacobian; differentiation falls back to central differences.
"""

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ContractError, ParameterError
from .field_core import VectorField, as_field, evaluate, parse_keyvals

# below this norm of f the scaled value is the continuous extension, zero
TINY_NORM = 1e-300


@dataclass(frozen=True)
class ScaleExponentsEq5:
    p: float
    q: float

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ParameterError(f"p must lie in (0, 1), got {self.p}", module="scaling")
        if not self.q < 0.0:
            raise ParameterError(f"q must be negative, got {self.q}", module="scaling")

    @property
    def spec(self):
        return f"eq5:p={self.p!r},q={self.q!r}"

    def as_dict(self):
        return {"kind": "eq5", "p": self.p, "q": self.q}


@dataclass(frozen=True)
class PiecewiseScaleParams:
    alpha: float
    beta: float
    c: float
    p: float
    q: float

    @property
    def spec(self):
        return f"eq6:alpha={self.alpha!r},beta={self.beta!r}"

    def as_dict(self):
        return {"kind": "eq6", "alpha": self.alpha, "beta": self.beta,
                "c": self.c, "p": self.p, "q": self.q}

    def continuity_residual(self):
        """Mismatch of the two branches of the comparison function at r = 1."""
        return abs(self.c ** (2 - self.p) * (2 - self.alpha) - self.c ** (2 - self.q) * (2 - self.beta))


def _check_alpha_beta(alpha, beta):
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}", module="scaling")
    if not beta < 0.0:
        raise ParameterError(f"beta must be negative, got {beta}", module="scaling")


def compute_c_and_exponents(alpha, beta):
    """Exponents p, q and the gain c of the piecewise scaling.

    ``p = (2 - 2 alpha)/(2 - alpha)`` and ``q = (2 - 2 beta)/(2 - beta)``.
    The gain is ``c = ((2 - beta)/(2 - alpha)) ** (1/(q - p))``; this is the
    sign of the exponent for which ``c^(2-p) (2-alpha) = c^(2-q) (2-beta)``,
    i.e. for which the two branches of the piecewise comparison function
    meet at r = 1.
    """
    alpha, beta = float(alpha), float(beta)
    _check_alpha_beta(alpha, beta)
    p = (2 - 2 * alpha) / (2 - alpha)
    q = (2 - 2 * beta) / (2 - beta)
    c = ((2 - beta) / (2 - alpha)) ** (1.0 / (q - p))
    return PiecewiseScaleParams(alpha, beta, c, p, q)


@dataclass(frozen=True)
class ScaledSystem:
    """A rescaled field. ``field`` is the composite right-hand side."""

    base: VectorField
    kind: str
    params: Union[ScaleExponentsEq5, PiecewiseScaleParams]
    field: VectorField

    @property
    def dimension(self):
        return self.base.dimension

    @property
    def spec(self):
        return self.params.spec

    def __call__(self, x):
        return evaluate(self.field, x)


def _require_nonvanishing(base):
    if not base.nonvanishing:
        raise ContractError(f"base field {base.name or '<anonymous>'} is not declared to vanish "
                            "only at the origin", module="scaling")


def fxts_scale(field, params, check=True):
    """Scale ``f`` by ``|f|^-p + |f|^-q``."""
    base = as_field(field)
    if not isinstance(params, ScaleExponentsEq5):
        params = ScaleExponentsEq5(*params)
    if check:
        _require_nonvanishing(base)
    p, q = params.p, params.q
    f = base.evaluator

    def rhs(x):
        fx = np.asarray(f(x), dtype=float)
        nf = np.linalg.norm(fx)
        if nf < TINY_NORM:
            return np.zeros_like(fx)
        return (nf ** -p + nf ** -q) * fx

    composite = VectorField(base.dimension, rhs, None, None, False, None,
                            base.equilibrium_tolerance, base.nonvanishing,
                            f"{base.name}|{params.spec}")
    return ScaledSystem(base, "eq5", params, composite)


def piecewise_branches(params, fx):
    """Both branch values ``c f/|f|^alpha`` and ``c f/|f|^beta`` at a given f(x)."""
    nf = np.linalg.norm(fx)
    return params.c * fx / nf ** params.alpha, params.c * fx / nf ** params.beta


def piecewise_scale(field, alpha, beta, check=True):
    """Three-branch rescaling selected by ``|f(x)| <= 1`` versus ``> 1``."""
    base = as_field(field)
    params = compute_c_and_exponents(alpha, beta)
    if check:
        _require_nonvanishing(base)
    a, b, c = params.alpha, params.beta, params.c
    f = base.evaluator

    def rhs(x):
        fx = np.asarray(f(x), dtype=float)
        nf = np.linalg.norm(fx)
        if nf < TINY_NORM:
            return np.zeros_like(fx)
        if nf <= 1.0:
            return c * fx / nf ** a
        return c * fx / nf ** b

    composite = VectorField(base.dimension, rhs, None, None, False, None,
                            base.equilibrium_tolerance, base.nonvanishing,
                            f"{base.name}|{params.spec}")
    return ScaledSystem(base, "eq6", params, composite)


def parse_scale_spec(text):
    """``eq5:p=..,q=..`` or ``eq6:alpha=..,beta=..`` to a params object."""
    kind, _, rest = text.partition(":")
    kv = parse_keyvals(rest)
    kind = kind.strip()
    try:
        if kind == "eq5":
            return ScaleExponentsEq5(float(kv["p"]), float(kv["q"]))
        if kind == "eq6":
            return compute_c_and_exponents(float(kv["alpha"]), float(kv["beta"]))
    except KeyError as exc:
        raise ParameterError(f"scale spec {text!r} is missing {exc.args[0]!r}", module="scaling") from None
    raise ParameterError(f"unknown scale kind {kind!r}; use eq5 or eq6", module="scaling")


def apply_scale(field, params, check=True):
    if params is None:
        return field
    if isinstance(params, ScaleExponentsEq5):
        return fxts_scale(field, params, check=check)
    return piecewise_scale(field, params.alpha, params.beta, check=check)
