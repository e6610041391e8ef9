"""Vector fields ``x' = f(x)`` with Jacobian and potential access, plus a
small catalog of test systems addressable by name from the command line.
"""

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .errors import ContractError, InputError, NumericError, ParameterError, UnknownSystemError
from .quadrature import composite_nodes

DEFAULT_EQUILIBRIUM_TOL = 1e-12
QUAD_ORDER = 16
QUAD_PANELS = 64


@dataclass(frozen=True)
class VectorField:
    """A dimension-n dynamical map.

    ``jacobian_fn`` of None selects central finite differences with step
    ``fd_step`` (None means ``1e-6 * max(1, |x|)``). ``nonvanishing`` records
    the declaration f(x) = 0 iff x = 0, which the scaled systems rely on.
    """

    dimension: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    jacobian_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fd_step: Optional[float] = None
    gradient_field: bool = False
    potential_fn: Optional[Callable[[np.ndarray], float]] = None
    equilibrium_tolerance: float = DEFAULT_EQUILIBRIUM_TOL
    nonvanishing: bool = True
    name: str = ""

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ParameterError("dimension must be a positive integer", module="field_core")
        if not self.equilibrium_tolerance > 0:
            raise ParameterError("equilibrium_tolerance must be positive", module="field_core")
        if self.fd_step is not None and not self.fd_step > 0:
            raise ParameterError("finite-difference step must be positive", module="field_core")

    @property
    def jacobian_mode(self):
        return "analytic" if self.jacobian_fn is not None else "finite_difference"

    def __call__(self, x):
        return evaluate(self, x)


def as_field(system):
    """Return the VectorField behind a field or a scaled system."""
    return getattr(system, "field", system)


def _state(field, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape != (field.dimension,):
        raise InputError(f"state has shape {x.shape}, expected ({field.dimension},)",
                         module="field_core")
    return x


def evaluate(field, x):
    """f(x), with an exact zero inside the equilibrium ball."""
    x = _state(field, x)
    if np.linalg.norm(x) <= field.equilibrium_tolerance:
        return np.zeros(field.dimension)
    return np.asarray(field.evaluator(x), dtype=float).reshape(field.dimension)


def jacobian(field, x, h=None):
    """Jacobian of f at x; central differences when no analytic form exists."""
    x = _state(field, x)
    if field.jacobian_fn is not None:
        J = np.asarray(field.jacobian_fn(x), dtype=float).reshape(field.dimension, field.dimension)
    else:
        nx = np.linalg.norm(x)
        if nx <= field.equilibrium_tolerance:
            raise InputError("finite-difference Jacobian requested inside the equilibrium ball",
                             module="field_core")
        if h is None:
            h = field.fd_step if field.fd_step is not None else 1e-6 * max(1.0, nx)
        J = fd_jacobian(field.evaluator, x, h)
    if not np.all(np.isfinite(J)):
        raise NumericError("non-finite Jacobian entries", module="field_core", point=x.tolist())
    return J


def fd_jacobian(fn, x, h):
    """Column-wise central differences (f(x + h e_i) - f(x - h e_i)) / 2h."""
    n = x.size
    J = np.empty((n, n))
    # overflow shows up as non-finite entries, checked by the caller
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            J[:, i] = (np.asarray(fn(x + e), dtype=float) - np.asarray(fn(x - e), dtype=float)) / (2 * h)
    return J


def line_integral(field, x, path="straight_line", order=QUAD_ORDER, panels=QUAD_PANELS):
    """-int_0^x f(y)^T dy along the chosen path, for any field.

    Unlike :func:`potential` this does not require a gradient field, which
    makes it usable as a detector: on non-gradient fields the two paths
    disagree.
    """
    x = _state(field, x)
    if not np.any(x):
        return 0.0
    if path == "straight_line":
        t, w = composite_nodes(0.0, 1.0, order, panels)
        vals = np.array([evaluate(field, ti * x) @ x for ti in t])
        return -float(np.dot(w, vals))
    if path == "axis_aligned":
        total = 0.0
        base = np.zeros(field.dimension)
        for k in range(field.dimension):
            if x[k] != 0.0:
                s, w = composite_nodes(0.0, x[k], order, panels)
                vals = []
                for sk in s:
                    y = base.copy()
                    y[k] = sk
                    vals.append(evaluate(field, y)[k])
                total -= float(np.dot(w, vals))
            base[k] = x[k]
        return total
    raise InputError(f"unknown integration path {path!r}", module="field_core")


def potential(field, x, path="straight_line", order=QUAD_ORDER, panels=QUAD_PANELS):
    """V(x) = -int_0^x f(y)^T dy by composite Gauss-Legendre quadrature."""
    field = as_field(field)
    if not field.gradient_field:
        raise ContractError("potential requested for a field not declared as a gradient field",
                            module="field_core", system=field.name)
    return line_integral(field, x, path, order, panels)


# catalog ---------------------------------------------------------------------

@dataclass(frozen=True)
class CatalogEntry:
    name: str
    field: VectorField
    known_constants: dict = dc_field(default_factory=dict)
    params: dict = dc_field(default_factory=dict)

    @property
    def spec(self):
        return format_system_spec(self.name, self.params)


def _linear_contraction(n=2):
    n = int(n)
    I = np.eye(n)
    f = VectorField(n, lambda x: -x, jacobian_fn=lambda x: -I, gradient_field=True,
                    potential_fn=lambda x: 0.5 * float(x @ x), name="linear_contraction")
    return f, {"lambda0": {"theorem4": 2.0, "theorem5": 1.0}}


def _rotation_contraction(w=1.0):
    w = float(w)
    M = np.array([[0.0, w], [-w, 0.0]]) - np.eye(2)
    f = VectorField(2, lambda x: M @ x, jacobian_fn=lambda x: M, name="rotation_contraction")
    return f, {"lambda0": {"theorem4": 2.0, "theorem5": 1.0}}


def _quadratic_gradient(q=(1.0, 4.0)):
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if np.any(q <= 0):
        raise ParameterError("quadratic_gradient needs positive diagonal entries", module="field_core")
    Q = np.diag(q)
    f = VectorField(q.size, lambda x: -(Q @ x), jacobian_fn=lambda x: -Q, gradient_field=True,
                    potential_fn=lambda x: 0.5 * float(x @ Q @ x), name="quadratic_gradient")
    lmin = float(q.min())
    return f, {"lambda0": {"theorem4": 2 * lmin, "theorem5": lmin}}


def _scalar_cubic():
    f = VectorField(1, lambda x: -x ** 3, jacobian_fn=lambda x: np.array([[-3.0 * x[0] ** 2]]),
                    gradient_field=True, potential_fn=lambda x: 0.25 * float(x[0] ** 4),
                    name="scalar_cubic")
    # H(x) = 6x^2 (theorem4) has infimum 0 over x != 0
    return f, {"lambda0": {"theorem4": 0.0, "theorem5": 0.0}}


def _gradient_quartic(n=2):
    n = int(n)
    f = VectorField(n, lambda x: -(x + x ** 3), jacobian_fn=lambda x: -np.diag(1.0 + 3.0 * x ** 2),
                    gradient_field=True,
                    potential_fn=lambda x: float(0.5 * x @ x + 0.25 * np.sum(x ** 4)),
                    name="gradient_quartic")
    return f, {"lambda0": {"theorem4": 2.0, "theorem5": 1.0}}


def _degenerate_projection():
    # f vanishes on the x2 axis; kept only to exercise the condition (ii) checks
    P = np.diag([-1.0, 0.0])
    f = VectorField(2, lambda x: P @ x, jacobian_fn=lambda x: P, gradient_field=True,
                    potential_fn=lambda x: 0.5 * float(x[0] ** 2), nonvanishing=False,
                    name="degenerate_projection")
    return f, {"lambda0": {"theorem4": 2.0, "theorem5": 1.0}}


CATALOG = {
    "linear_contraction": _linear_contraction,
    "rotation_contraction": _rotation_contraction,
    "quadratic_gradient": _quadratic_gradient,
    "scalar_cubic": _scalar_cubic,
    "gradient_quartic": _gradient_quartic,
    "degenerate_projection": _degenerate_projection,
}


def catalog_get(name, **params):
    """Build a catalog entry by name; keyword params override the defaults."""
    try:
        factory = CATALOG[name]
    except KeyError:
        raise UnknownSystemError(f"unknown system {name!r}; known: {', '.join(sorted(CATALOG))}",
                                 module="field_core") from None
    try:
        f, known = factory(**params)
    except TypeError as exc:
        raise InputError(f"bad parameters for {name}: {exc}", module="field_core") from None
    return CatalogEntry(name, f, known, dict(params))


def parse_keyvals(text):
    """Parse ``k=v,k2=v2`` where a bare token extends the previous value into a list.

    ``q=1,4,n=2`` gives ``{"q": [1.0, 4.0], "n": 2.0}``.
    """
    out = {}
    key = None
    if not text:
        return out
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if "=" in tok:
            key, val = tok.split("=", 1)
            key = key.strip()
            out[key] = [_number(val, key)]
        elif key is None:
            raise InputError(f"value {tok!r} has no key", module="field_core")
        else:
            out[key].append(_number(tok, key))
    return {k: v[0] if len(v) == 1 else v for k, v in out.items()}


def _number(text, key):
    try:
        return float(text)
    except ValueError:
        raise InputError(f"value for {key!r} is not a number: {text!r}", module="field_core") from None


def _fmt(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(_fmt(x) for x in v)
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


def format_system_spec(name, params):
    if not params:
        return name
    return name + ":" + ",".join(f"{k}={_fmt(v)}" for k, v in sorted(params.items()))


def parse_system_spec(text):
    """``name[:k=v,...]`` to a CatalogEntry."""
    name, _, rest = text.partition(":")
    params = parse_keyvals(rest)
    for key in ("n",):
        if key in params:
            params[key] = int(params[key])
    return catalog_get(name.strip(), **params)
