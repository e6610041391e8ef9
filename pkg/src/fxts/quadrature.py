"""Gauss-Legendre quadrature helpers.

Two flavours are provided: a fixed composite rule (used for line integrals of
vector fields, where the integrand is smooth and the cost must be
predictable) and a globally adaptive bisection scheme for the settling-time
integrals, which report an achieved error estimate.
"""

import heapq
from functools import lru_cache

import numpy as np

from .errors import QuadratureError


@lru_cache(maxsize=None)
def gauss_legendre(order):
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def composite_nodes(a, b, order=16, panels=64):
    """Nodes and weights of the composite rule on [a, b]."""
    x, w = gauss_legendre(order)
    edges = np.linspace(a, b, panels + 1)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + h[:, None] * x[None, :]).ravel()
    weights = (h[:, None] * w[None, :]).ravel()
    return nodes, weights


def _panel(fn, a, b, x, w):
    h = b - a
    vals = np.asarray(fn(a + h * x), dtype=float)
    return h * np.dot(w, vals)


def adaptive_gauss(fn, a, b, rtol=1e-12, atol=0.0, order=15, max_intervals=4000,
                   module="settling_bounds"):
    """Integrate a vectorised scalar function on [a, b] by global bisection.

    Each interval is estimated with an ``order``-point rule and with the sum
    of the same rule on its two halves; the difference is the interval error.
    The interval with the largest error is split until the summed error
    drops below ``max(atol, rtol * |value|)``.

    Returns ``(value, error_estimate)``. Raises QuadratureError when the
    budget of intervals is exhausted, which is what happens when the
    integrand still has a non-integrable or badly resolved singularity.
    """
    if a == b:
        return 0.0, 0.0
    x, w = gauss_legendre(order)

    def estimate(lo, hi):
        mid = 0.5 * (lo + hi)
        whole = _panel(fn, lo, hi, x, w)
        fine = _panel(fn, lo, mid, x, w) + _panel(fn, mid, hi, x, w)
        return fine, abs(fine - whole)

    total, err_total = estimate(a, b)
    heap = [(-err_total, a, b, total)]
    n = 1
    while True:
        if not np.isfinite(total):
            raise QuadratureError("integrand produced non-finite values", module=module,
                                  interval=[float(a), float(b)])
        if err_total <= max(atol, rtol * abs(total)):
            return float(total), float(err_total)
        if n >= max_intervals:
            raise QuadratureError(
                "adaptive quadrature did not converge; the integrand is probably "
                "singular after substitution", module=module,
                estimate=float(total), error=float(err_total))
        neg_err, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        fl, el = estimate(lo, mid)
        fr, er = estimate(mid, hi)
        total += fl + fr - val
        err_total += el + er + neg_err
        heapq.heappush(heap, (-el, lo, mid, fl))
        heapq.heappush(heap, (-er, mid, hi, fr))
        n += 1
