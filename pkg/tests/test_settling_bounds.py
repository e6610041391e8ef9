import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate as spi

from fxts.errors import InputError, ParameterError, QuadratureError
from fxts.scaling import compute_c_and_exponents
from fxts.settling_bounds import (PiecewisePhi, PolyakovPhi, PowerPhi, TablePhi, closed_form_bound,
                                  lemma3_bound, parse_phi_spec, phi_admissible, phi_eval,
                                  settling_integral, theorem1_bound, theorem4_bound,
                                  theorem5_bound)

BETA_ORACLE = 0.4 * math.pi / math.sin(math.pi / 5)


def test_phi_eval_examples():
    assert phi_eval(PowerPhi(1, 0.5), 4.0) == 2.0
    assert phi_eval(PolyakovPhi(1, 1, 0.5, 2), 1.0) == 2.0
    assert phi_eval(PowerPhi(1, 0.5), 0.0) == 0.0
    with pytest.raises(InputError):
        phi_eval(PowerPhi(1, 0.5), -1.0)


def test_piecewise_phi_at_one():
    P = compute_c_and_exponents(0.5, -2.0)
    phi = PiecewisePhi(P, 1.0)
    expected = P.c ** (4 / 3) / 2 * 1.5
    assert phi_eval(phi, 1.0) == pytest.approx(expected, rel=1e-14)
    # value is 3.6026; the rounded c = 3.2449 gives the quoted 3.608
    assert phi_eval(phi, 1.0) == pytest.approx(3.608, rel=2e-3)
    assert abs(phi.k_lo - phi.k_hi) < 1e-12 * phi.k_lo
    above = phi_eval(phi, 1.0 + 1e-12)
    assert above == pytest.approx(phi_eval(phi, 1.0), rel=1e-10)


def test_admissibility_examples():
    assert phi_admissible(PowerPhi(1, 0.5)).classification == "finite_time"
    assert phi_admissible(PolyakovPhi(1, 1, 0.5, 2)).classification == "fixed_time"
    r = np.logspace(-8, 8, 33)
    lin = phi_admissible(TablePhi(r, r))
    assert lin.classification == "not_admissible" and lin.finite_time is False


def test_admissibility_witnesses():
    rep = phi_admissible(TablePhi([1e-3, 1.0, 2.0, 3.0], [1e-3, 2.0, 1.5, 4.0]))
    assert rep.classification == "not_admissible" and not rep.monotone
    assert rep.witness is not None and rep.witness[0][1] >= rep.witness[1][1]
    zero = TablePhi([1e-3, 1.0], [0.0, 0.0])
    assert phi_admissible(zero).classification == "not_admissible"


def test_settling_integral_examples():
    b = settling_integral(PowerPhi(1, 0.5), 4.0)
    assert b.value == pytest.approx(4.0, rel=1e-10)
    assert b.kind == "quadrature"
    phi = PolyakovPhi(2, 2, 0.75, 2)
    assert settling_integral(phi, math.inf).value == pytest.approx(BETA_ORACLE, rel=1e-10)
    # V0 = 1 against an independent quadrature of the x-side integral
    oracle, _ = spi.quad(lambda x: 1 / (x ** 0.5 + x ** 3), 0, 1, epsabs=0, epsrel=1e-12)
    got = settling_integral(phi, 1.0).value
    assert got == pytest.approx(oracle, rel=1e-10)
    assert got == pytest.approx(1.7766, abs=1e-4)
    assert settling_integral(phi, 0.0).value == 0.0


def test_settling_integral_diverges_for_power_at_infinity():
    assert settling_integral(PowerPhi(1, 0.5), math.inf).value == math.inf


def test_settling_integral_log_divergence_and_bad_v0():
    r = np.logspace(-8, 8, 33)
    assert settling_integral(TablePhi(r, r), 1.0).value == math.inf
    with pytest.raises(InputError):
        settling_integral(PowerPhi(1, 0.5), -1.0)


def test_wrong_declared_endpoint_exponent_is_quadrature_error():
    # declared p0 far below the true exponent leaves a singular integrand
    with pytest.raises(QuadratureError):
        settling_integral(PowerPhi(1, 0.999, p0=0.01), 1.0)


@given(st.floats(0.5, 2), st.floats(0.1, 0.9), st.floats(1e-2, 1e2))
def test_lemma3_oracle(c, alpha, v0):
    q = settling_integral(PowerPhi(c, alpha), v0).value
    assert q == pytest.approx(lemma3_bound(c, alpha, v0), rel=1e-8)


@given(st.floats(0.2, 5), st.floats(0.2, 5), st.floats(0.1, 0.9), st.floats(1.1, 4))
def test_theorem1_dominates_integral(a, b, p, q):
    phi = PolyakovPhi(a, b, p, q)
    inf_val = settling_integral(phi, math.inf).value
    assert inf_val < theorem1_bound(a, b, p, q)
    # monotone in V0 and converging to the V0 = inf value
    vals = [settling_integral(phi, v).value for v in (0.1, 1.0, 10.0, 1e3)]
    assert all(x < y for x, y in zip(vals, vals[1:]))
    assert vals[-1] < inf_val


@given(st.floats(0.5, 4), st.floats(0.05, 0.95), st.floats(-5, -0.05))
def test_theorem4_consistency(lam, p, q):
    phi = PolyakovPhi(lam, lam, (2 - p) / 2, (2 - q) / 2)
    assert settling_integral(phi, math.inf).value <= theorem4_bound(lam, p, q)


@given(st.floats(0.05, 0.95), st.floats(-5, -0.05), st.floats(0.2, 5))
def test_theorem5_piecewise_integral_matches_bound(a, b, lam):
    P = compute_c_and_exponents(a, b)
    got = settling_integral(PiecewisePhi(P, lam), math.inf).value
    bound = theorem5_bound(lam, P)
    assert got <= bound * (1 + 1e-8)
    # both branches are pure powers, so the integral equals the bound
    assert got == pytest.approx(bound, rel=1e-8)


def test_closed_form_examples():
    assert closed_form_bound("theorem1", a=1, b=1, p=0.5, q=2).value == 3.0
    assert closed_form_bound("lemma3", c=1, alpha=0.5, v0=4).value == 4.0
    assert closed_form_bound("theorem4", lambda0=2, p=0.5, q=-2).value == pytest.approx(2.5, rel=1e-15)
    t5 = closed_form_bound("theorem5", lambda0=1, alpha=0.5, beta=-2)
    assert t5.value == pytest.approx(1.3879019, rel=1e-7)
    assert t5.kind == "closed_form" and t5.formula_id == "theorem5"


@pytest.mark.parametrize("formula,kw", [
    ("theorem1", dict(a=1, b=1, p=1.5, q=2)),
    ("theorem1", dict(a=-1, b=1, p=0.5, q=2)),
    ("theorem1", dict(a=1, b=1, p=0.5, q=0.5)),
    ("lemma3", dict(c=1, alpha=1.0, v0=4)),
    ("theorem4", dict(lambda0=0, p=0.5, q=-2)),
    ("theorem4", dict(lambda0=1, p=0.5, q=1)),
    ("theorem5", dict(lambda0=1, alpha=0.5, beta=2)),
    ("nope", dict()),
])
def test_closed_form_errors(formula, kw):
    with pytest.raises(ParameterError):
        closed_form_bound(formula, **kw)


def test_phi_spec_round_trip():
    for text in ("power:a=1,p=0.5", "polyakov:a=2,b=2,p=0.75,q=2",
                 "theorem5:alpha=0.5,beta=-2,lambda0=1", "theorem5:alpha=0.5,beta=-2,lambda0=1,switch=gain",
                 "table:0.001/0.01,1/1,10/100"):
        phi = parse_phi_spec(text)
        again = parse_phi_spec(phi.spec)
        r = np.logspace(-3, 1, 9)
        assert np.array_equal(phi(r), again(r))
    with pytest.raises(ParameterError):
        parse_phi_spec("cosine:a=1")


def test_table_phi_power_law_matches():
    r = np.logspace(-6, 6, 241)
    tab = TablePhi(r, 2 * r ** 0.5 + r ** 2, p0=0.5)
    ref = PolyakovPhi(2, 1, 0.5, 2)
    a = settling_integral(tab, 1e4).value
    b = settling_integral(ref, 1e4).value
    assert a == pytest.approx(b, rel=1e-3)
