import numpy as np
import pytest
from hypothesis import given, strategies as st

from fxts.errors import ContractError, InputError, NumericError, UnknownSystemError
from fxts.field_core import (VectorField, catalog_get, evaluate, fd_jacobian, format_system_spec,
                             jacobian, line_integral, parse_keyvals, parse_system_spec, potential)

GRADIENT_ENTRIES = ["linear_contraction", "quadratic_gradient", "scalar_cubic", "gradient_quartic"]


def test_evaluate_linear_contraction():
    f = catalog_get("linear_contraction").field
    assert np.array_equal(evaluate(f, [3.0, 4.0]), [-3.0, -4.0])


@pytest.mark.parametrize("name", ["linear_contraction", "rotation_contraction", "quadratic_gradient",
                                  "scalar_cubic", "gradient_quartic"])
def test_evaluate_origin_is_exact_zero(name):
    f = catalog_get(name).field
    out = evaluate(f, np.zeros(f.dimension))
    assert np.array_equal(out, np.zeros(f.dimension))
    # snap inside the equilibrium ball too
    x = np.full(f.dimension, 1e-13 / np.sqrt(f.dimension))
    assert np.array_equal(evaluate(f, x), np.zeros(f.dimension))


def test_evaluate_rotation_contraction():
    f = catalog_get("rotation_contraction").field
    assert np.allclose(evaluate(f, [1.0, 0.0]), [-1.0, -1.0], atol=0)


def test_evaluate_dimension_mismatch():
    f = catalog_get("linear_contraction").field
    with pytest.raises(InputError):
        evaluate(f, [1.0, 2.0, 3.0])


def test_jacobian_examples():
    f = catalog_get("linear_contraction").field
    assert np.array_equal(jacobian(f, [0.3, 2.0]), -np.eye(2))
    q = catalog_get("quadratic_gradient").field
    assert np.array_equal(jacobian(q, [1.0, 1.0]), -np.diag([1.0, 4.0]))


def test_fd_matches_analytic_on_rotation():
    f = catalog_get("rotation_contraction").field
    x = np.array([0.3, -0.7])
    J_fd = fd_jacobian(f.evaluator, x, 1e-5)
    assert np.max(np.abs(J_fd - jacobian(f, x))) < 1e-8


def test_fd_mode_used_without_analytic():
    f = VectorField(2, lambda x: -x, name="plain")
    assert f.jacobian_mode == "finite_difference"
    assert np.allclose(jacobian(f, [1.0, 2.0]), -np.eye(2), atol=1e-8)
    with pytest.raises(InputError):
        jacobian(f, [0.0, 0.0])


def test_jacobian_non_finite_is_numeric_error():
    f = VectorField(1, lambda x: np.exp(x ** 2), name="blowup")
    with pytest.raises(NumericError):
        jacobian(f, [30.0])


@pytest.mark.parametrize("name", ["scalar_cubic", "gradient_quartic"])
def test_fd_jacobian_second_order(name):
    # halving h cuts the error by about 4 on nonlinear fields
    f = catalog_get(name).field
    rng = np.random.default_rng(1)
    for _ in range(20):
        d = rng.standard_normal(f.dimension)
        x = d / np.linalg.norm(d) * 10 ** rng.uniform(-1, 1)
        h = 1e-2 * np.linalg.norm(x)
        exact = f.jacobian_fn(x)
        e1 = np.max(np.abs(fd_jacobian(f.evaluator, x, h) - exact))
        e2 = np.max(np.abs(fd_jacobian(f.evaluator, x, h / 2) - exact))
        assert e2 * 3 <= e1


@pytest.mark.parametrize("name", GRADIENT_ENTRIES)
def test_gradient_fields_have_symmetric_jacobian(name):
    f = catalog_get(name).field
    rng = np.random.default_rng(2)
    for _ in range(100):
        d = rng.standard_normal(f.dimension)
        x = d / np.linalg.norm(d) * rng.uniform(1e-3, 1)
        J = fd_jacobian(f.evaluator, x, 1e-6)
        assert np.max(np.abs(J - J.T)) < 1e-7


def test_potential_examples():
    q = catalog_get("quadratic_gradient").field
    assert potential(q, [1.0, 1.0]) == pytest.approx(2.5, rel=1e-12)
    assert potential(q, [0.0, 0.0]) == 0.0
    a = potential(q, [2.0, -1.0], "straight_line")
    b = potential(q, [2.0, -1.0], "axis_aligned")
    assert abs(a - b) < 1e-8


def test_potential_contract_and_negative_detector():
    rot = catalog_get("rotation_contraction").field
    with pytest.raises(ContractError):
        potential(rot, [1.0, 1.0])
    a = line_integral(rot, [1.0, 1.0], "straight_line")
    b = line_integral(rot, [1.0, 1.0], "axis_aligned")
    assert abs(a - b) > 1e-3


@pytest.mark.parametrize("name", GRADIENT_ENTRIES)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_potential_path_independent(name, xs):
    f = catalog_get(name).field
    x = np.array(xs[: f.dimension])
    a = potential(f, x, "straight_line")
    b = potential(f, x, "axis_aligned")
    assert abs(a - b) <= 1e-8 * max(1.0, abs(a))
    assert a == pytest.approx(f.potential_fn(x), rel=1e-10, abs=1e-12)


def test_catalog_constants():
    assert catalog_get("linear_contraction").known_constants["lambda0"]["theorem4"] == 2.0
    assert catalog_get("quadratic_gradient").known_constants["lambda0"]["theorem5"] == 1.0
    with pytest.raises(UnknownSystemError) as exc:
        catalog_get("no_such_system")
    assert exc.value.code == "field_core.lookup"


def test_system_spec_round_trip():
    assert parse_keyvals("q=1,4,n=2") == {"q": [1.0, 4.0], "n": 2.0}
    e = parse_system_spec("quadratic_gradient:q=1,9")
    assert np.array_equal(jacobian(e.field, [1.0, 1.0]), -np.diag([1.0, 9.0]))
    assert e.spec == "quadratic_gradient:q=1,9"
    assert parse_system_spec(e.spec).spec == e.spec
    assert parse_system_spec("linear_contraction:n=3").field.dimension == 3
    assert format_system_spec("scalar_cubic", {}) == "scalar_cubic"
    with pytest.raises(InputError):
        parse_system_spec("quadratic_gradient:q=x")
    with pytest.raises(InputError):
        parse_system_spec("scalar_cubic:zz=1")
