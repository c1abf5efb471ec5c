from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from liekit import liealg as la
from liekit.liealg import PolyVectorField as PVF


def f1(*comps):
    return PVF.from_exprs(list(comps), ("x",))


def f2(*comps):
    return PVF.from_exprs(list(comps), ("x", "y"))


def test_bracket_basic():
    assert la.bracket(f1("1"), f1("x")) == f1("1")
    assert la.bracket(f1("x"), f1("x^2")) == f1("x^2")
    assert la.bracket(f1("1"), f1("x^2")) == f1("2*x")
    assert la.bracket(f1("x^2"), f1("x^3")) == f1("x^4")


def test_rational_fields():
    # [x^-1 dx, x dx] = 2 x^-1 dx
    assert la.bracket(f1("1/x"), f1("x")) == f1("2/x")
    X = f2("y/(1 + x^2)", "0")
    Y = f2("0", "x")
    lhs = la.bracket(X, Y)
    pt = np.array([0.4, -1.3])
    # numeric check against the coordinate formula
    want = np.array([-pt[0] / (1 + pt[0] ** 2), pt[1] / (1 + pt[0] ** 2)])
    assert np.allclose(lhs(pt), want)


def test_fractional_exponents():
    X = f1("x^(1/2)")
    assert la.bracket(X, f1("x")) == f1("0.5*x^(1/2)")


def test_from_exprs_rejects_t():
    with pytest.raises(Exception):
        f1("t*x")


_coef = st.integers(-3, 3)
_poly2 = st.lists(st.tuples(_coef, st.integers(0, 2), st.integers(0, 2)),
                  min_size=1, max_size=3)


def _field(terms_x, terms_y):
    def src(terms):
        return " + ".join(f"{c}*x^{i}*y^{j}" for c, i, j in terms)
    return f2(src(terms_x), src(terms_y))


fields2 = st.builds(_field, _poly2, _poly2)


@given(fields2, fields2)
def test_antisymmetry(X, Y):
    assert la.lincomb([1, 1], [la.bracket(X, Y), la.bracket(Y, X)]).is_zero()


@given(fields2, fields2, fields2)
def test_jacobi(X, Y, Z):
    j = la.lincomb([1, 1, 1], [la.bracket(X, la.bracket(Y, Z)),
                               la.bracket(Y, la.bracket(Z, X)),
                               la.bracket(Z, la.bracket(X, Y))])
    assert j.is_zero()


@given(fields2, fields2, st.floats(-2, 2), st.floats(-2, 2))
def test_bracket_matches_numeric_jacobians(X, Y, a, b):
    p = np.array([a, b])
    h = 1e-6

    def jac(F):
        return np.column_stack([(F(p + h * e) - F(p - h * e)) / (2 * h) for e in np.eye(2)])
    want = jac(Y) @ X(p) - jac(X) @ Y(p)
    got = la.bracket(X, Y)(p)
    assert np.allclose(got, want, atol=1e-5 * (1 + np.abs(want).max()))


def test_rank_and_span():
    gens = [f1("1"), f1("x"), f1("x^2")]
    assert la.rank(gens) == 3
    assert la.rank(gens + [f1("2 - x + 3*x^2")]) == 3
    assert la.in_span(f1("x - 1"), gens)
    assert not la.in_span(f1("x^3"), gens)


def test_closure_finite_and_capped():
    res = la.lie_closure([f1("1"), f1("x^2")])
    assert res.status == "finite" and res.dimension == 3
    res = la.lie_closure([f1("x^2"), f1("x^3")], cap=10)
    assert res.status == "exceeded-cap" and not res.finite
    assert res.dimension == 10


def test_closure_cap_argument():
    with pytest.raises(ValueError):
        la.lie_closure([f1("1"), f1("x"), f1("x^2")], cap=2)


def test_prolongation():
    P = la.diagonal_prolongation(f1("x^2"), 3)
    assert P.dim == 3
    assert np.allclose(P(np.array([1.0, 2.0, 3.0])), [1, 4, 9])


def test_minimal_m_presets():
    p = la.presets()
    assert la.minimal_m(p["riccati"][0]) == 3
    assert la.minimal_m(p["linear2"][0]) == 2
    assert la.minimal_m(p["affine2"][0]) == 3
    with pytest.raises(la.NoMFound):
        la.minimal_m([f1("1"), f1("x"), f1("x^2"), f1("x^3")], max_m=3)
    assert la.minimal_m([f1("1"), f1("x"), f1("x^2"), f1("x^3")]) == 4


@pytest.mark.parametrize("name", ["riccati", "painleve", "tdho", "ermakov"])
def test_preset_tables_exact(name):
    fields, table = la.presets()[name]
    c = la.table_to_constants(len(fields), table)
    assert la.verify_structure_constants(fields, c) == 0


def test_wrong_table_detected():
    fields, table = la.presets()["riccati"]
    bad = dict(table)
    bad[(1, 3)] = {2: Fraction(3)}
    assert la.verify_structure_constants(fields, la.table_to_constants(3, bad)) > 0
