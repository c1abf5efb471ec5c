
import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from liekit import superpose as sp
from liekit.odecore import integrate

vals = st.floats(-3, 3, allow_nan=False)


@given(vals, vals, vals, vals, st.floats(-2, 2), st.floats(0.1, 3), st.floats(-2, 2))
def test_riccati_cross_ratio_invariant_under_mobius(x, x1, x2, x3, a, d, b):
    xs = [x, x1, x2, x3]
    assume(min(abs(p - q) for i, p in enumerate(xs) for q in xs[i + 1:]) > 0.05)
    # x -> (d x + b)/(a' x + 1) with a small pole-free a'
    c = 0.05 * a
    assume(all(abs(c * v + 1) > 0.5 for v in xs))
    m = [(d * v + b) / (c * v + 1) for v in xs]
    k0 = sp.riccati_constant(*xs)
    k1 = sp.riccati_constant(*m)
    assert k1 == pytest.approx(k0, rel=1e-9, abs=1e-9)


@given(vals, vals, vals, vals)
def test_riccati_rule_inverts_constant(x, x1, x2, x3):
    xs = [x, x1, x2, x3]
    assume(min(abs(p - q) for i, p in enumerate(xs) for q in xs[i + 1:]) > 0.05)
    k = sp.riccati_constant(x, x1, x2, x3)
    assert sp.riccati_rule(x1, x2, x3, k) == pytest.approx(x, rel=1e-9, abs=1e-9)


def test_riccati_degenerate():
    assert sp.riccati_rule(0.0, 1.0, 2.0, 0.5) is sp.INFINITY
    assert sp.riccati_constant(sp.INFINITY, 0.0, 1.0, 2.0) == 0.5
    with pytest.raises(sp.SingularConfiguration):
        sp.riccati_rule(1.0, 1.0, 2.0, 0.3)
    with pytest.raises(sp.Inadmissible):
        sp.riccati_constant(1.0, 0.0, 1.0, 2.0)


@given(st.lists(vals, min_size=9, max_size=9), st.lists(vals, min_size=3, max_size=3))
def test_linear_and_affine_round_trip(entries, x):
    sols = [np.array(entries[3 * i:3 * i + 3]) for i in range(3)]
    assume(abs(np.linalg.det(np.column_stack(sols))) > 0.1)
    k = sp.linear_constants(x, sols)
    assert np.allclose(sp.linear_rule(sols, k), x, atol=1e-9)
    base = [np.zeros(3)] + sols
    k = sp.affine_constants(x, base)
    assert np.allclose(sp.affine_rule(base, k), x, atol=1e-9)


def test_linear_dependent():
    with pytest.raises(sp.SingularConfiguration):
        sp.linear_constants([1, 2], [np.array([1.0, 2.0]), np.array([2.0, 4.0])])


pos = st.floats(0.4, 2.0)
vel = st.floats(-1.0, 1.0)


@given(pos, vel, pos, vel, pos, vel, st.floats(0.5, 2.0))
def test_sr4_reproduces_state(x, v, x1, v1, x2, v2, k):
    try:
        k1, k2, br = sp.pinney_sr4_constants(x, v, x1, x2, v1, v2, k)
    except (sp.SingularConfiguration, sp.Inadmissible):
        assume(False)
    assert sp.pinney_two_solution_rule(x1, x2, v1, v2, k1, k2, k, br) == pytest.approx(
        x, rel=1e-7)


@given(pos, vel, st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1),
       st.floats(0.5, 2.0))
def test_classic_reproduces_state(x, v, y1, w1, y2, w2, k):
    assume(abs(y1 * w2 - y2 * w1) > 0.2)
    try:
        I1, I2, br = sp.pinney_classic_constants(x, v, y1, y2, w1, w2, k)
    except sp.Inadmissible:
        assume(False)
    assert sp.pinney_classic_rule(y1, y2, w1, w2, I1, I2, k, br) == pytest.approx(x, rel=1e-7)


@given(pos, vel, st.floats(0.05, 0.45), st.floats(0.05, 0.45), st.floats(0.05, 0.45),
       st.floats(0.5, 2.0))
def test_mixed_reproduces_state(x, v, a, b, c, k):
    assume(min(abs(a - b), abs(a - c), abs(b - c)) > 0.05)
    C1, C2 = sp.pinney_mixed_constants(x, v, a, b, c, k)
    try:
        got = sp.pinney_from_riccati(a, b, c, C1, C2, k)
    except sp.Inadmissible:
        assume(False)
    assert got == pytest.approx(x, rel=1e-7)


def test_pinney_invariant_symmetry():
    a = sp.pinney_invariant(1.1, 0.2, 0.7, -0.4, 1.5)
    assert a == pytest.approx(sp.pinney_invariant(0.7, -0.4, 1.1, 0.2, 1.5), rel=1e-15)
    with pytest.raises(ZeroDivisionError):
        sp.pinney_invariant(0.0, 1.0, 1.0, 1.0, 1.0)


def test_ermakov_lewis_conserved():
    sys_ = sp.ermakov_system("1 + 0.5*sin(t)", 1.0)
    tr = integrate(sys_, [1.0, 0.5, 0.0, 0.3], 0.0, 2.0, 1e-11)
    I = [sp.ermakov_lewis(y[0], y[1], y[2], y[3], 1.0) for y in tr.y]
    assert max(abs(i - I[0]) for i in I) < 1e-8


def test_generalized_ermakov_conserved():
    # x'' = f(y/x)/x^3 - w x, y'' = g(y/x)/y^3 - w y
    def rhs(t, s):
        x, y, vx, vy = s
        om, u = 1 + 0.2 * t, y / x
        return np.array([vx, vy, -om * x + (1 + u * u) / x ** 3, -om * y + 2 / y ** 3])
    tr = integrate(rhs, [1.0, 1.2, 0.1, -0.2], 0.0, 1.0, 1e-11)
    I = [sp.generalized_ermakov("1 + u^2", "2", y) for y in tr.y]
    assert max(abs(i - I[0]) for i in I) < 1e-7 * (1 + abs(I[0]))


def test_get_rule_registry():
    for name in sp.RULE_NAMES:
        r = sp.get_rule(name)
        assert r.name == name
    with pytest.raises(KeyError):
        sp.get_rule("nope")
    assert sp.get_rule("linear", n=3).m == 3
    assert sp.get_rule("affine", n=2).m == 3


def test_verify_rule_report_schema():
    rep = sp.verify_rule(sp.get_rule("riccati"), sp.riccati_system("1", "t", "-1"),
                         trials=3, horizon=0.5, seed=4)
    d = rep.to_dict()
    assert d["trials"] == 3 and len(d["per_trial"]) == 3
    assert rep.passed(1e-6)
    rep2 = sp.verify_rule(sp.get_rule("riccati"), sp.riccati_system("1", "t", "-1"),
                          trials=3, horizon=0.5, seed=4)
    assert rep2.max_error == rep.max_error


def test_verify_rule_detects_wrong_system():
    # the Riccati rule does not hold for a cubic equation
    wrong = sp.TDVectorField(["1 + x1^3"])
    rep = sp.verify_rule(sp.get_rule("riccati"), wrong, trials=3, horizon=0.5)
    assert not rep.passed(1e-5)


def test_sr4_strict_branch_aborts_and_continuation_succeeds():
    sys_ = sp.milne_pinney_system("1 + 0.3*sin(t)", 1.0)
    strict = sp.verify_rule(sp.get_rule("pinney.sr4"), sys_, trials=20)
    cont = sp.verify_rule(sp.get_rule("pinney.sr4"), sys_, trials=20, continuation=True)
    assert len(strict.failures) > 0
    assert not cont.failures and cont.max_error < 1e-6
    assert any((p.get("branch_flips") or 0) > 0 for p in cont.per_trial)


@pytest.mark.parametrize("kind, system", [
    ("linear", sp.harmonic_system("-(1 + t)")),
    ("reciprocal", sp.TDVectorField(["x2", "2*x2^2/x1 + (1 + t)*x1"])),
])
def test_sode_examples(kind, system):
    rule = sp.sode_velocity_free_examples(kind)
    rep = sp.verify_rule(rule, system, trials=5)
    assert rep.passed(1e-7)


def test_all_trials_blowing_up_raises():
    with pytest.raises(sp.Inadmissible):
        sp.verify_rule(sp.get_rule("riccati"), sp.riccati_system("5", "0", "5"),
                       trials=2, horizon=3.0)
