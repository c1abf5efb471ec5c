import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from liekit import exprlang as el
from liekit import groupflow as gf
from liekit.numerics import expm
from liekit.odecore import integrate
from liekit.superpose import INFINITY


def test_basis_tables_exact():
    assert gf.structure_residual(gf.SL2_BASIS, gf.SL2_TABLE) < 1e-15
    assert gf.structure_residual(gf.SU2_BASIS, gf.SU2_TABLE) < 1e-15
    eq = gf.preset("sl3r.painleve", ["1"] * 8)
    assert gf.structure_residual(eq.basis, eq.constants) < 1e-13


def test_unknown_preset():
    with pytest.raises(KeyError):
        gf.preset("so3", [])


@given(st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=3))
def test_constant_coefficients_match_expm(b):
    gt = gf.solve_group_equation(gf.preset("sl2r.a1a2a3", b), 1.0, 1e-12)
    E = expm(-sum(c * m for c, m in zip(b, gf.SL2_BASIS)))
    assert np.abs(gt.final - E).max() < 1e-9 * (1 + np.abs(E).max())
    assert gt.residuals.max() < 1e-10


def test_su2_is_unitary():
    gt = gf.solve_group_equation(gf.preset("su2.v1v2v3", ["cos(t)", "0.3", "t"]), 2.0, 1e-11)
    U = gt.final
    assert np.abs(U.conj().T @ U - np.eye(2)).max() < 1e-12
    assert abs(np.linalg.det(U) - 1) < 1e-12


def test_at_refuses_off_mesh():
    gt = gf.solve_group_equation(gf.preset("sl2r.a1a2a3", ["1", "0", "1"]), 1.0)
    assert np.array_equal(gt.at(1.0), gt.final)
    with pytest.raises(ValueError):
        gt.at(0.123456789)


def test_mobius_extended_line():
    A = np.array([[1.0, 2.0], [1.0, -1.0]])
    assert gf.mobius(A, 1.0) is INFINITY
    assert gf.mobius(A, INFINITY) == 1.0
    assert gf.mobius(np.eye(2), INFINITY) is INFINITY
    assert gf.act("SL2R", A, 0.0) == -2.0
    assert np.allclose(gf.act("SL2R", A, [1.0, 1.0]), [3.0, 0.0])
    with pytest.raises(KeyError):
        gf.act("torus", A, 0.0)


def test_riccati_through_pole():
    flow, gt = gf.riccati_via_group("1", "0", "1", 2.0, 1e-12)
    for i, t in enumerate(gt.t):
        if abs(t - math.pi / 2) > 1e-3:
            want = math.tan(t)
            assert abs(flow(i, 0.0) - want) <= 1e-9 * max(1, abs(want))


@pytest.mark.parametrize("bs", [("1 + 0.5*sin(t)", "0.3*t", "cos(2*t)"),
                                ("exp(-t)", "1", "t^2")])
def test_wei_norman_matches_group(bs):
    gt = gf.solve_group_equation(gf.preset("sl2r.a1a2a3", bs), 0.8, 1e-12)
    v = gf.wei_norman_sl2(*bs, 0.8, 1e-12)
    assert np.abs(gf.wei_norman_product(v.final) - gt.final).max() < 1e-9


def test_caldirola_kanai_closed_matches_wn():
    for r, w0 in [(3.0, 1.0), (1.0, 2.0), (2.0, 1.0)]:
        tr = gf.wei_norman_quadratic(
            [f"exp({r}*t)", "0", f"exp(-{r}*t)*{w0}^2", "0", "0", "0"], 0.5, 1e-12)
        assert np.allclose(tr.final[:3], gf.caldirola_kanai_closed(1.0, r, w0, 0.5),
                           rtol=1e-9, atol=1e-10)


@pytest.mark.parametrize("w0", [0.4, 1.0])
def test_tplusk_closed_matches_wn(w0):
    tr = gf.wei_norman_quadratic(["1", "0", f"{w0 ** 2}/(t+1)^2", "0", "0", "0"], 0.5, 1e-12)
    assert np.allclose(tr.final[:3], gf.tplusk_closed(1.0, w0, 1.0, 0.5), rtol=1e-9, atol=1e-10)


def test_tplusk_degenerate():
    with pytest.raises(ValueError):
        gf.tplusk_closed(1.0, 0.5, 1.0, 0.3)


def test_heisenberg_quadratures_closed_form():
    q, e0, e, w, m, t = 1.3, 0.4, 0.7, 2.0, 1.5, 0.9
    v1, v2, v3, v4 = gf.heisenberg_quadratures(str(m), f"{q}*{e0}+{q}*{e}*cos({w}*t)", t)
    V4 = q / (2 * m * w ** 2) * (2 * e + e0 * w * w * t * t - 2 * e * math.cos(w * t))
    V5 = q / w * (e0 * w * t + e * math.sin(w * t))
    V6 = -q * q / (12 * m * w ** 3) * (
        4 * e0 ** 2 * w ** 3 * t ** 3 - 3 * e * (e - 4 * e0) * w * t
        + 3 * e * (4 * e + 2 * e0 * (w * w * t * t - 2) - 3 * e * math.cos(w * t))
        * math.sin(w * t))
    assert (v1, v2, v3, v4) == pytest.approx((t / m, V4, V5, V6), abs=1e-12)


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.4, 0.4))
def test_transform_coefficients_maps_solutions(p, q, x0):
    # t-dependent unit-determinant change (alpha, beta; gamma, delta)
    Abar = (f"exp({p}*t)", f"{q}*t", "0", f"exp(-{p}*t)")
    b = ("1", "0.2*t", "-1")
    nb = gf.transform_coefficients(Abar, b)
    f = [el.lambdify(e, ["t"]) for e in b]
    g = [el.lambdify(e, ["t"]) for e in nb]
    tr = integrate(lambda t, y: np.array([f[0](t) + f[1](t) * y[0] + f[2](t) * y[0] ** 2]),
                   [x0], 0.0, 1.0, 1e-12)
    A = [el.lambdify(el.as_expr(a), ["t"]) for a in Abar]

    def change(t, x):
        return (A[0](t) * x + A[1](t)) / (A[2](t) * x + A[3](t))
    y0 = change(0.0, x0)
    tr2 = integrate(lambda t, y: np.array([g[0](t) + g[1](t) * y[0] + g[2](t) * y[0] ** 2]),
                    [y0], 0.0, 1.0, 1e-12)
    assert tr2.final[0] == pytest.approx(change(1.0, tr.final[0]), abs=1e-8)


def test_transform_coefficients_checks_det():
    with pytest.raises(ValueError):
        gf.transform_coefficients(("2", "0", "0", "1"), ("1", "0", "1"))


def test_sl2_reduction():
    w = "1 + 0.3*sin(t)"
    al = integrate(lambda t, y: np.array([y[1], -(1 + 0.3 * math.sin(t)) * y[0]]),
                   [1, 0], 0, 1.2, 1e-12)
    red = gf.sl2_reduction_oscillator(w, al)
    gt = gf.solve_group_equation(gf.preset("sl2r.a1a2a3", ("1", "0", w)), 1.2, 1e-12)
    assert np.abs(red["reconstruct"](len(al.t) - 1) - gt.final).max() < 1e-6


def test_sl2_reduction_zero_crossing():
    al = integrate(lambda t, y: np.array([y[1], -y[0]]), [1, 0], 0, 2.0, 1e-10)
    with pytest.raises(gf.ZeroCrossing):
        gf.sl2_reduction_oscillator("1", al)


@pytest.mark.parametrize("w2,k,x0,v0", [("1", 1.0, 1.0, 0.0), ("1 + 0.3*sin(t)", 1.0, 1.2, 0.4),
                                        ("0.5", 2.0, 0.8, -0.5)])
def test_milne_pinney_action_matches_flow(w2, k, x0, v0):
    from liekit import superpose as sp
    gt = gf.solve_group_equation(gf.preset("sl2r.a1a2a3", ["1", "0", w2]), 3.0, tol=1e-12)
    tr = integrate(sp.milne_pinney_system(w2, k), [x0, v0], 0, 3, 1e-12)
    err = max(np.max(np.abs(np.array(gf.milne_pinney_action(A, x0, v0, k)) - tr(t)))
              for t, A in zip(gt.t, gt.A))
    assert err < 1e-6


def test_milne_pinney_action_delta_zero_branch():
    k, pt = 1.5, (0.9, 0.3)
    A = np.array([[0.4, 2.0], [-0.5, 0.0]])
    B = np.array([[1.0, 0.3], [0.2, 1.06]])
    B /= math.sqrt(np.linalg.det(B))
    direct = gf.milne_pinney_action(A, *pt, k)
    via = gf.milne_pinney_action(A @ np.linalg.inv(B), *gf.milne_pinney_action(B, *pt, k), k)
    assert np.allclose(direct, via, atol=1e-9)


def _sl2(m):
    M = np.array(m, dtype=float).reshape(2, 2)
    det = np.linalg.det(M)
    if abs(det) < 1e-2:
        return None
    if det < 0:
        M[:, 0] *= -1
    return M / math.sqrt(abs(det))


@given(st.lists(st.floats(-2, 2), min_size=8, max_size=8), st.floats(0.3, 2.0),
       st.floats(-2, 2), st.floats(0.5, 2.0))
def test_milne_pinney_action_is_an_action(entries, x, v, k):
    A, B = _sl2(entries[:4]), _sl2(entries[4:])
    if A is None or B is None:
        return
    direct = np.array(gf.milne_pinney_action(A @ B, x, v, k))
    composed = np.array(gf.milne_pinney_action(A, *gf.milne_pinney_action(B, x, v, k), k))
    assert np.max(np.abs(direct - composed)) <= 1e-6 * (1 + np.max(np.abs(direct)))
