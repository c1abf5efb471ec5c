"""Acceptance criteria 1-10; each test records one PASS/FAIL line."""
import math
import time

import numpy as np

from liekit import exprlang as el
from liekit import groupflow as gf
from liekit import integcond as ic
from liekit import liealg as la
from liekit import quasilie as ql
from liekit import superpose as sp
from liekit.numerics import expm
from liekit.odecore import TDVectorField, integrate


def smooth(rng, lo, hi, amp, pos=False):
    """Random ``c + a sin(w t + p)``; ``pos`` keeps it above ``lo - amp``."""
    c = rng.uniform(lo, hi)
    a = rng.uniform(-amp, amp)
    w = rng.uniform(0.5, 3.0)
    p = rng.uniform(0, 2 * math.pi)
    return f"({c!r} + ({a!r})*sin({w!r}*t + {p!r}))"


def drift(values):
    v = np.asarray(values, dtype=float)
    return float(np.max(np.abs(v - v[0])) / (1 + abs(v[0])))


# 1 -----------------------------------------------------------------------

def test_criterion_01_structure_constants(verdict):
    t0 = time.perf_counter()
    res = {}
    for name in ("riccati", "painleve", "tdho", "ermakov"):
        fields, table = la.presets()[name]
        res[name] = la.verify_structure_constants(fields, la.table_to_constants(len(fields), table))
    n_rel = len(la.PAINLEVE_TABLE)
    dt = time.perf_counter() - t0
    ok = all(v == 0 for v in res.values()) and n_rel == 28 and dt < 1
    verdict(1, ok, f"residuals {res}, {n_rel} sl(3) relations, {dt:.2f}s")
    assert ok


# 2 -----------------------------------------------------------------------

def test_criterion_02_lie_detection(verdict):
    t0 = time.perf_counter()
    f = lambda s: la.PolyVectorField.from_exprs([s], ("x",))  # noqa: E731
    ric = la.lie_closure([f("1"), f("x"), f("x^2")])
    abel = la.lie_closure([f("x^2"), f("x^3")], cap=32)
    dt = time.perf_counter() - t0
    ok = (ric.status == "finite" and ric.dimension == 3
          and abel.status == "exceeded-cap" and dt < 1)
    verdict(2, ok, f"riccati dim {ric.dimension}, abel {abel.status}, {dt:.2f}s")
    assert ok


# 3 -----------------------------------------------------------------------

def test_criterion_03_minimal_m(verdict):
    t0 = time.perf_counter()
    p = la.presets()
    want = {"riccati": 3, "linear2": 2, "affine2": 3}
    got = {k: la.minimal_m(p[k][0]) for k in want}
    lie = all(len(p[k][0]) <= got[k] * p[k][0][0].dim for k in want)
    dt = time.perf_counter() - t0
    ok = got == want and lie and dt < 5
    verdict(3, ok, f"m = {got}, dim V <= m n: {lie}, {dt:.2f}s")
    assert ok


# 4 -----------------------------------------------------------------------

def _instances(family, seed):
    rng = np.random.default_rng(1000 + seed)
    if family == "riccati":
        b = [smooth(rng, -0.25, 0.25, 0.2) for _ in range(3)]
        return sp.get_rule("riccati"), sp.riccati_system(*b), None, False
    if family == "linear":
        n = 1 + seed % 3
        A = [[smooth(rng, -0.5, 0.5, 0.4) for _ in range(n)] for _ in range(n)]
        return sp.get_rule("linear", n=n), sp.linear_system(A), None, False
    if family == "affine":
        n = 1 + seed % 2
        A = [[smooth(rng, -0.5, 0.5, 0.4) for _ in range(n)] for _ in range(n)]
        b = [smooth(rng, -0.5, 0.5, 0.4) for _ in range(n)]
        return sp.get_rule("affine", n=n), sp.affine_system(A, b), None, False
    if family in ("pinney.sr4", "pinney.classic"):
        w = smooth(rng, 0.6, 1.2, 0.3)
        k = rng.uniform(0.5, 2.0)
        psys = sp.harmonic_system(w) if family == "pinney.classic" else None
        return sp.get_rule(family, k=k), sp.milne_pinney_system(w, k), psys, True
    if family == "pinney.mixed":
        w = smooth(rng, 0.3, 0.6, 0.2)
        k = rng.uniform(0.5, 2.0)
        return (sp.get_rule("pinney.mixed", k=k), sp.milne_pinney_system(w, k),
                sp.riccati_unit_system(w), False)
    if family == "rule.abel":
        b = smooth(rng, -0.1, 0.1, 0.05)
        return ql.get_rule("rule.abel"), ql.abel_family_system(b), None, False
    if family == "rule.dismp-family":
        F = f"({rng.uniform(-0.3, 0.3)!r})*t + ({rng.uniform(-0.2, 0.2)!r})*sin(t)"
        w = smooth(rng, 0.5, 1.0, 0.3)
        return (ql.get_rule("rule.dismp-family", F=F), ql.dismp_family_system(F, w),
                None, True)
    raise KeyError(family)


FAMILIES = ("riccati", "linear", "affine", "pinney.sr4", "pinney.classic",
            "pinney.mixed", "rule.abel", "rule.dismp-family")


def test_criterion_04_superposition_reproduction(verdict):
    t0 = time.perf_counter()
    worst, failures = {}, {}
    for fam in FAMILIES:
        worst[fam], failures[fam] = 0.0, 0
        for seed in range(20):
            rule, system, psys, cont = _instances(fam, seed)
            try:
                rep = sp.verify_rule(rule, system, trials=1, horizon=1.0, tol=1e-11,
                                     seed=seed, particular_system=psys, continuation=cont)
            except sp.Inadmissible:
                failures[fam] += 1
                continue
            failures[fam] += len(rep.failures)
            worst[fam] = max(worst[fam], rep.max_error)
    dt = time.perf_counter() - t0
    ok = all(v <= 1e-5 for v in worst.values()) and not any(failures.values()) and dt < 60
    summary = ", ".join(f"{k} {worst[k]:.1e}" for k in FAMILIES)
    verdict(4, ok, f"max rel error {summary}; aborted {sum(failures.values())}; {dt:.1f}s")
    assert ok


# 5 -----------------------------------------------------------------------

def _inv_ermakov_lewis():
    tr = integrate(sp.ermakov_system("1 + 0.5*sin(t)", 1.3), [1.0, 0.5, 0.0, 0.3], 0, 2, 1e-10)
    return drift([sp.ermakov_lewis(*y, 1.3) for y in tr.y])


def _inv_pinney():
    k = 1.0
    mp = sp.milne_pinney_system("1 + 0.3*cos(2*t)", k)
    tr = integrate(lambda t, y: np.concatenate([mp(t, y[0:2]), mp(t, y[2:4]), mp(t, y[4:6])]),
                   [1.0, 0.2, 0.8, -0.3, 1.3, 0.1], 0, 2, 1e-10)
    I1 = [sp.pinney_invariant(y[0], y[1], y[4], y[5], k) for y in tr.y]
    I2 = [sp.pinney_invariant(y[2], y[3], y[4], y[5], k) for y in tr.y]
    I3 = [sp.pinney_I3(y[0], y[2], y[1], y[3], k) for y in tr.y]
    return max(drift(I1), drift(I2), drift(I3))


def _inv_generalized_ermakov():
    k = 0.8

    def rhs(t, s):
        x, y, vx, vy = s
        w = 1 + 0.4 * math.sin(t)
        return np.array([vx, vy, -w * x + k / x ** 3, -w * y + k / y ** 3])
    tr = integrate(rhs, [1.0, 1.3, 0.1, -0.2], 0, 2, 1e-10)
    return drift([sp.generalized_ermakov(str(k), str(k), y) for y in tr.y])


def _inv_tdho():
    u1, u0, w = 0.5, 1.0, 0.3
    tr = integrate(lambda t, y: np.array([y[1], -w * w * (u1 * t + u0) ** -4 * y[0]]),
                   [0.1, 0.3], 0, 2, 1e-10)
    I = np.array([ic.tdho_invariants(u1, u0, w, t, *y) for t, y in zip(tr.t, tr.y)])
    return max(drift(I[:, 0]), drift(I[:, 1]))


def _inv_tdho_2d():
    u1, u0, w1, w2 = 0.5, 1.0, 0.6, 0.3

    def rhs(t, s):
        V4 = (u1 * t + u0) ** -4
        return np.array([s[2], s[3], -w1 * w1 * V4 * s[0], -w2 * w2 * V4 * s[1]])
    tr = integrate(rhs, [0.05, 0.1, 0.4, 0.3], 0, 2, 1e-10)
    inv = [ic.tdho_2d_invariants(u1, u0, w1, w2, t, y) for t, y in zip(tr.t, tr.y)]
    assert all(i.well_defined for i in inv)
    return max(drift([i.I1 for i in inv]), drift([i.I2 for i in inv]),
               drift([i.I12 for i in inv]))


def _inv_emden():
    I = ql.emden_reduce("-2/t", "-1", 5, "(2*t)^(-0.5)", (0.5, 2.5))
    tr = integrate(ql.emden_system("-2/t", "-1", 5), [0.7, 0.1], 0.5, 2.5, 1e-10)
    return drift([I(t, *y) for t, y in zip(tr.t, tr.y)])


def _inv_ml():
    m = ql.mathews_lakshmanan("-0.1", 0.7, omega="-exp(-0.2*t)", interval=(0, 2))
    assert m["holds"]
    tr = integrate(ql.ml_system("-0.1", 0.7, "-exp(-0.2*t)"), [0.3, 0.2], 0, 2, 1e-10)
    return drift([m["invariant"](t, *y) for t, y in zip(tr.t, tr.y)])


def _inv_perelomov():
    w, n, c0 = 0.6, 3, -0.8
    p = ql.perelomov_reduce(f"-{w * w!r}", f"{c0}*cos({w}*t)^(-{n + 3})", n,
                            interval=(0, 2), gamma1=f"cos({w}*t)")
    assert p["holds"]
    out = []
    for ic0 in ([0.3, 1.5], [0.2, -0.8]):
        tr = integrate(p["system"], ic0, 0, 2, 1e-10)
        out.append(drift([p["invariant"](t, *y) for t, y in zip(tr.t, tr.y)]))
    return max(out)


INVARIANTS = {
    "ermakov-lewis": _inv_ermakov_lewis, "pinney I1/I2/I3": _inv_pinney,
    "generalized ermakov": _inv_generalized_ermakov, "tdho": _inv_tdho,
    "tdho-2d": _inv_tdho_2d, "emden": _inv_emden, "mathews-lakshmanan": _inv_ml,
    "perelomov I1/I2": _inv_perelomov,
}


def test_criterion_05_invariant_conservation(verdict):
    t0 = time.perf_counter()
    d = {k: f() for k, f in INVARIANTS.items()}
    dt = time.perf_counter() - t0
    ok = all(v <= 1e-6 for v in d.values()) and dt < 30
    verdict(5, ok, ", ".join(f"{k} {v:.1e}" for k, v in d.items()) + f"; {dt:.1f}s")
    assert ok


# 6 -----------------------------------------------------------------------

def test_criterion_06_wei_norman(verdict):
    t0 = time.perf_counter()
    wn = 0.0
    for seed in range(20):
        rng = np.random.default_rng(2000 + seed)
        bs = [smooth(rng, -0.6, 0.6, 0.4) for _ in range(3)]
        gt = gf.solve_group_equation(gf.preset("sl2r.a1a2a3", bs), 1.0, 1e-12)
        v = gf.wei_norman_sl2(*bs, 1.0, 1e-12)
        wn = max(wn, float(np.abs(gf.wei_norman_product(v.final) - gt.final).max()))
    b = (0.3, -0.7, 1.1)
    E = expm(-sum(c * m for c, m in zip(b, gf.SL2_BASIS)))
    gt = gf.solve_group_equation(gf.preset("sl2r.a1a2a3", b), 1.0, 1e-12)
    v = gf.wei_norman_sl2(*map(repr, b), 1.0, 1e-12)
    const = max(float(np.abs(gt.final - E).max()),
                float(np.abs(gf.wei_norman_product(v.final) - E).max()))
    ck = gf.wei_norman_quadratic(["exp(3*t)", "0", "exp(-3*t)", "0", "0", "0"], 1.0, 1e-12)
    ck_err = float(np.abs(ck.final[:3] - gf.caldirola_kanai_closed(1.0, 3.0, 1.0, 1.0)).max())
    tk = gf.wei_norman_quadratic(["1", "0", "0.16/(t + 1)^2", "0", "0", "0"], 1.0, 1e-12)
    tk_err = float(np.abs(tk.final[:3] - gf.tplusk_closed(1.0, 0.4, 1.0, 1.0)).max())
    dt = time.perf_counter() - t0
    ok = wn <= 1e-7 and const <= 1e-9 and ck_err <= 1e-8 and tk_err <= 1e-8 and dt < 20
    verdict(6, ok, f"WN vs matrix {wn:.1e}, constant vs expm {const:.1e}, "
                   f"Caldirola-Kanai {ck_err:.1e}, (t+k)^-2 {tk_err:.1e}; {dt:.1f}s")
    assert ok


# 7 -----------------------------------------------------------------------

def test_criterion_07_riccati_integrability(verdict):
    t0 = time.perf_counter()
    C = 0.7
    rep = ic.riccati_constant_K(ic.RiccatiCoefficients("exp(t)", f"{C}*exp(t)", "exp(t)"))
    allen = rep.holds and abs(rep.witness - C) < 1e-12
    n, K = 2, 1.0
    f1, f2, f3 = ic.hovy_system(n).funcs()
    resid = 0.0
    for t in np.linspace(0.5, 3.0, 101):
        G = ic.upper_incomplete_gamma(n + 1, t) + K
        g = math.exp(-t) * t ** n
        dg = math.exp(-t) * (n * t ** (n - 1) - t ** n)
        x = 1 - g / G
        dx = -dg / G - g * g / (G * G)
        resid = max(resid, abs(dx - (f1(t) + f2(t) * x + f3(t) * x * x)))
    rc = ic.RiccatiCoefficients("exp(t)", "1.5", "2*exp(-t)")
    c = (1.0, 0.5, 2.0)
    tu = ic.riccati_transform_TU(rc, *c)
    Gf = el.lambdify(tu.details["G"], ["t"])
    b = rc.funcs()
    x0 = -2.0
    tr = integrate(lambda t, y: np.array([b[0](t) + b[1](t) * y[0] + b[2](t) * y[0] ** 2]),
                   [x0], 0, 1, 1e-12)
    rt = max(abs(ic.solve_canonical(tu.details["D"], c, Gf(0) * x0, 0, t) / Gf(t) - y[0])
             for t, y in zip(tr.t, tr.y))
    dt = time.perf_counter() - t0
    ok = allen and resid <= 1e-7 and tu.holds and rt <= 1e-6 and dt < 10
    verdict(7, ok, f"Allen-Stein K={rep.witness:.12g}, Hovy residual {resid:.1e}, "
                   f"TU round trip {rt:.1e}; {dt:.1f}s")
    assert ok


# 8 -----------------------------------------------------------------------

def test_criterion_08_spin(verdict):
    t0 = time.perf_counter()
    B, th, w = 1.0, 1.0, 0.7
    bx, by, bz = ic.spin_field(repr(B), repr(th), f"{w!r}*t")
    psi0 = np.array([0.6, 0.8j])
    gt = gf.solve_group_equation(gf.preset("su2.v1v2v3", (bx, by, bz)), 1.0, tol=1e-12)
    states = np.array([U @ psi0 for U in gt.A])
    norm = float(np.abs(np.linalg.norm(states, axis=1) - 1).max())
    fid = min(abs(np.vdot(ic.spin_rotating_solution(B, th, w, 1.0, psi0, br), states[-1])) ** 2
              for br in (1, -1))
    closed_norm = abs(np.linalg.norm(ic.spin_rotating_solution(B, th, w, 1.0, psi0)) - 1)
    fams = [("1", "1", "0.7*t"), ("1", "1.5707963267948966", "0.4*t"), ("2", "0.3", "0")]
    fam_ok = all(ic.spin_condition(*f, interval=(0.1, 1.0)).holds for f in fams)
    neg = not ic.spin_condition("1", "t", "0.2*t", interval=(0.1, 1.0)).holds
    dt = time.perf_counter() - t0
    ok = fid >= 1 - 1e-7 and fam_ok and neg and max(norm, closed_norm) <= 1e-9 and dt < 5
    verdict(8, ok, f"fidelity {fid:.15f}, families {fam_ok}, theta=t rejected {neg}, "
                   f"norm drift {max(norm, closed_norm):.1e}; {dt:.1f}s")
    assert ok


# 9 -----------------------------------------------------------------------

def test_criterion_09_scheme_axioms(verdict):
    t0 = time.perf_counter()
    good = {n: ql.verify_scheme(ql.get_scheme(n)).holds
            for n in ("scheme.emden", "scheme.dismp", "scheme.nlo", "scheme.ml")}
    bad = ql.verify_scheme(ql.get_scheme("scheme.dismp-broken")).holds
    dt = time.perf_counter() - t0
    ok = all(good.values()) and not bad and dt < 1
    verdict(9, ok, f"{good}, negative control holds={bad}; {dt:.2f}s")
    assert ok


# 10 ----------------------------------------------------------------------

def test_criterion_10_rule_equivalence(verdict):
    t0 = time.perf_counter()
    k = 1.5
    ho = sp.harmonic_system("1 + 0.4*sin(t)")
    tr = integrate(lambda t, y: np.concatenate([ho(t, y[:2]), ho(t, y[2:])]),
                   [1.0, 0.2, 0.3, 1.1], 0, 2, 1e-12)
    y1, w1, y2, w2 = tr.y[0]
    W = y1 * w2 - y2 * w1
    C1 = 0.5
    C2 = k * W * W / (4 * C1)
    assert C1 < C2
    i3_err, rule_err = 0.0, 0.0
    I3_want = 4 * (C1 ** 2 + C2 ** 2) / W ** 2
    consts = [(1.0, 1.0), (0.7, 1.4), (2.0, 0.3)]
    for y1, w1, y2, w2 in tr.y:
        s = math.sqrt(2) / abs(W)
        S1, S2 = C1 * y1 * y1 + C2 * y2 * y2, C2 * y1 * y1 + C1 * y2 * y2
        x1, x2 = s * math.sqrt(S1), s * math.sqrt(S2)
        v1 = s * (C1 * y1 * w1 + C2 * y2 * w2) / math.sqrt(S1)
        v2 = s * (C2 * y1 * w1 + C1 * y2 * w2) / math.sqrt(S2)
        I3 = sp.pinney_I3(x1, x2, v1, v2, k)
        i3_err = max(i3_err, abs(I3 - I3_want) / I3_want)
        for k1, k2 in consts:
            mu1, mu2 = C1 * k1 + C2 * k2, C1 * k2 + C2 * k1
            new = sorted(sp.pinney_two_solution_rule(x1, x2, v1, v2, k1, k2, k, b)
                         for b in (1, -1))
            old = sorted(sp.pinney_classic_rule(y1, y2, w1, w2, mu2, mu1, k, b)
                         for b in (1, -1))
            rule_err = max(rule_err, max(abs(a - b) for a, b in zip(new, old)))
    dt = time.perf_counter() - t0
    ok = i3_err <= 1e-8 and rule_err <= 1e-8 and dt < 5
    verdict(10, ok, f"I3 vs 4(C1^2+C2^2)/W^2 {i3_err:.1e}, two-solution vs classic rule {rule_err:.1e}; "
                    f"{dt:.1f}s")
    assert ok


def test_instances_are_deterministic():
    a = _instances("riccati", 3)[1]
    b = _instances("riccati", 3)[1]
    assert [el.to_source(c) for c in a.components] == [el.to_source(c) for c in b.components]
    assert isinstance(a, TDVectorField)
