import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate as si, linalg as sl

from liekit.numerics import Antiderivative, QuadratureError, chebyshev_grid, expm, expm2


@pytest.mark.parametrize("f, a, b, want", [
    (math.sin, 0.0, math.pi, 2.0),
    (math.exp, 0.0, 1.0, math.e - 1),
    (lambda x: 1 / (1 + x * x), -1.0, 1.0, math.pi / 2),
    (lambda x: math.sqrt(x), 0.0, 1.0, 2 / 3),
    (lambda x: math.log(x), 1.0, 2.0, 2 * math.log(2) - 1),
])
def test_quad_closed_forms(f, a, b, want):
    from liekit.numerics import quad
    assert quad(f, a, b) == pytest.approx(want, rel=1e-12, abs=1e-13)


def test_quad_orientation():
    from liekit.numerics import quad
    assert quad(math.cos, 1.0, 0.0) == pytest.approx(-math.sin(1.0), rel=1e-13)
    assert quad(math.cos, 0.5, 0.5) == 0.0


def test_quad_reports_failure():
    from liekit.numerics import quad
    with pytest.raises(QuadratureError):
        quad(lambda x: 1 / x if x else 0.0, 0.0, 1.0, limit=20)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_quad_matches_scipy(a, b):
    from liekit.numerics import quad
    f = lambda x: math.exp(-x * x) * math.cos(3 * x)  # noqa: E731
    ref = si.quad(f, a, b, epsabs=1e-14, epsrel=1e-13)[0]
    assert quad(f, a, b) == pytest.approx(ref, rel=1e-11, abs=1e-13)


@given(st.floats(-4, 4))
def test_antiderivative(t):
    F = Antiderivative(math.cos, anchor=0.3)
    assert F(t) == pytest.approx(math.sin(t) - math.sin(0.3), abs=1e-13)


def test_chebyshev_grid():
    g = chebyshev_grid(1.0, 3.0, 16)
    assert g.size == 16 and np.all(np.diff(g) > 0)
    assert 1.0 < g[0] and g[-1] < 3.0
    assert np.allclose(g + g[::-1], 4.0)


@given(st.lists(st.floats(-3, 3), min_size=9, max_size=9), st.floats(0.1, 8))
def test_expm_matches_scipy(vals, scale):
    A = scale * np.array(vals).reshape(3, 3) / 3
    ref = sl.expm(A)
    assert np.allclose(expm(A), ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max())


def test_expm_complex_and_identities():
    A = np.array([[0, 1j], [1j, 0]]) * 0.8
    assert np.allclose(expm(A), [[math.cos(0.8), 1j * math.sin(0.8)],
                                 [1j * math.sin(0.8), math.cos(0.8)]], atol=1e-15)
    assert np.allclose(expm(np.zeros((3, 3))), np.eye(3), rtol=0, atol=1e-15)


@given(st.lists(st.floats(-4, 4), min_size=3, max_size=3))
def test_expm2_traceless(v):
    a, b, c = v
    A = np.array([[a, b], [c, -a]])
    assert np.allclose(expm2(A), sl.expm(A), rtol=1e-12, atol=1e-12 * np.abs(sl.expm(A)).max())
    assert np.linalg.det(expm2(A)) == pytest.approx(1.0, rel=1e-10)
