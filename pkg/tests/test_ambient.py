import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuchsmcf import ambient as am

coords = st.tuples(st.floats(-1.5, 1.5), st.floats(0, 6), st.floats(-1.0, 1.0))
vectors = st.tuples(*[st.floats(-2, 2)] * 3).filter(lambda v: max(map(abs, v)) > 0.1)


@settings(max_examples=25, deadline=None)
@given(coords)
def test_christoffel_matches_finite_differences(p):
    assert np.max(np.abs(am.christoffel(p) - am.christoffel_fd(p))) < 1e-6


@pytest.mark.parametrize("p", [(0.0, 0.0, 0.0), (0.7, 1.0, -0.4), (-1.2, 3.0, 0.9)])
def test_constant_curvature(p):
    e = np.eye(3)
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        assert am.sectional_curvature_fd(p, e[i], e[j]) == pytest.approx(-1.0, abs=1e-5)
    ric = am.ricci_fd(p)
    assert np.max(np.abs(ric + 2 * am.ambient_metric(p))) < 1e-4 * max(1, np.max(am.ambient_metric(p)))


@settings(max_examples=30, deadline=None)
@given(coords, vectors)
def test_killing_identity(p, X):
    assert am.killing_residual(p, X) < 1e-12 * max(1.0, am.norm(p, X))


@settings(max_examples=30, deadline=None)
@given(coords, vectors)
def test_nabla_n_two_ways(p, X):
    closed = am.nabla_n(p, X)
    assert abs(am.inner(p, closed, am.N_FIELD)) < 1e-12 * max(1, am.norm(p, X))


def test_levelset_shape():
    assert am.levelset_shape(0.5) == pytest.approx((math.tanh(0.5), 2 * math.tanh(0.5)))
    assert am.levelset_shape(0.0) == (0.0, 0.0)


def test_lie_derivative_two_ways():
    for p in [(0.5, 0.0, 0.0), (-0.3, 2.0, 0.6)]:
        T = am.lie_derivative_ng(p)
        assert T[0, 0] == 0.0
    # d/dr of cosh^2 r at r = 0.5, y = 0 is sinh(1)
    assert am.lie_derivative_ng((0.5, 0.0, 0.0))[1, 1] == pytest.approx(math.sinh(1.0), abs=1e-12)


def test_lie_derivative_arrays_covariant_derivative_fd():
    r, y = 0.4, 0.3
    arr = am.lie_derivative_ng_arrays(np.array(r), np.array(y))
    h = 1e-5
    # (nabla_k T)_ij by differencing T and the Christoffels directly
    G = am.christoffel((r, 0.0, y))
    T = arr["T"]
    for k, e in enumerate(np.eye(3)):
        p_plus = np.array([r, 0.0, y]) + h * e
        p_minus = np.array([r, 0.0, y]) - h * e
        dT = (am.lie_derivative_ng_closed(p_plus) - am.lie_derivative_ng_closed(p_minus)) / (2 * h)
        expect = dT - np.einsum("li,lj->ij", G[:, k, :], T) - np.einsum("lj,il->ij", G[:, k, :], T)
        assert np.max(np.abs(arr["DT"][k] - expect)) < 1e-8


def test_ricci_nu_nu_requires_unit():
    p = (0.2, 0.0, 0.1)
    with pytest.raises(ValueError):
        am.ricci_nu_nu([2.0, 0, 0], p)
    assert am.ricci_nu_nu([1.0, 0, 0], p) == -2.0


def test_consistency_error_raised_for_corrupt_gamma(monkeypatch):
    def bad(p):
        G = np.zeros((3, 3, 3))
        G[1, 0, 1] = 5.0
        return G

    monkeypatch.setattr(am, "christoffel", bad)
    with pytest.raises(am.ConsistencyError):
        am.nabla_n((0.3, 0.0, 0.0), [0.0, 1.0, 0.0])
