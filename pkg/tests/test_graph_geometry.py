import math

import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuchsmcf import ambient as am
from fuchsmcf.graph_geometry import (
    DegenerateMetricError,
    DiscreteGraph,
    GraphLostError,
    analytic_fields,
    constant_graph,
    discrete_fields,
    discrete_laplacian,
    normal_push,
    sample_geometry,
    sine_graph,
    surface_laplacian,
)
from fuchsmcf.hyp_base import FermiChart

L, Y = 2 * math.pi, 1.0
SINE = sine_graph(0.2, L, Y)


def gram_schmidt_normal(S, x, y, h=1e-5):
    """Unit normal from Gram-Schmidt on (F_x, F_y, d_r), derivatives by central differences."""
    u = float(S.height(x, y))
    ux = float(S.height(x + h, y) - S.height(x - h, y)) / (2 * h)
    uy = float(S.height(x, y + h) - S.height(x, y - h)) / (2 * h)
    p = (u, x, y)
    Fx, Fy, dr = np.array([ux, 1.0, 0]), np.array([uy, 0, 1.0]), np.array([1.0, 0, 0])
    e1 = Fx / am.norm(p, Fx)
    e2 = Fy - am.inner(p, Fy, e1) * e1
    e2 /= am.norm(p, e2)
    v = dr - am.inner(p, dr, e1) * e1 - am.inner(p, dr, e2) * e2
    nu = v / am.norm(p, v)
    return nu, am.inner(p, nu, dr)


@pytest.mark.parametrize("p", [(0.4, 0.3), (2.0, -0.7), (5.5, 0.95)])
def test_theta_matches_gram_schmidt_oracle(p):
    g = sample_geometry(SINE, p)
    nu, theta = gram_schmidt_normal(SINE, *p)
    assert g.theta == pytest.approx(theta, abs=1e-9)
    assert np.max(np.abs(g.nu - nu)) < 1e-9


@pytest.mark.parametrize("c", [0.0, 0.5, -1.2])
def test_umbilic_slice(c):
    g = sample_geometry(constant_graph(c), (1.0, 0.4))
    assert g.theta == 1.0
    assert np.max(np.abs(g.a - math.tanh(c) * g.g)) < 1e-14
    assert g.H == pytest.approx(2 * math.tanh(c), abs=1e-14)
    assert g.A2 == pytest.approx(2 * math.tanh(c) ** 2, abs=1e-14)
    assert g.eta == pytest.approx(math.cosh(c), abs=1e-14)
    assert np.all(g.grad_u == 0)


def test_totally_geodesic_slice():
    g = sample_geometry(constant_graph(0.0), (0.0, 0.0))
    assert g.H == 0 and g.A2 == 0 and g.theta == 1 and g.eta == 1


@settings(max_examples=20, deadline=None)
@given(st.floats(0, L), st.floats(-Y, Y))
def test_pointwise_invariants(x, y):
    g = sample_geometry(SINE, (x, y))
    p = (g.u, x, y)
    assert am.norm(p, g.nu) == pytest.approx(1.0, abs=1e-12)
    assert abs(am.inner(p, g.nu, g.F_x)) < 1e-12 and abs(am.inner(p, g.nu, g.F_y)) < 1e-12
    assert 0 < g.theta <= 1
    assert g.grad_u @ np.array([g.F_x[0], g.F_y[0]]) + g.theta**2 == pytest.approx(1.0, abs=1e-12)
    assert g.kappa.sum() == pytest.approx(g.H, abs=1e-12)
    assert (g.kappa**2).sum() == pytest.approx(g.A2, abs=1e-12)
    assert g.a[0, 1] == g.a[1, 0]


def test_discrete_matches_analytic_at_node():
    chart = FermiChart(L, Y, 128, 65)
    D = DiscreteGraph.from_analytic(SINE, chart)
    p = (chart.x[20], chart.y[40])
    gd, ga = sample_geometry(D, p), sample_geometry(SINE, p)
    assert gd.theta == pytest.approx(ga.theta, abs=1e-3)
    assert gd.H == pytest.approx(ga.H, abs=5e-3)
    with pytest.raises(ValueError):
        sample_geometry(D, (0.001, 0.0))


def test_graph_lost_reported():
    chart = FermiChart(L, Y, 16, 9)
    u = np.zeros((16, 9))
    u[4, 4] = 1e200
    D = DiscreteGraph(chart, u)
    with pytest.raises(GraphLostError) as info, np.errstate(all="ignore"):
        sample_geometry(D, (chart.x[3], chart.y[4]))
    assert info.value.value == 0.0


def test_discrete_rejects_bad_fields():
    chart = FermiChart(L, Y, 16, 9)
    with pytest.raises(ValueError):
        DiscreteGraph(chart, np.full((16, 9), np.nan))
    with pytest.raises(ValueError):
        DiscreteGraph(chart, np.zeros((8, 9)))


def test_laplacian_trivial_cases():
    C = constant_graph(0.6)
    assert surface_laplacian(C, "u", (0.3, 0.2)) == 0.0
    assert surface_laplacian(SINE, lambda x, y, p: 3.0 + 0 * x, (0.3, 0.2)) == 0.0
    chart = FermiChart(L, Y, 32, 17)
    D = DiscreteGraph.from_analytic(SINE, chart)
    assert np.max(np.abs(surface_laplacian(D, np.full((32, 17), 2.0)))) == 0.0


def test_laplacian_flat_slice_is_base_laplacian():
    # on u = 0 the induced metric is g0, so Delta(sin x) = -sin(x) / cosh^2(y)
    val = surface_laplacian(constant_graph(0.0), lambda x, y, p: jnp.sin(x), (0.7, 0.5))
    assert val == pytest.approx(-math.sin(0.7) / math.cosh(0.5) ** 2, abs=1e-12)


def test_degenerate_metric_rejected():
    f = {"det": np.zeros((4, 4))}
    with pytest.raises(DegenerateMetricError):
        discrete_laplacian(f, np.zeros((4, 4)), 0.1, 0.1)


@pytest.mark.parametrize("a0", [0.4, 1.0])
def test_push_of_umbilic_slice(a0):
    eps = 1e-3
    P = normal_push(constant_graph(a0), eps)
    assert float(P.height(1.0, 0.2)) == pytest.approx(a0 - 2 * eps * math.tanh(a0), abs=1e-14)
    chart = FermiChart(L, Y, 16, 9)
    D = DiscreteGraph(chart, np.full((16, 9), a0))
    assert np.max(np.abs(normal_push(D, eps).u - (a0 - 2 * eps * math.tanh(a0)))) < 1e-14


def test_push_zero_step_is_identity():
    assert normal_push(SINE, 0.0) is SINE


def test_discrete_push_matches_analytic():
    eps = 1e-3
    chart = FermiChart(L, Y, 64, 33)
    D = DiscreteGraph.from_analytic(SINE, chart)
    X, Yg = chart.mesh()
    ud = (normal_push(D, eps).u - D.u) / eps
    ua = (normal_push(SINE, eps).height(X[:, 4:-4], Yg[:, 4:-4]) - D.u[:, 4:-4]) / eps
    assert np.max(np.abs(ud[:, 4:-4] - ua)) < 5e-3


def test_push_refuses_steep_surface():
    chart = FermiChart(L, Y, 64, 33)
    X, _ = chart.mesh()
    D = DiscreteGraph(chart, 3.0 * np.sin(8 * X))
    with pytest.raises(GraphLostError):
        normal_push(D, 1e-3)


def test_argmax_theta_is_critical_point_of_u():
    chart = FermiChart(L, Y, 64, 33)
    S = sine_graph(0.2, L, Y, ky=2.0)
    D = DiscreteGraph.from_analytic(S, chart)
    f = discrete_fields(D)
    i, j = np.unravel_index(np.argmax(f["theta"]), f["theta"].shape)
    assert f["theta"][i, j] == pytest.approx(1.0, abs=1e-12)
    assert abs(f["ux"][i, j]) < 1e-12 and abs(f["uy"][i, j]) < 1e-12


def test_analytic_fields_levels():
    out = analytic_fields(SINE, [0.3, 1.0], [0.1, -0.2], "static")
    assert out["lap_u"].shape == (2,)
    with pytest.raises(ValueError):
        analytic_fields(SINE, [0.3], [0.1], "bogus")
