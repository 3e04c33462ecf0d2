import math

import numpy as np
import pytest

from fuchsmcf import identity_lab as lab
from fuchsmcf.graph_geometry import DiscreteGraph, analytic_fields, constant_graph, sine_graph
from fuchsmcf.hyp_base import FermiChart

L, Y = 2 * math.pi, 1.0
PTS = np.array([[0.3, 0.2], [1.7, -0.6], [4.0, 0.9], [5.9, -0.05]])


@pytest.mark.parametrize("c", [0.0, 0.8])
def test_static_umbilic_at_floor(c):
    for rep in lab.residual_static(constant_graph(c), PTS).values():
        assert rep.max_abs <= 1e-12


def test_static_analytic_sine():
    reps = lab.residual_static(sine_graph(0.2, L, Y), PTS)
    assert set(reps) == set(lab.STATIC_NAMES)
    for rep in reps.values():
        assert rep.max_abs <= 1e-9
        assert rep.mean_abs <= rep.max_abs
        assert rep.points.shape == PTS.shape


def test_static_discrete_convergence():
    ests = lab.static_convergence(lab.discrete_sine_levels(0.2, L, Y, (64, 128, 256)))
    for name, est in ests.items():
        assert est.at_floor or 1.9 <= est.order <= 2.2, (name, est)


def test_first_order_fixture_detected():
    ests = lab.static_convergence(lab.discrete_sine_levels(0.2, L, Y, (64, 128, 256), scheme="forward"))
    assert 0.8 <= ests["eq-u"].order <= 1.2
    assert 0.8 <= ests["grad-theta"].order <= 1.2


def test_constant_discrete_at_floor():
    surfaces = [DiscreteGraph(FermiChart(L, Y, n, n // 2 + 1), np.full((n, n // 2 + 1), 0.4))
                for n in (16, 32, 64)]
    ests = lab.static_convergence(surfaces)
    assert all(e.at_floor and e.label == "at floor" for e in ests.values())


def test_convergence_needs_three_levels():
    with pytest.raises(ValueError):
        lab.convergence_order("x", [(0.1, 1e-3), (0.05, 2.5e-4)])
    est = lab.convergence_order("x", [(0.1, 1e-2), (0.05, 2.5e-3), (0.025, 6.25e-4)])
    assert est.order == pytest.approx(2.0)


def test_dynamic_umbilic():
    reps = lab.residual_dynamic(constant_graph(0.6), 1e-3, PTS)
    assert reps["u-material"].by_level[0][1] <= 1e-10
    assert reps["evo-theta"].max_abs <= 1e-10
    for rep in reps.values():
        assert rep.max_abs <= 1e-9


def test_dynamic_sine_extrapolates():
    reps = lab.residual_dynamic(sine_graph(0.1, L, Y), 1e-3, PTS)
    assert set(reps) == set(lab.DYNAMIC_NAMES)
    for rep in reps.values():
        assert rep.max_abs <= 1e-6
    # the first difference is first order in eps
    raw = [m for _, m in reps["theta-t"].by_level]
    assert raw[0] / raw[1] == pytest.approx(2.0, rel=0.05)


def test_dynamic_requires_analytic():
    D = DiscreteGraph(FermiChart(L, Y, 16, 9), np.zeros((16, 9)))
    with pytest.raises(TypeError):
        lab.residual_dynamic(D, 1e-3)


@pytest.mark.parametrize("c", [0.0, 0.5, 1.3])
def test_umbilic_n_Hn(c):
    f = analytic_fields(constant_graph(c), [0.4], [0.3], "static")
    assert lab.n_Hn_closed(f)[0] == pytest.approx(2 / math.cosh(c) ** 2, abs=1e-9)


def test_appendix_sine():
    reps = lab.residual_appendix(sine_graph(0.2, L, Y), 1e-3, PTS)
    assert reps["n-Hn"].max_abs <= 1e-6
    assert reps["ev-theta-forms"].max_abs <= 1e-9
    assert reps["n-transport"].max_abs <= 1e-6


def test_richardson_removes_two_orders():
    e = np.array([1e-3, 5e-4, 2.5e-4])
    vals = 3.0 * e + 7.0 * e**2
    assert abs(lab.richardson3(*vals)) < 1e-15
