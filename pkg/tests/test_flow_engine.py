import math

import numpy as np
import pytest

from fuchsmcf import flow_engine as fe
from fuchsmcf.comparison_ode import angle_threshold, umbilic_exact
from fuchsmcf.config import RunConfig
from fuchsmcf.graph_geometry import GraphLostError
from fuchsmcf.hyp_base import FermiChart

SMALL = dict(Nx=32, Ny=17)
CHART = FermiChart(2 * math.pi, 1.0, 32, 17)


def sine_u(offset=0.3, amp=0.1):
    return fe.initial_height(CHART, RunConfig(profile="sine", offset=offset, amplitude=amp, **SMALL))


def test_totally_geodesic_slice_is_stationary():
    s = fe.init_flow(CHART, np.zeros((32, 17)))
    for _ in range(5):
        s = fe.step(s)
    assert np.all(s.u == 0.0)


def test_single_heun_step_on_umbilic_slice():
    c, dt = 0.8, 1e-3
    s = fe.step(fe.init_flow(CHART, np.full((32, 17), c)), dt)
    k1 = -2 * math.tanh(c)
    k2 = -2 * math.tanh(c + dt * k1)
    assert np.max(np.abs(s.u - (c + 0.5 * dt * (k1 + k2)))) < 1e-14
    assert s.t == dt and s.step_count == 1


def test_step_consistent_with_speed():
    s = fe.init_flow(CHART, sine_u())
    speed, _ = fe.vertical_speed(CHART, s.u)
    errs = []
    for dt in (1e-4, 5e-5):
        errs.append(np.max(np.abs(fe.step(s, dt).u - s.u - dt * speed)))
    # Heun differs from forward Euler at O(dt^2)
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_speed_is_minus_H_over_theta():
    s = fe.init_flow(CHART, sine_u())
    f = fe.full_fields(s)
    speed, theta = fe.vertical_speed(CHART, s.u)
    assert np.max(np.abs(speed + f["H"] / f["theta"])) < 1e-12
    assert np.max(np.abs(theta - f["theta"])) < 1e-15


def test_compliance_classes():
    s = fe.init_flow(CHART, np.full((32, 17), 1.0))
    assert s.compliance == "strict" and s.a0 == 1.0 and s.theta0_min == 1.0
    # phi0 = 1 is the fixed point of the angle ODE, so eps sits at its cap
    assert s.eps == pytest.approx(1.0, abs=1e-14)
    steep = fe.initial_height(CHART, RunConfig(profile="steep", offset=0.0, amplitude=2.0, kx=3, **SMALL))
    v = fe.init_flow(CHART, steep)
    assert v.compliance == "violated" and v.theta0_min < angle_threshold(v.a0)
    assert fe._classify(math.tanh(1.0), math.tanh(1.0)) == "equality"


def test_init_rejects_bad_input():
    with pytest.raises(ValueError):
        fe.init_flow(CHART, np.zeros((8, 8)))
    with pytest.raises(ValueError):
        fe.init_flow(CHART, np.full((32, 17), np.inf))


def test_zero_time_run():
    summary, records = fe.run(RunConfig(t_max=0.0, **SMALL))
    assert summary.outcome == "max-time" and summary.steps == 0 and len(records) == 1
    assert records[0].U_t == 1.0


def test_umbilic_run_tracks_barrier():
    summary, records = fe.run(RunConfig(t_max=0.5, **SMALL))
    err = max(abs(r.umax - umbilic_exact(1.0, r.t)) for r in records)
    assert err < 1e-4
    assert summary.barrier_violations == 0 and summary.angle_violations == 0


def test_discrete_maximum_principle():
    s = fe.init_flow(CHART, sine_u(0.4, 0.2))
    hi = np.abs(s.u).max()
    for _ in range(200):
        s = fe.step(s)
        assert np.abs(s.u).max() <= hi + 1e-14
        hi = np.abs(s.u).max()


def test_graph_loss_at_floor():
    s = fe.init_flow(CHART, sine_u(0.0, 1.0), fe.FlowParams(theta_floor=0.99))
    with pytest.raises(GraphLostError):
        fe.step(s)
    summary, records = fe.run(RunConfig(profile="sine", amplitude=1.0, theta_floor=0.99, **SMALL))
    assert summary.outcome == "graph-lost" and summary.steps == 0 and summary.final_record is records[-1]


def test_envelope():
    assert fe.theta_envelope(0.5, 1.0, 0.0) == pytest.approx(0.5)
    t = np.linspace(0, 2, 50)
    env = fe.theta_envelope(0.5, 1.0, t)
    assert np.all(np.diff(env) < 0)


def test_general_evo_theta_umbilic():
    # on a level set theta = 1 and a = tanh(L): the right-hand side vanishes
    L = 0.7
    assert fe.general_evo_theta_rhs(math.tanh(L), 1.0, L) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize(
    "cfg, expected",
    [
        (RunConfig(profile="sine", amplitude=0.1, offset=0.3, t_max=0.5, **SMALL), "graph-preserved"),
        (RunConfig(profile="sine", amplitude=3.0, kx=2, ky=0, offset=4.0, C=0.1, theta_floor=0.5,
                   t_max=3.0, **SMALL), "suspected-singularity"),
    ],
)
def test_probe_report_well_formed(cfg, expected):
    rep = fe.singularity_probe(cfg)
    assert rep.classification == expected
    n = len(rep.records)
    assert len(rep.envelope) == n and len(rep.dtheta_dt) == n - 2 == len(rep.inequality_ok)
    assert rep.inequality_fraction >= 0.95
    assert all(np.isfinite([r.theta_min, r.a, r.b, r.evo_rhs]).all() for r in rep.records)
    if expected == "suspected-singularity":
        assert rep.summary.outcome == "graph-lost"
        assert all(r.I_member for r in rep.records[-fe.PROBE_TAIL:])


def test_argmin_refinement_fields():
    cfg = RunConfig(profile="sine", amplitude=3.0, kx=2, ky=0, offset=2.5, **SMALL)
    out = fe.argmin_refinement(fe.run_to(cfg, 0.02))
    assert set(out) >= {"raw", "refined", "theta", "L", "gap", "offset"}
    assert all(abs(o) <= 1 for o in out["offset"]) and 0 < out["theta"] < 1


def test_umbilic_monitor_values():
    s = fe.step(fe.init_flow(CHART, np.full((32, 17), 0.9)))
    rec = fe.monitor(s)
    assert rec.theta_min == 1.0
    assert rec.a == pytest.approx(math.tanh(rec.L), abs=1e-14)
    assert rec.b == pytest.approx(math.tanh(rec.L), abs=1e-14)
    assert not rec.I_member and rec.b_gap < 1e-14


def test_steep_probe_report_finite():
    cfg = RunConfig(profile="steep", amplitude=1.2, kx=4, t_max=0.3, **SMALL)
    rep = fe.singularity_probe(cfg)
    assert rep.summary.compliance == "violated"
    assert rep.classification in ("graph-preserved", "suspected-singularity", "inconclusive")
    for r in rep.records:
        assert np.isfinite([r.t, r.umax, r.theta_min, r.a, r.b, r.crit_rhs, r.evo_rhs]).all()
    assert all(r.Phi_t == 0.0 for r in rep.records)


def test_compliant_profile_converges_at_rate_two():
    cfg = RunConfig(profile="sine", offset=0.3, amplitude=0.2, kx=1, ky=1, Nx=64, Ny=32, t_max=5.0)
    summary, records = fe.run(cfg)
    assert summary.compliance != "violated" and summary.a0 == pytest.approx(0.5)
    assert summary.outcome == "converged"
    assert summary.slope_sinh_umax == pytest.approx(-2.0, abs=0.1)
    assert not any(r.I_member for r in records)
