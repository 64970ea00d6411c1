import math
from dataclasses import replace

import numpy as np
import pytest

from kleinstep.analytic import solve_step
from kleinstep.core import ParticleParams, Regime
from kleinstep.fv import FVState, Grid1D, KGState, charge_density, fv_reconstruct, fv_split, laplacian_symbol
from kleinstep.sim import (
    ConfigError,
    InstabilityError,
    MeasurementError,
    SimConfig,
    WavePacketSpec,
    continuity_residual,
    evolve,
    free_packet_plan,
    init_gaussian_packet,
    kg_oracle_step,
    max_frequency,
    measure_R,
    plan_packet_run,
    run_plan,
    stability_bound,
)
from kleinstep.verify import scenario_run


def small_klein(**kw):
    return plan_packet_run(1.25, 3.0, sigma_x=10.0, dx=0.1, **kw)


# --- configuration ---------------------------------------------------------


def test_packet_spec_checks():
    with pytest.raises(ConfigError):
        WavePacketSpec(x0=0, sigma_x=0, p0=1)
    with pytest.raises(ConfigError):
        WavePacketSpec(x0=0, sigma_x=2.0, p0=1.0).check_right_moving()
    WavePacketSpec(x0=0, sigma_x=40.0, p0=0.75).check_right_moving()


def test_overlap_rejected():
    g = Grid1D.covering(-30, 30, 0.1, anchor=0.05)
    V = np.where(g.x > 0, 3.0, 0.0)
    with pytest.raises(ConfigError, match="overlaps"):
        init_gaussian_packet(WavePacketSpec(x0=-5.0, sigma_x=3.0, p0=0.75), g, V)


def test_stability_bound_arithmetic():
    g = Grid1D(x_min=0, dx=0.05, n=100)
    w = 3.0 + math.sqrt(1.0 + 16.0 / 3.0 / 0.05**2)
    assert max_frequency(g, 1.0, 3.0) == pytest.approx(w)
    assert stability_bound(g, 1.0, 3.0, "RK4") == pytest.approx(2 * math.sqrt(2) / w)
    assert stability_bound(g, 1.0, 3.0, "leapfrog") == pytest.approx(1 / w)
    cfg = SimConfig(grid=g, dt=0.9 * 2 * math.sqrt(2) / w, t_end=1.0)
    with pytest.raises(ConfigError, match="exceeds"):
        cfg.check_stability(1.0, 3.0)


def test_doubled_dt_aborts():
    plan = small_klein()
    g = plan.config.grid
    bad = plan.with_dt(2 * stability_bound(g, 1.0, 3.0))
    with pytest.raises(InstabilityError, match="stability bound"):
        evolve(bad.initial_state(), bad.config, check_stability=False)
    with pytest.raises(ConfigError):
        evolve(bad.initial_state(), bad.config)


# --- packet construction ---------------------------------------------------


def test_wide_packet_split_ratio():
    g = Grid1D.symmetric(400.0, 0.1)
    s = init_gaussian_packet(WavePacketSpec(x0=0.0, sigma_x=80.0, p0=0.75), g, np.zeros(g.n), check_overlap=False)
    k = g.n // 2
    ratio = s.chi[k] / s.phi[k]
    assert ratio.real == pytest.approx((1 - 1.25) / (1 + 1.25), rel=1e-3)


def test_packet_at_rest_has_little_chi():
    g = Grid1D.symmetric(200.0, 0.1)
    s = init_gaussian_packet(WavePacketSpec(x0=0.0, sigma_x=20.0, p0=0.0), g, np.zeros(g.n), check_overlap=False)
    assert np.max(np.abs(s.chi)) / np.max(np.abs(s.phi)) < 1 / (20.0**2)
    assert np.sum(charge_density(s)) > 0


# --- evolution -------------------------------------------------------------


def test_determinism():
    plan = small_klein()
    a = run_plan(plan)
    b = run_plan(plan)
    assert [r.row() for r in a.records] == [r.row() for r in b.records]


def test_snapshots_do_not_change_records():
    plan = small_klein()
    snap = replace(plan, config=replace(plan.config, snapshot_every=2000))
    a, b = run_plan(plan), run_plan(snap)
    assert [r.row() for r in a.records] == [r.row() for r in b.records]
    assert len(b.snapshots) == 1 + plan.config.n_steps // 2000
    assert b.snapshots[1].t == pytest.approx(2000 * plan.config.dt)


def test_static_zero_field_residual():
    g = Grid1D(x_min=0, dx=0.1, n=64)
    z = FVState(phi=np.zeros(64), chi=np.zeros(64), potential=np.zeros(64), grid=g)
    snaps = [replace(z.copy(), t=t) for t in (0.0, 0.1, 0.2)]
    assert np.all(continuity_residual(snaps) == 0)
    with pytest.raises(ValueError):
        continuity_residual([z, z])


def test_small_klein_run_matches_signs():
    res = run_plan(small_klein())
    m = measure_R(res, quiet_tol=1e-2)
    assert m.R > 1 and m.Q_right < 0
    assert m.R - m.T == pytest.approx(1.0, abs=1e-6)


def test_quiescence_required():
    plan = small_klein()
    short = replace(plan, config=replace(plan.config, t_end=plan.config.t_end / 2))
    with pytest.raises(MeasurementError, match="extend t_end"):
        measure_R(run_plan(short))


def test_leapfrog_and_absorbing_runs():
    lf = run_plan(small_klein(integrator="leapfrog"))
    ab = run_plan(small_klein(boundary="absorbing", absorb_width=32))
    rk = run_plan(small_klein())
    assert measure_R(lf, 1e-2).R == pytest.approx(measure_R(rk, 1e-2).R, rel=1e-2)
    # absorbing layers sit far from the packets, so R is unaffected
    assert measure_R(ab, 1e-2).R == pytest.approx(measure_R(rk, 1e-2).R, rel=1e-5)
    with pytest.raises(ConfigError):
        run_plan(small_klein(boundary="absorbing", absorb_width=32, integrator="leapfrog"))


def test_smoothed_step_limits():
    sharp = measure_R(run_plan(small_klein()), 1e-2).R
    # a width far below dx leaves the sampled potential unchanged
    thin = measure_R(run_plan(small_klein(smoothing_width=0.005)), 1e-2).R
    assert thin == pytest.approx(sharp, rel=1e-9)
    # a soft step suppresses Klein reflection but keeps R > 1
    soft = measure_R(run_plan(small_klein(smoothing_width=0.2)), 1e-2).R
    assert 1 < soft < sharp


def test_kg_oracle_plane_wave_phase():
    g = Grid1D(x_min=0.0, dx=2 * np.pi / 64, n=64)
    k = 2.0
    E = math.sqrt(1 + laplacian_symbol(k, g))
    psi = np.exp(1j * k * g.x)
    kg = KGState(psi=psi, psi_dot=-1j * E * psi, potential=np.zeros(g.n), grid=g)
    dt = 1e-3
    for integ, tol in (("leapfrog", 1e-6), ("RK4", 1e-12)):
        cfg = SimConfig(grid=g, dt=dt, t_end=dt, integrator=integ)
        out = kg_oracle_step(kg, cfg, nsteps=10)
        assert np.allclose(out.psi, psi * np.exp(-1j * E * 10 * dt), atol=tol)


def test_fv_matches_kg_rk4_closely():
    # same semi-discretization: only time-stepping error separates the two
    state, cfg = free_packet_plan(dx=0.1, t_end=0.5)
    fv = evolve(state, cfg, track_continuity=False).final
    kg = kg_oracle_step(fv_reconstruct(state), replace(cfg, integrator="RK4"), nsteps=cfg.n_steps)
    assert np.linalg.norm(fv.psi - kg.psi) / np.linalg.norm(fv.psi) < 1e-8


def test_kg_equation_sign_convention():
    # uniform field in constant V: psi = exp(-i (V + m) t) solves (i d_t - V)^2 psi = m^2 psi
    g = Grid1D(x_min=0.0, dx=0.1, n=32)
    V, m = 0.7, 1.3
    psi = np.ones(g.n, complex)
    kg = KGState(psi=psi, psi_dot=-1j * (V + m) * psi, potential=np.full(g.n, V), grid=g, m=m)
    cfg = SimConfig(grid=g, dt=1e-3, t_end=1.0, integrator="RK4")
    out = kg_oracle_step(kg, cfg, nsteps=1000)
    assert np.allclose(out.psi, np.exp(-1j * (V + m) * 1.0), atol=1e-10)
    fv = fv_split(kg)
    assert np.allclose(fv.chi, 0, atol=1e-15)


# --- acceptance runs (shared with the acceptance suite) ---------------------


def test_free_run(verify_ctx):
    plan, res, _ = scenario_run(verify_ctx, "free")
    m = measure_R(res)
    assert m.R <= 1e-6
    # centroid of the fully transmitted packet moves at p0 / E
    t = res.series("t")
    c = res.series("centroid_right")
    sel = t >= plan.config.measurement_time
    v = np.polyfit(t[sel], c[sel], 1)[0]
    assert v == pytest.approx(0.75 / 1.25, rel=0.02)
    Q = res.series("Q_total")
    assert np.max(np.abs(Q / Q[0] - 1)) <= 1e-6


def test_evanescent_run(verify_ctx):
    plan, res, _ = scenario_run(verify_ctx, "evanescent")
    m = measure_R(res)
    assert m.R == pytest.approx(1.0, rel=5e-3)
    assert abs(m.Q_right) <= 1e-4 * m.Q_incident


def test_klein_run_details(verify_ctx):
    plan, res, _ = scenario_run(verify_ctx, "klein")
    recs = res.records
    assert all(r.Q_total == r.Q_left + r.Q_right for r in recs)
    finite = [r.continuity_residual_max for r in recs if not math.isnan(r.continuity_residual_max)]
    assert finite and max(finite) <= 1e-4
    m = measure_R(res)
    v_g = 1.43614066163450716 / 1.75
    t = res.series("t")
    sel = t >= plan.config.measurement_time
    v = np.polyfit(t[sel], res.series("centroid_right")[sel], 1)[0]
    assert v == pytest.approx(v_g, rel=0.02)
    assert m.R - m.T == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize(
    "V0, regime",
    [(0.5, Regime.ORDINARY), (2.0, Regime.EVANESCENT), (5.0, Regime.KLEIN)],
)
def test_regime_reproduction(V0, regime):
    # E = 2 m gives p0 = sqrt(3) m, so sigma_x = 25 / m has p0 sigma_x > 40;
    # V0 = 4 m would sit on the V0 = 2E pole, hence 5 m
    plan = plan_packet_run(2.0, V0, sigma_x=25.0, dx=0.05)
    assert plan.regime is regime
    assert plan.params.p * plan.packet.sigma_x >= 40
    R = measure_R(run_plan(plan)).R
    R0 = solve_step(ParticleParams(m=1.0, E=2.0), V0).R
    if regime is Regime.ORDINARY:
        assert R < 1 and R == pytest.approx(R0, rel=0.05)
    elif regime is Regime.EVANESCENT:
        assert R == pytest.approx(1.0, rel=5e-3)
    else:
        assert R > 1 and R == pytest.approx(R0, rel=0.02)
