"""Invariant and acceptance checks shared by ``kleinstep verify`` and the test suite.

Each check returns a :class:`CheckResult`; nothing here raises on a failed
property. Heavy packet runs are cached on the :class:`VerifyContext` so the
charge, continuity and oracle checks reuse the same evolutions.
"""
from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .analytic import (
    BranchRule,
    antiparticle_relabel,
    check_current_balance,
    flipped_pprime_branch,
    select_pprime_branch,
    solve_step,
    wave_currents,
)
from .core import (
    ParticleParams,
    Regime,
    classify_regime,
    group_velocity,
    momentum_from_energy,
    transmitted_momentum_squared,
)
from .fv import (
    FVState,
    Grid1D,
    KGState,
    charge_density,
    content_classify,
    fv_reconstruct,
    fv_split,
    kg_charge_density,
    pt_transform,
)
from .sim import (
    InstabilityError,
    NumericalError,
    PacketPlan,
    SimConfig,
    SimResult,
    WavePacketSpec,
    centroid_after,
    evolve,
    free_packet_plan,
    init_gaussian_packet,
    kg_evolve,
    measure_R,
    plan_packet_run,
    stability_bound,
)

DEFAULT_SEED = 20240611

# high-precision values for E = 1.25 m, V0 = 3 m (30-digit arithmetic)
KLEIN_WORKED = {
    "p_prime": -1.43614066163450716496265286705,
    "R": 10.1514923157207750773692850347,
    "rho_t": -8.36361923679058130802696377602,
    "j_t": -6.86361923679058130802696377602,
    "E_c": 1.75,
}

SCHEME_ORDER = 4  # RK4 with dt ~ dx^2 and fourth-order stencils: O(dx^4)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""
    seconds: float = 0.0
    criterion: int | None = None

    def line(self) -> str:
        tag = f"[{self.criterion}] " if self.criterion else ""
        state = "PASS" if self.passed else "FAIL"
        return f"{state} {tag}{self.name}: value={self.value:.6g} limit={self.limit:.6g} ({self.seconds:.2f}s) {self.detail}".rstrip()

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "criterion": self.criterion,
            "passed": bool(self.passed),
            "value": self.value,
            "limit": self.limit,
            "seconds": round(self.seconds, 3),
            "detail": self.detail,
        }


@dataclass
class VerifyContext:
    seed: int = DEFAULT_SEED
    branch_rule: BranchRule = select_pprime_branch
    unstable_dt: bool = False  # test hook: run packets at twice the stability bound
    _runs: dict = field(default_factory=dict, repr=False)
    _locks: dict = field(default_factory=dict, repr=False)
    _guard: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def with_hooks(cls, hooks: list[str] | tuple[str, ...] = (), seed: int = DEFAULT_SEED) -> "VerifyContext":
        ctx = cls(seed=seed)
        for h in hooks:
            if h == "flip-branch":
                ctx.branch_rule = flipped_pprime_branch
            elif h == "double-dt":
                ctx.unstable_dt = True
            else:
                raise ValueError(f"unknown test hook {h!r}")
        return ctx

    def rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])

    def cached(self, key: str, make: Callable):
        with self._guard:
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            if key not in self._runs:
                self._runs[key] = make()
            return self._runs[key]

    def plan(self, plan: PacketPlan) -> PacketPlan:
        if not self.unstable_dt:
            return plan
        g = plan.config.grid
        bound = stability_bound(g, plan.params.m, abs(plan.step.V0), plan.config.integrator)
        return plan.with_dt(2.0 * bound)

    def run(self, plan: PacketPlan) -> SimResult:
        plan = self.plan(plan)
        return evolve(plan.initial_state(), plan.config, check_stability=not self.unstable_dt)


def _timed(name: str, criterion: int | None = None):
    def wrap(fn):
        def inner(ctx: VerifyContext) -> CheckResult:
            t0 = time.perf_counter()
            try:
                res = fn(ctx)
            except InstabilityError as e:
                res = CheckResult(name, False, math.inf, 0.0, f"instability abort: {e}")
            except NumericalError as e:
                res = CheckResult(name, False, math.nan, 0.0, f"numerical failure: {e}")
            res.name = name
            res.criterion = criterion
            res.seconds = time.perf_counter() - t0
            return res

        inner.check_name = name
        inner.criterion = criterion
        return inner

    return wrap


def _ulps(a: float, b: float) -> float:
    return abs(a - b) / math.ulp(max(abs(a), abs(b), 1e-300))


# --- random parameter sets -------------------------------------------------


def sample_regime(rng: np.random.Generator, regime: Regime, n: int, m: float = 1.0):
    """(E, V0) pairs strictly inside one regime, E in (m, 10m]."""
    E = m * (1.0 + 9.0 * (1.0 - rng.random(n)))  # (1, 10]
    u = rng.random(n)
    if regime is Regime.EVANESCENT:
        V0 = E - m + 2 * m * np.clip(u, 1e-6, 1 - 1e-6)
    elif regime is Regime.KLEIN:
        V0 = E + m + (20 * m - E - m) * np.clip(u, 1e-6, 1.0)
    else:
        V0 = (E - m) * np.clip(u, 0.0, 1 - 1e-6)
    return list(zip(E.tolist(), V0.tolist()))


def sample_sweep(rng: np.random.Generator, n: int, m: float = 1.0):
    E = m * (1.0 + 9.0 * (1.0 - rng.random(n)))
    V0 = 20.0 * m * rng.random(n)
    return list(zip(E.tolist(), V0.tolist()))


# --- analytic invariants ---------------------------------------------------


@_timed("momentum_mass_shell")
def check_mass_shell(ctx):
    rng = ctx.rng(1)
    worst = 0.0
    for _ in range(2000):
        m = float(10 ** rng.uniform(-3, 3))
        E = m * float(1 + 10 ** rng.uniform(-6, 2))
        p = momentum_from_energy(E, m)
        worst = max(worst, _ulps(p * p + m * m, E * E))
    return CheckResult("", worst <= 4, worst, 4, "ulps of E^2")


@_timed("regime_sign_consistency")
def check_regime_consistency(ctx):
    bad = 0
    pts = sample_sweep(ctx.rng(2), 2000) + [(1.25, 0.25), (1.25, 2.25), (3.0, 2.0), (3.0, 4.0)]
    for E, V0 in pts:
        reg = classify_regime(E, V0, 1.0)
        k2 = transmitted_momentum_squared(E, V0, 1.0)
        ok = (reg.is_oscillatory and k2 > 0) or (reg is Regime.EVANESCENT and k2 < 0) or (reg.is_threshold and k2 == 0)
        bad += not ok
    return CheckResult("", bad == 0, bad, 0, "inconsistent points")


@_timed("matching_continuity")
def check_matching(ctx):
    worst = 0.0
    for E, V0 in sample_sweep(ctx.rng(3), 2000):
        s = solve_step(ParticleParams(m=1.0, E=E), V0, ctx.branch_rule)
        lhs, rhs = 1 + s.b_over_a, s.bprime_over_a
        scale = math.ulp(max(abs(rhs), 1.0))
        worst = max(worst, abs(lhs - rhs) / scale)
    return CheckResult("", worst <= 4, worst, 4, "ulps |1 + b/a - b'/a|")


@_timed("regime_reflectivity")
def check_regime_reflectivity(ctx):
    bad = []
    for E, V0 in sample_sweep(ctx.rng(4), 2000):
        s = solve_step(ParticleParams(m=1.0, E=E), V0, ctx.branch_rule)
        if s.regime is Regime.ORDINARY:
            ok = s.R < 1
        elif s.regime is Regime.KLEIN:
            ok = s.R > 1
        else:
            ok = abs(s.R - 1) <= 1e-12
        if not ok:
            bad.append((E, V0, s.regime.value, s.R))
    return CheckResult("", not bad, len(bad), 0, f"e.g. {bad[0]}" if bad else "")


@_timed("current_balance_sweep")
def check_balance_sweep(ctx):
    worst = 0.0
    for E, V0 in sample_sweep(ctx.rng(5), 2000):
        s = solve_step(ParticleParams(m=1.0, E=E), V0, ctx.branch_rule)
        worst = max(worst, check_current_balance(s))
    return CheckResult("", worst <= 1e-12, worst, 1e-12)


@_timed("klein_sign_coherence")
def check_sign_coherence(ctx):
    bad = 0
    for E, V0 in sample_regime(ctx.rng(6), Regime.KLEIN, 500):
        s = solve_step(ParticleParams(m=1.0, E=E), V0, ctx.branch_rule)
        c = wave_currents(s)
        v = group_velocity(s.p_prime, E, V0, 1.0)
        bad += not (c.rho_t < 0 and c.j_t < 0 and v > 0)
    return CheckResult("", bad == 0, bad, 0, "points with sign(rho_t), sign(j_t) != -1 or v_g <= 0")


@_timed("charge_transport")
def check_charge_transport(ctx):
    worst = 0.0
    pts = sample_regime(ctx.rng(7), Regime.KLEIN, 500) + sample_regime(ctx.rng(8), Regime.ORDINARY, 500)
    for E, V0 in pts:
        s = solve_step(ParticleParams(m=1.0, E=E), V0, ctx.branch_rule)
        c = wave_currents(s)
        v = group_velocity(s.p_prime, E, V0, 1.0)
        worst = max(worst, _ulps(c.rho_t * v, c.j_t))
    return CheckResult("", worst <= 4, worst, 4, "ulps |rho_t v_g - j_t|")


@_timed("split_roundtrip")
def check_split_roundtrip(ctx):
    """psi, psi_t -> (phi, chi) -> psi, psi_t, and the two charge-density forms.

    Errors are measured in units of eps times the size of the terms that cancel.
    """
    rng = ctx.rng(9)
    grid = Grid1D(x_min=-5.0, dx=0.1, n=101)
    eps = np.finfo(float).eps
    worst = 0.0
    for _ in range(20):
        m = float(rng.uniform(0.5, 2))
        psi = rng.normal(size=grid.n) + 1j * rng.normal(size=grid.n)
        psid = rng.normal(size=grid.n) + 1j * rng.normal(size=grid.n)
        V = rng.uniform(-3, 3, size=grid.n)
        kg = KGState(psi=psi, psi_dot=psid, potential=V, grid=grid, m=m)
        fv = fv_split(kg)
        back = fv_reconstruct(fv)
        size = (1 + np.abs(V) / m) * np.abs(psi) + np.abs(psid) / m
        worst = max(worst, np.max(np.abs(back.psi - psi) / (eps * size)))
        worst = max(worst, np.max(np.abs(back.psi_dot - psid) / (eps * m * (size + np.abs(V) / m * size))))
        rho_scale = (np.abs(fv.phi) + np.abs(fv.chi)) ** 2
        worst = max(worst, np.max(np.abs(charge_density(fv) - kg_charge_density(kg)) / (eps * rho_scale)))
    return CheckResult("", worst <= 4, worst, 4, "error / (eps * term size)")


# --- acceptance criteria ---------------------------------------------------


@_timed("evanescent_reflectivity", criterion=1)
def criterion_evanescent(ctx):
    worst = 0.0
    for E, V0 in sample_regime(ctx.rng(101), Regime.EVANESCENT, 200):
        s = solve_step(ParticleParams(m=1.0, E=E), V0, ctx.branch_rule)
        assert s.regime is Regime.EVANESCENT
        worst = max(worst, abs(s.R - 1.0))
    return CheckResult("", worst <= 1e-12, worst, 1e-12, "max |R - 1| over 200 points")


@_timed("klein_reflectivity_and_balance", criterion=2)
def criterion_klein(ctx):
    min_R = math.inf
    worst = 0.0
    for E, V0 in sample_regime(ctx.rng(102), Regime.KLEIN, 200):
        s = solve_step(ParticleParams(m=1.0, E=E), V0, ctx.branch_rule)
        min_R = min(min_R, s.R)
        worst = max(worst, check_current_balance(s))
    ok = min_R > 1 and worst <= 1e-12
    return CheckResult("", ok, worst, 1e-12, f"min R = {min_R:.6g} (must exceed 1)")


@_timed("worked_klein_scenario", criterion=3)
def criterion_worked(ctx):
    s = solve_step(ParticleParams(m=1.0, E=1.25), 3.0, ctx.branch_rule)
    c = wave_currents(s)
    errs = {
        "p_prime": abs(s.p_prime / KLEIN_WORKED["p_prime"] - 1),
        "R": abs(s.R / KLEIN_WORKED["R"] - 1),
        "rho_t": abs(c.rho_t / KLEIN_WORKED["rho_t"] - 1),
    }
    try:
        view = antiparticle_relabel(s)
        errs["E_c"] = abs(view.E_c / KLEIN_WORKED["E_c"] - 1)
        direction_ok = view.direction == 1
    except ValueError:
        errs["E_c"] = math.inf
        direction_ok = False
    worst = max(errs.values())
    ok = worst <= 1e-10 and c.rho_t < 0 and direction_ok
    worst_key = max(errs, key=errs.get)
    return CheckResult("", ok, worst, 1e-10, f"worst relative error in {worst_key}; rho_t={c.rho_t:.6g}")


ACCEPTANCE_SCENARIOS = {
    "free": dict(E=1.25, V0=0.0, sigma_x=20.0),
    "evanescent": dict(E=1.25, V0=2.0, sigma_x=40.0),
    "klein": dict(E=1.25, V0=3.0, sigma_x=40.0),
}


def scenario_plan(name: str) -> PacketPlan:
    return plan_packet_run(**ACCEPTANCE_SCENARIOS[name])


def scenario_run(ctx: VerifyContext, name: str) -> tuple[PacketPlan, SimResult, float]:
    def make():
        plan = ctx.plan(scenario_plan(name))
        t0 = time.perf_counter()
        res = ctx.run(scenario_plan(name))
        return plan, res, time.perf_counter() - t0

    return ctx.cached(f"run:{name}", make)


@_timed("packet_klein_paradox", criterion=4)
def criterion_packet(ctx):
    plan, res, secs = scenario_run(ctx, "klein")
    meas = measure_R(res)
    R_an = solve_step(plan.params, plan.step.V0).R
    rel = abs(meas.R / R_an - 1)
    cen = centroid_after(res)
    increasing = bool(cen.size >= 2 and np.all(np.diff(cen) > 0))
    content = content_classify(res.final, res.final.grid.x > plan.step.x_step)
    ok = rel <= 0.02 and meas.Q_right < 0 and increasing and content.dominant == "antiparticle" and secs <= 300
    detail = (
        f"R_measured={meas.R:.6g} R_analytic={R_an:.6g} Q_right={meas.Q_right:.6g} "
        f"centroid_increasing={increasing} right_content={content.dominant} run={secs:.1f}s"
    )
    return CheckResult("", ok, rel, 0.02, detail)


def _charge_drift(res: SimResult) -> float:
    Q = res.series("Q_total")
    return float(np.max(np.abs(Q - Q[0])) / abs(Q[0]))


@_timed("charge_conservation", criterion=5)
def criterion_conservation(ctx):
    drifts = {}
    for name in ACCEPTANCE_SCENARIOS:
        _, res, _ = scenario_run(ctx, name)
        drifts[name] = _charge_drift(res)
    worst = max(drifts.values())
    return CheckResult("", worst <= 1e-6, worst, 1e-6, " ".join(f"{k}={v:.3g}" for k, v in drifts.items()))


def continuity_convergence(dxs=(0.2, 0.1, 0.05, 0.025)) -> tuple[float, list[float]]:
    """Residual at t = 1 for a free packet with dt = 0.4 dx^2; returns (slope, residuals)."""
    res = []
    for dx in dxs:
        state, cfg = free_packet_plan(dx=dx)
        out = evolve(state, cfg)
        res.append(out.records[-1].continuity_residual_max)
    slope = float(np.polyfit(np.log(dxs), np.log(res), 1)[0])
    return slope, res


@_timed("continuity_convergence", criterion=6)
def criterion_continuity(ctx):
    slope, res = ctx.cached("continuity", continuity_convergence)
    ok = abs(slope - SCHEME_ORDER) <= 0.5
    return CheckResult(
        "", ok, slope, SCHEME_ORDER, f"+-0.5; residuals {', '.join(f'{r:.3g}' for r in res)}"
    )


@dataclass
class OracleComparison:
    mismatch: float  # ||psi_FV - psi_KG|| / ||psi||
    est_fv: float
    est_kg: float
    q_left_rel: float

    @property
    def ratio(self) -> float:
        return self.mismatch / (self.est_fv + self.est_kg)


def oracle_comparison(ctx: VerifyContext, name: str) -> OracleComparison:
    """FV (RK4) against the second-order equation (leapfrog) on one scenario.

    Truncation errors come from one change of step: the FV run is repeated at
    2 dt (error at dt ~ difference / 15), the leapfrog run at dt / 2 (error
    at dt ~ 4/3 of the difference).
    """

    def make():
        plan, res, _ = scenario_run(ctx, name)
        cfg = plan.config
        psi_fv = res.final.psi
        nrm = np.linalg.norm(psi_fv)
        coarse_plan = plan.with_dt(2 * cfg.dt)
        coarse = evolve(plan.initial_state(), coarse_plan.config, check_stability=False, track_continuity=False)
        est_fv = np.linalg.norm(coarse.final.psi - psi_fv) / nrm / (2**4 - 1)
        kg0 = fv_reconstruct(plan.initial_state())
        kg_cfg = replace(cfg, integrator="leapfrog")
        kg = kg_evolve(kg0, kg_cfg)
        kg_fine = kg_evolve(kg0, kg_cfg, dt=cfg.dt / 2)
        est_kg = np.linalg.norm(kg.final.psi - kg_fine.final.psi) / nrm * 4 / 3
        mismatch = np.linalg.norm(psi_fv - kg.final.psi) / nrm
        q_rel = abs(kg.Q_left[-1] / res.records[-1].Q_left - 1)
        return OracleComparison(float(mismatch), float(est_fv), float(est_kg), float(q_rel))

    return ctx.cached(f"oracle:{name}", make)


@_timed("oracle_equivalence", criterion=7)
def criterion_oracle(ctx):
    comps = {name: oracle_comparison(ctx, name) for name in ACCEPTANCE_SCENARIOS}
    worst = max(c.ratio for c in comps.values())
    q_klein = comps["klein"].q_left_rel
    ok = worst <= 10 and q_klein <= 5e-3
    detail = " ".join(f"{k}: mismatch={c.mismatch:.3g} est={c.est_fv + c.est_kg:.3g}" for k, c in comps.items())
    return CheckResult("", ok, worst, 10, f"{detail}; klein Q_left rel diff={q_klein:.3g} (<=5e-3)")


def pt_defect(dt: float = 0.01, t0: float = 3.0) -> tuple[float, float]:
    """One-step defect of the mirror map and the one-step RK4 truncation error.

    Evolve a packet hitting a step to t0 and t0 + dt; mirror the later state
    (time -t0 - dt, potential -V(-x)) and take one step forward. It should
    land on the mirror of the earlier state.
    """
    grid = Grid1D.symmetric(30.0, 0.1)
    V = np.where(grid.x > 0, 3.0, 0.0)
    spec = WavePacketSpec(x0=-8.0, sigma_x=2.0, p0=2.0)
    s0 = init_gaussian_packet(spec, grid, V, 1.0, check_overlap=False)
    n0 = int(round(t0 / dt))
    cfg = SimConfig(grid=grid, dt=dt, t_end=n0 * dt, record_every=n0, cfl_guard=0.9)
    a = evolve(s0, cfg, track_continuity=False).final
    one = replace(cfg, t_end=dt, record_every=1)
    b = evolve(a, one, track_continuity=False).final
    half = replace(cfg, dt=dt / 2, t_end=dt, record_every=2)
    b_half = evolve(a, half, track_continuity=False).final
    mirrored = pt_transform(b)
    back = evolve(mirrored, one, track_continuity=False).final
    target = pt_transform(a)
    nrm = math.sqrt(np.sum(np.abs(a.phi) ** 2 + np.abs(a.chi) ** 2))

    def dist(u: FVState, v: FVState) -> float:
        return math.sqrt(np.sum(np.abs(u.phi - v.phi) ** 2 + np.abs(u.chi - v.chi) ** 2)) / nrm

    return dist(back, target), dist(b, b_half) * 16 / 15


@_timed("pt_symmetry", criterion=8)
def criterion_pt(ctx):
    defect, trunc = pt_defect()
    return CheckResult("", defect <= 10 * trunc, defect / trunc, 10, f"defect={defect:.3g} truncation={trunc:.3g}")


# --- quick simulation smoke check ------------------------------------------


@_timed("packet_smoke")
def check_packet_smoke(ctx):
    """Small Klein packet: runs within the stability guard and gives R > 1."""
    plan = plan_packet_run(1.25, 3.0, sigma_x=10.0, dx=0.1)
    res = ctx.run(plan)
    meas = measure_R(res, quiet_tol=1e-2)
    drift = _charge_drift(res)
    return CheckResult("", meas.R > 1 and drift <= 1e-6, meas.R, 1.0, f"R_measured > 1; charge drift {drift:.3g}")


QUICK_CHECKS = [
    check_mass_shell,
    check_regime_consistency,
    check_matching,
    check_regime_reflectivity,
    check_balance_sweep,
    check_sign_coherence,
    check_charge_transport,
    check_split_roundtrip,
    criterion_evanescent,
    criterion_klein,
    criterion_worked,
    criterion_pt,
    check_packet_smoke,
]
SLOW_CHECKS = [criterion_packet, criterion_conservation, criterion_continuity, criterion_oracle]
ALL_CHECKS = QUICK_CHECKS + SLOW_CHECKS


def run_checks(ctx: VerifyContext, checks=None, jobs: int = 1) -> list[CheckResult]:
    """Run checks, concurrently up to ``jobs``; results keep the input order."""
    checks = ALL_CHECKS if checks is None else checks
    if jobs <= 1:
        return [c(ctx) for c in checks]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda c: c(ctx), checks))
