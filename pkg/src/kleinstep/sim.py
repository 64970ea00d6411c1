"""Wave-packet scattering through the step, measured in the time domain."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal

import numpy as np

from . import kernels
from .analytic import select_pprime_branch
from .core import DomainError, ParticleParams, Regime, StepPotential, classify_regime, transmitted_momentum_squared
from .fv import (
    FVState,
    Grid1D,
    KGState,
    charge_density,
    content_classify,
    current_density,
    d1,
    fv_reconstruct,
    fv_split,
    kg_charge_density,
    laplacian_symbol,
    sample_potential,
)


Integrator = Literal["RK4", "leapfrog"]

OVERLAP_LIMIT = 1e-8
# steps per unit of the fastest physical frequency; keeps RK4 charge drift < 1e-7
ACCURACY_DT_TIMES_E = 0.025


class ConfigError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass


class InstabilityError(NumericalError):
    pass


class MeasurementError(NumericalError):
    pass


@dataclass(frozen=True)
class WavePacketSpec:
    x0: float
    sigma_x: float
    p0: float
    amplitude: complex = 1.0

    def __post_init__(self):
        if not self.sigma_x > 0:
            raise ConfigError("sigma_x must be positive")

    def check_right_moving(self) -> None:
        if self.p0 < 4.0 / self.sigma_x:
            raise ConfigError(
                f"packet not safely right-moving: p0={self.p0:g} < 4/sigma_x={4.0 / self.sigma_x:g}"
            )


@dataclass(frozen=True)
class SimConfig:
    grid: Grid1D
    dt: float
    t_end: float
    integrator: Integrator = "RK4"
    measurement_time: float | None = None
    cfl_guard: float = 0.5
    record_every: int = 100  # steps between observable records
    snapshot_every: int | None = None  # steps between stored field snapshots
    x_step: float = 0.0
    probe_offset: float = 10.0  # probes sit at x_step -/+ probe_offset

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.t_end >= 0:
            raise ConfigError("t_end must be >= 0")
        if not 0 < self.cfl_guard < 1:
            raise ConfigError("cfl_guard must lie in (0, 1)")
        if self.integrator not in ("RK4", "leapfrog"):
            raise ConfigError(f"unknown integrator {self.integrator!r}")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def check_stability(self, m: float, v_max: float) -> None:
        bound = stability_bound(self.grid, m, v_max, self.integrator)
        if self.dt > self.cfl_guard * bound:
            raise ConfigError(
                f"dt={self.dt:g} exceeds cfl_guard*bound={self.cfl_guard * bound:g} "
                f"({self.integrator}, dx={self.grid.dx:g})"
            )


def max_frequency(grid: Grid1D, m: float, v_max: float) -> float:
    return abs(v_max) + math.sqrt(m * m + grid.laplacian_symbol_max())


def stability_bound(grid: Grid1D, m: float, v_max: float, integrator: Integrator = "RK4") -> float:
    """Largest stable dt: |omega dt| inside the scheme's imaginary-axis interval."""
    limit = 2.0 * math.sqrt(2.0) if integrator == "RK4" else 1.0
    return limit / max_frequency(grid, m, v_max)


@dataclass(frozen=True)
class ObservableRecord:
    t: float
    Q_total: float
    Q_left: float
    Q_right: float
    J_probe_left: float
    J_probe_right: float
    centroid_right: float
    norm: float
    continuity_residual_max: float = math.nan

    FIELDS = (
        "t",
        "Q_total",
        "Q_left",
        "Q_right",
        "J_probe_left",
        "J_probe_right",
        "centroid_right",
        "norm",
        "continuity_residual_max",
    )

    def row(self) -> tuple:
        return tuple(getattr(self, f) for f in self.FIELDS)


@dataclass
class SimResult:
    config: SimConfig
    records: list[ObservableRecord]
    final: FVState
    snapshots: list[FVState] = field(default_factory=list)
    steps: int = 0

    @property
    def Q_incident(self) -> float:
        return self.records[0].Q_left

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def discrete_dispersion(grid: Grid1D, m: float) -> Callable[[np.ndarray], np.ndarray]:
    """E(k) = sqrt(m^2 + lambda(k)) with lambda the symbol of the grid Laplacian."""
    return lambda k: np.sqrt(m * m + laplacian_symbol(k, grid))


def init_gaussian_packet(
    spec: WavePacketSpec,
    grid: Grid1D,
    potential,
    m: float = 1.0,
    E_of_p: Callable[[np.ndarray], np.ndarray] | None = None,
    check_overlap: bool = True,
) -> FVState:
    """Gaussian packet of positive-energy free modes, split into (phi, chi).

    psi(x, 0) = A exp(-(x - x0)^2 / 4 sigma^2 + i p0 x), and psi_t(x, 0) applies
    -i E(k) to every Fourier mode. ``E_of_p`` defaults to the grid's own
    discrete dispersion so the packet is exactly positive-frequency for the
    semi-discrete free evolution.
    """
    x = grid.x
    V = sample_potential(potential, grid) if callable(potential) else np.asarray(potential, float)
    psi = spec.amplitude * np.exp(-((x - spec.x0) ** 2) / (4 * spec.sigma_x**2) + 1j * spec.p0 * x)
    E_of_p = E_of_p or discrete_dispersion(grid, m)
    k = 2 * np.pi * np.fft.fftfreq(grid.n, d=grid.dx)
    psi_dot = np.fft.ifft(-1j * E_of_p(k) * np.fft.fft(psi))
    kg = KGState(psi=psi, psi_dot=psi_dot, potential=V, grid=grid, m=m)
    state = fv_split(kg)
    if check_overlap:
        frac = step_overlap(state, spec.x0)
        if frac > OVERLAP_LIMIT:
            raise ConfigError(
                f"packet overlaps the step region: {frac:.3g} of its charge (limit {OVERLAP_LIMIT:g}); "
                "move x0 left or shrink sigma_x"
            )
    return state


def step_overlap(state: FVState, x0: float) -> float:
    """Fraction of |rho| sitting where V differs from its value at x0."""
    V = state.potential
    v_ref = V[state.grid.index_of(x0)]
    scale = max(np.max(np.abs(V)), 1e-300)
    region = np.abs(V - v_ref) > 1e-12 * scale
    rho = np.abs(charge_density(state))
    total = rho.sum()
    return float(rho[region].sum() / total) if total > 0 else 0.0


def observe(state: FVState, x_step: float, probe_offset: float) -> ObservableRecord:
    g = state.grid
    rho = charge_density(state)
    j = current_density(state)
    x = g.x
    right = x >= x_step
    q_left = float(rho[~right].sum() * g.dx)
    q_right = float(rho[right].sum() * g.dx)
    qr_sum = rho[right].sum()
    centroid = float((x[right] * rho[right]).sum() / qr_sum) if qr_sum != 0 else math.nan
    il = min(max(g.index_of(x_step - probe_offset), 0), g.n - 1)
    ir = min(max(g.index_of(x_step + probe_offset), 0), g.n - 1)
    norm = float((np.abs(state.phi) ** 2 + np.abs(state.chi) ** 2).sum() * g.dx)
    return ObservableRecord(
        t=state.t,
        Q_total=q_left + q_right,
        Q_left=q_left,
        Q_right=q_right,
        J_probe_left=float(j[il]),
        J_probe_right=float(j[ir]),
        centroid_right=centroid,
        norm=norm,
    )


class _Stepper:
    """Advances an FVState in place with the configured scheme."""

    def __init__(self, state: FVState, config: SimConfig, dt: float | None = None):
        self.config = config
        self.dt = config.dt if dt is None else dt
        g = state.grid
        self.gamma = g.damping()
        self.periodic = g.periodic
        self.order = g.stencil_order
        self.prev: tuple[np.ndarray, np.ndarray] | None = None
        if config.integrator == "leapfrog" and np.any(self.gamma):
            raise ConfigError("leapfrog is unstable with absorbing layers; use RK4")

    def advance(self, state: FVState, nsteps: int) -> None:
        if nsteps <= 0:
            return
        g = state.grid
        if self.config.integrator == "RK4":
            bad = kernels.fv_rk4(
                state.phi, state.chi, state.potential, self.gamma, state.m, g.dx, self.dt,
                nsteps, self.order, self.periodic,
            )
        else:
            if self.prev is None:
                # bootstrap the two-level scheme with one RK4 step
                self.prev = (state.phi.copy(), state.chi.copy())
                bad = kernels.fv_rk4(
                    state.phi, state.chi, state.potential, self.gamma, state.m, g.dx, self.dt,
                    1, self.order, self.periodic,
                )
                if bad >= 0:
                    self._fail(state, 0)
                state.t += self.dt
                nsteps -= 1
                if nsteps == 0:
                    return
            bad = kernels.fv_leapfrog(
                state.phi, state.chi, self.prev[0], self.prev[1], state.potential, self.gamma,
                state.m, g.dx, self.dt, nsteps, self.order, self.periodic,
            )
        if bad >= 0:
            self._fail(state, bad)
        state.t += nsteps * self.dt

    def _fail(self, state: FVState, step: int):
        raise InstabilityError(
            f"norm grew more than {kernels.GROWTH_LIMIT:g}x in one step near t={state.t + step * self.dt:.6g} "
            f"(dt={self.dt:g}, dx={state.grid.dx:g}); reduce dt below the stability bound"
        )

    def fork(self) -> "_Stepper":
        other = _Stepper.__new__(_Stepper)
        other.__dict__.update(self.__dict__)
        if self.prev is not None:
            other.prev = (self.prev[0].copy(), self.prev[1].copy())
        return other


def _sharp_step_index(state: FVState, x_step: float) -> int | None:
    V = state.potential
    if V.size < 2 or np.max(np.abs(np.diff(V))) == 0:
        return None
    jump = np.max(np.abs(np.diff(V)))
    # a jump larger than half the total variation marks an unsmoothed step
    if jump >= 0.45 * (np.max(V) - np.min(V)):
        return state.grid.index_of(x_step)
    return None


def residual_mask(state: FVState, x_step: float, exclude: int = 4) -> np.ndarray:
    """Interior points for continuity checks.

    Drops absorbing layers, the stencil reach at non-periodic ends, and
    ``exclude`` points on each side of a sharp step, where the composite
    first-derivative stencils straddle the jump in V.
    """
    g = state.grid
    mask = g.interior()
    if not g.periodic:
        mask[:exclude] = False
        mask[-exclude:] = False
    k = _sharp_step_index(state, x_step)
    if k is not None:
        mask[max(k - exclude, 0) : k + exclude + 1] = False
    return mask


def continuity_residual(snapshots: list[FVState], x_step: float = 0.0, exclude: int = 4) -> np.ndarray:
    """max |d rho/dt + d j/dx| / max |rho| at each interior snapshot.

    d rho/dt is the centred difference of neighbouring snapshots, which must
    be equally spaced in time.
    """
    if len(snapshots) < 3:
        raise ValueError("continuity_residual needs >= 3 consecutive snapshots")
    out = []
    for a, b, c in zip(snapshots, snapshots[1:], snapshots[2:]):
        h = 0.5 * (c.t - a.t)
        if not h > 0:
            raise ValueError("snapshots must be in increasing time order")
        drho = (charge_density(c) - charge_density(a)) / (2 * h)
        res = drho + d1(current_density(b), b.grid)
        rho_b = charge_density(b)
        mask = residual_mask(b, x_step, exclude)
        scale = np.max(np.abs(rho_b))
        out.append(float(np.max(np.abs(res[mask])) / scale) if scale > 0 else 0.0)
    return np.array(out)


def evolve(
    state: FVState,
    config: SimConfig,
    *,
    check_stability: bool = True,
    track_continuity: bool = True,
) -> SimResult:
    """Integrate the two-component system from ``state`` to ``state.t + t_end``.

    Observables are recorded every ``record_every`` steps (and at the start);
    the continuity residual at a record costs one extra throw-away step.
    ``check_stability=False`` skips the dt guard so blow-up detection can be
    exercised.
    """
    if check_stability:
        config.check_stability(state.m, float(np.max(np.abs(state.potential))))
    state = state.copy()
    stepper = _Stepper(state, config)
    records = [observe(state, config.x_step, config.probe_offset)]
    snapshots = [state.copy()] if config.snapshot_every else []
    n_total = config.n_steps
    done = 0
    while done < n_total:
        chunk = min(config.record_every - done % config.record_every, n_total - done)
        if config.snapshot_every:
            chunk = min(chunk, config.snapshot_every - done % config.snapshot_every)
        before = None
        if track_continuity and chunk >= 1:
            stepper.advance(state, chunk - 1)
            before = state.copy()
            stepper.advance(state, 1)
        else:
            stepper.advance(state, chunk)
        done += chunk
        if config.snapshot_every and done % config.snapshot_every == 0:
            snapshots.append(state.copy())
        if done % config.record_every == 0 or done == n_total:
            rec = observe(state, config.x_step, config.probe_offset)
            if before is not None:
                after = state.copy()
                stepper.fork().advance(after, 1)
                res = continuity_residual([before, state, after], config.x_step)[0]
                rec = replace(rec, continuity_residual_max=res)
            records.append(rec)
    return SimResult(config=config, records=records, final=state, snapshots=snapshots, steps=done)


@dataclass(frozen=True)
class Measurement:
    R: float
    T: float
    Q_incident: float
    Q_left: float
    Q_right: float


def measure_R(result: SimResult, quiet_tol: float = 2e-3) -> Measurement:
    """Reflected and transmitted charge fractions at the end of a run.

    R = Q_left(t_end) / Q_incident with Q_incident the left-side charge at
    t = 0. T = Q_right(t_end)/Q_incident in magnitude; in the Klein regime the
    transmitted charge is negative and T = -Q_right/Q_incident, so R - T = 1.
    Probe currents near the step must have died down to ``quiet_tol`` of the
    largest incident probe current.
    """
    recs = result.records
    q_inc = result.Q_incident
    if not q_inc > 0:
        raise MeasurementError("incident charge is not positive")
    peak = max(max(abs(r.J_probe_left), abs(r.J_probe_right)) for r in recs)
    last = recs[-1]
    if peak > 0 and max(abs(last.J_probe_left), abs(last.J_probe_right)) > quiet_tol * peak:
        raise MeasurementError(
            f"probes not quiescent at t={last.t:.6g} "
            f"(|J|/peak = {max(abs(last.J_probe_left), abs(last.J_probe_right)) / peak:.3g}); extend t_end"
        )
    R = last.Q_left / q_inc
    T = abs(last.Q_right) / q_inc
    return Measurement(R=R, T=T, Q_incident=q_inc, Q_left=last.Q_left, Q_right=last.Q_right)


def centroid_after(result: SimResult, t_from: float | None = None) -> np.ndarray:
    t_from = result.config.measurement_time if t_from is None else t_from
    t = result.series("t")
    return result.series("centroid_right")[t >= (t_from or 0.0)]


# second-order oracle


def kg_oracle_step(kg: KGState, config: SimConfig, nsteps: int = 1, dt: float | None = None) -> KGState:
    """Advance psi with the second-order equation directly.

    psi_tt = d_xx psi - (m^2 - V^2) psi - 2 i V psi_t, plus the matching
    damping terms inside absorbing layers.
    """
    kg = kg.copy()
    g = kg.grid
    dt = config.dt if dt is None else dt
    gamma = g.damping()
    step = kernels.kg_leapfrog if config.integrator == "leapfrog" else kernels.kg_rk4
    bad = step(kg.psi, kg.psi_dot, kg.potential, gamma, kg.m, g.dx, dt, nsteps, g.stencil_order, g.periodic)
    if bad >= 0:
        raise InstabilityError(f"second-order oracle blew up near t={kg.t + bad * dt:.6g}")
    kg.t += nsteps * dt
    return kg


@dataclass
class KGResult:
    times: np.ndarray
    Q_left: np.ndarray
    Q_right: np.ndarray
    final: KGState


def kg_evolve(kg: KGState, config: SimConfig, dt: float | None = None, x_step: float | None = None) -> KGResult:
    dt = config.dt if dt is None else dt
    x_step = config.x_step if x_step is None else x_step
    n_total = int(round(config.t_end / dt))
    every = max(1, int(round(config.record_every * config.dt / dt)))
    right = kg.grid.x >= x_step

    def charges(s):
        rho = kg_charge_density(s)
        return rho[~right].sum() * s.grid.dx, rho[right].sum() * s.grid.dx

    times, ql, qr = [kg.t], *[[v] for v in charges(kg)]
    done = 0
    while done < n_total:
        chunk = min(every, n_total - done)
        kg = kg_oracle_step(kg, config, chunk, dt=dt)
        done += chunk
        a, b = charges(kg)
        times.append(kg.t)
        ql.append(a)
        qr.append(b)
    return KGResult(times=np.array(times), Q_left=np.array(ql), Q_right=np.array(qr), final=kg)


# scenario geometry


@dataclass(frozen=True)
class PacketPlan:
    params: ParticleParams
    step: StepPotential
    packet: WavePacketSpec
    config: SimConfig
    regime: Regime

    def initial_state(self) -> FVState:
        return init_gaussian_packet(self.packet, self.config.grid, self.step, self.params.m)

    def with_dt(self, dt: float) -> "PacketPlan":
        every = max(1, int(round(self.config.record_every * self.config.dt / dt)))
        return replace(self, config=replace(self.config, dt=dt, record_every=every))


def plan_packet_run(
    E: float,
    V0: float,
    m: float = 1.0,
    *,
    sigma_x: float = 40.0,
    dx: float = 0.05,
    dt: float | None = None,
    cfl_guard: float = 0.5,
    boundary: str = "periodic",
    integrator: Integrator = "RK4",
    stencil_order: int = 4,
    smoothing_width: float = 0.0,
    x_step: float = 0.0,
    n_records: int = 120,
    absorb_width: int = 64,
) -> PacketPlan:
    """Lay out a grid and run length that cleanly separate the outgoing packets.

    The packet starts 6 sigma left of the step, interaction is over once the
    incident centre would be 4 sigma past it, and the run ends at 5.5 sigma
    so reflected and transmitted packets sit well clear of the step. The
    grid covers every packet tail to ~1e-8 at all times.
    """
    params = ParticleParams(m=m, E=E)
    params.require_moving()
    regime = classify_regime(E, V0, m)
    p0 = params.p
    v_in = p0 / E
    sep = 6.0 * sigma_x
    x0 = x_step - sep
    t_hit = sep / v_in
    t_meas = (sep + 4.0 * sigma_x) / v_in
    t_end = (sep + 5.5 * sigma_x) / v_in
    x_lo = x0 - 6.5 * sigma_x
    x_hi = x_step + 6.0 * sigma_x
    if regime.is_oscillatory:
        pp = select_pprime_branch(E, V0, m)
        v_t = abs(pp / (E - V0))
        sigma_t = sigma_x * v_t / v_in
        x_hi = max(x_hi, x_step + v_t * (t_end - t_hit) + 6.5 * sigma_t)
    elif regime is Regime.EVANESCENT:
        q = math.sqrt(-transmitted_momentum_squared(E, V0, m))
        x_hi = max(x_hi, x_step + 30.0 / q)
    kw = dict(boundary=boundary, stencil_order=stencil_order)
    if boundary == "absorbing":
        pad = absorb_width * dx
        x_lo -= pad
        x_hi += pad
        kw["absorb_width"] = absorb_width
    # the step sits midway between two grid points; sampling V0/2 on the step
    # itself biases R by O(10 dx^2) in the Klein regime
    grid = Grid1D.covering(x_lo, x_hi, dx, anchor=x_step + 0.5 * dx, **kw)
    v_max = max(abs(V0), 0.0)
    if dt is None:
        bound = stability_bound(grid, m, v_max, integrator)
        n_sub = math.ceil(t_end / min(cfl_guard * bound, ACCURACY_DT_TIMES_E / E))
        dt = t_end / n_sub
    n_steps = int(round(t_end / dt))
    config = SimConfig(
        grid=grid,
        dt=dt,
        t_end=n_steps * dt,
        integrator=integrator,
        measurement_time=t_meas,
        cfl_guard=cfl_guard,
        record_every=max(1, n_steps // n_records),
        x_step=x_step,
        probe_offset=sigma_x / 2,
    )
    packet = WavePacketSpec(x0=x0, sigma_x=sigma_x, p0=p0)
    return PacketPlan(
        params=params,
        step=StepPotential(V0=V0, smoothing_width=smoothing_width, x_step=x_step),
        packet=packet,
        config=config,
        regime=regime,
    )


def run_plan(plan: PacketPlan, **kw) -> SimResult:
    plan.packet.check_right_moving()
    return evolve(plan.initial_state(), plan.config, **kw)


def free_packet_plan(p0: float = 2.0, sigma_x: float = 2.0, m: float = 1.0, dx: float = 0.1,
                     half_length: float = 20.0, t_end: float = 1.0, dt: float | None = None,
                     stencil_order: int = 4) -> tuple[FVState, SimConfig]:
    """Small periodic V = 0 setup used for convergence studies."""
    grid = Grid1D.symmetric(half_length, dx, stencil_order=stencil_order)
    dt = 0.4 * dx * dx * m if dt is None else dt
    n = int(round(t_end / dt))
    spec = WavePacketSpec(x0=0.0, sigma_x=sigma_x, p0=p0)
    state = init_gaussian_packet(spec, grid, np.zeros(grid.n), m, check_overlap=False)
    cfg = SimConfig(grid=grid, dt=dt, t_end=n * dt, record_every=max(1, n), cfl_guard=0.9)
    return state, cfg
