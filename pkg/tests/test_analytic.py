import math

import hypothesis.strategies as st
import mpmath
import numpy as np
import pytest
from hypothesis import assume, given

from kleinstep.analytic import (
    antiparticle_relabel,
    check_current_balance,
    flipped_pprime_branch,
    momentum_averaged_reflectivity,
    reflectivity,
    select_pprime_branch,
    solve_step,
    wave_currents,
)
from kleinstep.core import DomainError, ParticleParams, Regime, group_velocity

mpmath.mp.dps = 40


def mp_step(E, V0, m=1):
    """Independent high-precision evaluation of the matched plane waves."""
    E, V0, m = mpmath.mpf(E), mpmath.mpf(V0), mpmath.mpf(m)
    p = mpmath.sqrt(E**2 - m**2)
    k2 = (E - V0) ** 2 - m**2
    if k2 < 0:
        pp = 1j * mpmath.sqrt(-k2)
    else:
        pp = mpmath.sqrt(k2) * (1 if E - V0 > 0 else -1)
    b = (p - pp) / (p + pp)
    bp = 2 * p / (p + pp)
    return dict(p=p, pp=pp, b=b, bp=bp, R=abs(b) ** 2, rho_t=(E - V0) / m * abs(bp) ** 2)


def solve(E, V0, m=1.0, **kw):
    return solve_step(ParticleParams(m=m, E=E), V0, **kw)


energies = st.floats(min_value=1.0 + 1e-6, max_value=10.0)
steps = st.floats(min_value=0.0, max_value=20.0)
# V0 = 2E is the amplitude pole, covered separately
points = st.tuples(energies, steps).filter(lambda t: t[1] != 2 * t[0])


# --- worked values ---------------------------------------------------------


def test_klein_worked_values_against_mpmath():
    ref = mp_step("1.25", 3)
    s = solve(1.25, 3.0)
    c = wave_currents(s)
    assert s.regime is Regime.KLEIN
    assert s.p_prime == pytest.approx(-math.sqrt(2.0625), rel=1e-15)
    assert s.p_prime == pytest.approx(float(ref["pp"]), rel=1e-14)
    assert s.R == pytest.approx(float(ref["R"]), rel=1e-13)
    assert s.b_over_a.real == pytest.approx(float(ref["b"]), rel=1e-13)
    assert s.bprime_over_a.real == pytest.approx(float(ref["bp"]), rel=1e-13)
    assert c.rho_t == pytest.approx(float(ref["rho_t"]), rel=1e-13)
    assert c.rho_t < 0
    # frozen high-precision values
    assert s.R == pytest.approx(10.1514923157207750774, rel=1e-13)
    assert c.rho_t == pytest.approx(-8.36361923679058130803, rel=1e-13)
    assert c.j_t == pytest.approx(-6.86361923679058130803, rel=1e-13)
    assert c.j_r == pytest.approx(-7.61361923679058130803, rel=1e-13)
    assert c.j_i == 0.75


def test_free_step():
    s = solve(1.25, 0.0)
    assert s.b_over_a == 0 and s.bprime_over_a == 1 and s.R == 0
    c = wave_currents(s)
    assert (c.rho_i, c.j_i, c.rho_t, c.j_t, c.j_r) == (1.25, 0.75, 1.25, 0.75, 0.0)
    assert check_current_balance(s) == 0


def test_evanescent_example():
    s = solve(1.25, 2.0)
    q = float(mpmath.sqrt(mpmath.mpf(1) - mpmath.mpf("0.75") ** 2))
    assert s.regime is Regime.EVANESCENT
    assert s.q == pytest.approx(q, rel=1e-15)
    assert s.b_over_a == pytest.approx((0.75 - 1j * q) / (0.75 + 1j * q), rel=1e-15)
    assert s.R == 1.0
    c = wave_currents(s)
    assert c.j_t == 0 and abs(c.j_r) == c.j_i
    assert check_current_balance(s) <= 1e-12


def test_ordinary_example():
    s = solve(1.25, 0.1)
    ref = mp_step("1.25", "0.1")
    assert s.p_prime == pytest.approx(float(ref["pp"]), rel=1e-14)
    assert s.R == pytest.approx(float(ref["R"]), rel=1e-12)
    assert s.R == pytest.approx(0.0190943435768638, rel=1e-12)
    assert group_velocity(s.p_prime, 1.25, 0.1) == pytest.approx(0.493818117, rel=1e-8)


@pytest.mark.parametrize("V0", [0.25, 2.25])
def test_thresholds_are_finite_limits(V0):
    s = solve(1.25, V0)
    assert s.regime.is_threshold
    assert s.b_over_a == 1 and s.bprime_over_a == 2 and s.R == 1
    assert wave_currents(s).j_t == 0


# --- branch rule -----------------------------------------------------------


@pytest.mark.parametrize(
    "E, V0, expected",
    [(1.25, 0.1, math.sqrt(0.3225)), (1.25, 3.0, -math.sqrt(2.0625)), (1.25, 0.0, 0.75)],
)
def test_select_branch(E, V0, expected):
    assert select_pprime_branch(E, V0, 1.0) == pytest.approx(expected, rel=1e-15)


def test_select_branch_rejects_evanescent():
    with pytest.raises(DomainError):
        select_pprime_branch(1.25, 2.0, 1.0)


def test_flipped_branch_breaks_klein_signs_but_not_balance():
    s = solve(1.25, 3.0, branch_rule=flipped_pprime_branch)
    c = wave_currents(s)
    assert s.R < 1  # no Klein reflection
    assert c.j_t > 0 > c.rho_t  # charge and current disagree
    assert group_velocity(s.p_prime, 1.25, 3.0) < 0
    # the matching algebra balances currents for either root
    assert check_current_balance(s) <= 1e-12


# --- properties ------------------------------------------------------------


@given(points)
def test_matching_continuity(pt):
    E, V0 = pt
    s = solve(E, V0)
    assert abs(1 + s.b_over_a - s.bprime_over_a) <= 4 * math.ulp(max(abs(s.bprime_over_a), 1.0))


@given(points)
def test_regime_reflectivity(pt):
    E, V0 = pt
    s = solve(E, V0)
    assert s.R == pytest.approx(reflectivity(s), rel=1e-15)
    if s.regime is Regime.ORDINARY:
        assert s.R < 1
    elif s.regime is Regime.KLEIN:
        assert s.R > 1
    else:
        assert abs(s.R - 1) <= 1e-12


@given(points)
def test_current_balance(pt):
    E, V0 = pt
    assert check_current_balance(solve(E, V0)) <= 1e-12


@given(points)
def test_against_mpmath(pt):
    E, V0 = pt
    s = solve(E, V0)
    ref = mp_step(E, V0)
    assume(abs(E - V0 + 1) > 1e-6 and abs(abs(E - V0) - 1) > 1e-6)
    # p + p' is a cancellation near V0 = 2E; compare in the relative sense
    assert s.R == pytest.approx(float(ref["R"]), rel=1e-9)


@given(energies, st.floats(min_value=0.0, max_value=1.0))
def test_klein_sign_coherence(E, u):
    V0 = E + 1.0 + 1e-6 + 18.0 * u
    assume(V0 != 2 * E)  # pole, see test_exact_pole_is_infinite_not_an_error
    s = solve(E, V0)
    c = wave_currents(s)
    v = group_velocity(s.p_prime, E, V0, 1.0)
    assert c.rho_t < 0 and c.j_t < 0 and v > 0
    assert abs(c.rho_t * v - c.j_t) <= 4 * math.ulp(abs(c.j_t))


@given(energies, st.floats(min_value=0.0, max_value=1.0))
def test_ordinary_charge_transport(E, u):
    V0 = (E - 1.0) * u * 0.999
    s = solve(E, V0)
    c = wave_currents(s)
    v = group_velocity(s.p_prime, E, V0, 1.0)
    assert abs(c.rho_t * v - c.j_t) <= 4 * math.ulp(abs(c.j_t))


def test_pole_at_twice_energy():
    # p' = -p at V0 = 2E: R blows up, the balance check stays exact
    s = solve(1.25, 2.5 * (1 + 1e-12))
    assert s.R > 1e20
    assert check_current_balance(s) <= 1e-12


# --- antiparticle view -----------------------------------------------------


def test_relabel_klein():
    s = solve(1.25, 3.0)
    view = antiparticle_relabel(s)
    assert view.E_c == 1.75
    assert view.p_c == pytest.approx(math.sqrt(2.0625), rel=1e-15)
    assert view.direction == 1
    Ec, pc = view.operator_eigenvalues()
    assert Ec == pytest.approx(1.75, rel=1e-9)
    assert pc == pytest.approx(view.p_c, rel=1e-9)


def test_relabel_matches_lab_frame_wave():
    s = solve(1.25, 3.0)
    view = antiparticle_relabel(s)
    x = np.linspace(0.1, 5, 7)
    assert np.allclose(view.wave(x, 0.4), s.transmitted_wave(x, 0.4, local_frame=True), rtol=1e-13)


@pytest.mark.parametrize("V0", [2.25, 2.0, 0.1])
def test_relabel_outside_klein(V0):
    with pytest.raises(DomainError):
        antiparticle_relabel(solve(1.25, V0))


def test_momentum_averaged_reflectivity_tends_to_central():
    R0 = solve(1.25, 3.0).R
    wide = momentum_averaged_reflectivity(1.25, 3.0, 1.0, sigma_x=400.0)
    narrow = momentum_averaged_reflectivity(1.25, 3.0, 1.0, sigma_x=40.0)
    assert abs(wide / R0 - 1) < abs(narrow / R0 - 1) < 0.01


def test_exact_pole_is_infinite_not_an_error():
    s = solve(1.25, 2.5)
    assert s.p_prime == -0.75
    assert s.R == math.inf
    c = wave_currents(s)
    assert c.rho_t == -math.inf and c.j_t == -math.inf and c.j_r == -math.inf
    assert math.isnan(check_current_balance(s))
