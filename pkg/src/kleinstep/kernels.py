"""Compiled time-stepping loops.

Every kernel advances fields in place and returns -1 on success or the index
of the step at which the positive norm sum |u|^2 grew more than tenfold (or
became non-finite). Loops are serial, so results are bitwise reproducible.
"""
from __future__ import annotations

import numba
import numpy as np

GROWTH_LIMIT = 10.0


def laplacian_coefficients(order: int) -> tuple[float, float, float]:
    """Central second-derivative weights (c0, c1, c2), unscaled by dx^2."""
    if order == 4:
        return -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0
    if order == 2:
        return -2.0, 1.0, 0.0
    raise ValueError(f"unsupported stencil order {order}")


@numba.njit(cache=True)
def _fill_ghosts(buf, n, periodic):
    if periodic:
        buf[0] = buf[n]
        buf[1] = buf[n + 1]
        buf[n + 2] = buf[2]
        buf[n + 3] = buf[3]
    else:
        buf[0] = 0.0
        buf[1] = 0.0
        buf[n + 2] = 0.0
        buf[n + 3] = 0.0


@numba.njit(cache=True)
def _lap_at(buf, i, c0, c1, c2):
    # buf is padded by two ghost cells on each side
    return c0 * buf[i + 2] + c1 * (buf[i + 1] + buf[i + 3]) + c2 * (buf[i] + buf[i + 4])


@numba.njit(cache=True)
def fv_rhs_kernel(phi, chi, V, gamma, m, inv_dx2, c0, c1, c2, periodic, buf, dphi, dchi):
    n = phi.shape[0]
    for i in range(n):
        buf[i + 2] = phi[i] + chi[i]
    _fill_ghosts(buf, n, periodic)
    s = inv_dx2 / (2.0 * m)
    for i in range(n):
        k = _lap_at(buf, i, c0, c1, c2) * s
        dphi[i] = -1j * ((V[i] + m) * phi[i] - k) - gamma[i] * phi[i]
        dchi[i] = -1j * ((V[i] - m) * chi[i] + k) - gamma[i] * chi[i]


@numba.njit(cache=True)
def _norm2(a, b):
    s = 0.0
    for i in range(a.shape[0]):
        s += a[i].real ** 2 + a[i].imag ** 2 + b[i].real ** 2 + b[i].imag ** 2
    return s


@numba.njit(cache=True)
def fv_rk4(phi, chi, V, gamma, m, dx, dt, nsteps, order, periodic):
    n = phi.shape[0]
    c0, c1, c2 = (-30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0) if order == 4 else (-2.0, 1.0, 0.0)
    inv = 1.0 / (dx * dx)
    buf = np.empty(n + 4, np.complex128)
    kp = np.empty_like(phi)
    kc = np.empty_like(phi)
    tp = np.empty_like(phi)
    tc = np.empty_like(phi)
    ap = np.empty_like(phi)
    ac = np.empty_like(phi)
    h = 0.5 * dt
    w = dt / 6.0
    prev = _norm2(phi, chi)
    for step in range(nsteps):
        fv_rhs_kernel(phi, chi, V, gamma, m, inv, c0, c1, c2, periodic, buf, kp, kc)
        for i in range(n):
            ap[i] = kp[i]
            ac[i] = kc[i]
            tp[i] = phi[i] + h * kp[i]
            tc[i] = chi[i] + h * kc[i]
        fv_rhs_kernel(tp, tc, V, gamma, m, inv, c0, c1, c2, periodic, buf, kp, kc)
        for i in range(n):
            ap[i] += 2.0 * kp[i]
            ac[i] += 2.0 * kc[i]
            tp[i] = phi[i] + h * kp[i]
            tc[i] = chi[i] + h * kc[i]
        fv_rhs_kernel(tp, tc, V, gamma, m, inv, c0, c1, c2, periodic, buf, kp, kc)
        for i in range(n):
            ap[i] += 2.0 * kp[i]
            ac[i] += 2.0 * kc[i]
            tp[i] = phi[i] + dt * kp[i]
            tc[i] = chi[i] + dt * kc[i]
        fv_rhs_kernel(tp, tc, V, gamma, m, inv, c0, c1, c2, periodic, buf, kp, kc)
        cur = 0.0
        for i in range(n):
            phi[i] += w * (ap[i] + kp[i])
            chi[i] += w * (ac[i] + kc[i])
            cur += phi[i].real ** 2 + phi[i].imag ** 2 + chi[i].real ** 2 + chi[i].imag ** 2
        if not np.isfinite(cur) or (prev > 0.0 and cur > GROWTH_LIMIT * prev):
            return step
        prev = cur
    return -1


@numba.njit(cache=True)
def fv_leapfrog(phi, chi, phi_prev, chi_prev, V, gamma, m, dx, dt, nsteps, order, periodic):
    """u_{n+1} = u_{n-1} + 2 dt F(u_n); on exit (phi, phi_prev) hold steps (N, N-1)."""
    n = phi.shape[0]
    c0, c1, c2 = (-30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0) if order == 4 else (-2.0, 1.0, 0.0)
    inv = 1.0 / (dx * dx)
    buf = np.empty(n + 4, np.complex128)
    kp = np.empty_like(phi)
    kc = np.empty_like(phi)
    prev = _norm2(phi, chi)
    for step in range(nsteps):
        fv_rhs_kernel(phi, chi, V, gamma, m, inv, c0, c1, c2, periodic, buf, kp, kc)
        cur = 0.0
        for i in range(n):
            a = phi_prev[i] + 2.0 * dt * kp[i]
            b = chi_prev[i] + 2.0 * dt * kc[i]
            phi_prev[i] = phi[i]
            chi_prev[i] = chi[i]
            phi[i] = a
            chi[i] = b
            cur += a.real ** 2 + a.imag ** 2 + b.real ** 2 + b.imag ** 2
        if not np.isfinite(cur) or (prev > 0.0 and cur > GROWTH_LIMIT * prev):
            return step
        prev = cur
    return -1


@numba.njit(cache=True)
def _kg_accel(psi, vel, V, gamma, m, inv_dx2, c0, c1, c2, periodic, buf, out):
    # psi'' + 2a psi' + (m^2 + a^2) psi = D2 psi,  a = gamma + iV
    n = psi.shape[0]
    for i in range(n):
        buf[i + 2] = psi[i]
    _fill_ghosts(buf, n, periodic)
    for i in range(n):
        a = gamma[i] + 1j * V[i]
        out[i] = _lap_at(buf, i, c0, c1, c2) * inv_dx2 - (m * m + a * a) * psi[i] - 2.0 * a * vel[i]


@numba.njit(cache=True)
def kg_leapfrog(psi, vel, V, gamma, m, dx, dt, nsteps, order, periodic):
    """Central-difference scheme for the second-order equation.

    Input and output are (psi, psi_dot) at one time level; the start-up uses
    a second-order Taylor step and psi_dot on exit is the centred difference,
    which costs one extra step.
    """
    n = psi.shape[0]
    c0, c1, c2 = (-30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0) if order == 4 else (-2.0, 1.0, 0.0)
    inv = 1.0 / (dx * dx)
    buf = np.empty(n + 4, np.complex128)
    acc = np.empty_like(psi)
    zero = np.zeros_like(psi)
    lap = np.empty_like(psi)
    _kg_accel(psi, vel, V, gamma, m, inv, c0, c1, c2, periodic, buf, acc)
    old = psi.copy()
    cur = np.empty_like(psi)
    for i in range(n):
        cur[i] = psi[i] + dt * vel[i] + 0.5 * dt * dt * acc[i]
    prev_norm = _norm2(psi, zero)
    for step in range(nsteps):
        # cur = level k+1, old = level k; advance to k+2 to get the velocity at k+1
        _kg_accel(cur, zero, V, gamma, m, inv, c0, c1, c2, periodic, buf, lap)
        nrm = 0.0
        for i in range(n):
            a = gamma[i] + 1j * V[i]
            new = (2.0 * cur[i] - (1.0 - a * dt) * old[i] + dt * dt * lap[i]) / (1.0 + a * dt)
            old[i] = cur[i]
            cur[i] = new
            nrm += old[i].real ** 2 + old[i].imag ** 2
        if not np.isfinite(nrm) or (prev_norm > 0.0 and nrm > GROWTH_LIMIT * prev_norm):
            return step
        prev_norm = nrm
        if step == nsteps - 1:
            break
    # here old = level N, cur = level N+1; need level N-1 for the centred velocity,
    # which was overwritten, so recover it from the scheme itself
    _kg_accel(old, zero, V, gamma, m, inv, c0, c1, c2, periodic, buf, lap)
    for i in range(n):
        a = gamma[i] + 1j * V[i]
        below = (2.0 * old[i] + dt * dt * lap[i] - (1.0 + a * dt) * cur[i]) / (1.0 - a * dt)
        psi[i] = old[i]
        vel[i] = (cur[i] - below) / (2.0 * dt)
    return -1


@numba.njit(cache=True)
def kg_rk4(psi, vel, V, gamma, m, dx, dt, nsteps, order, periodic):
    n = psi.shape[0]
    c0, c1, c2 = (-30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0) if order == 4 else (-2.0, 1.0, 0.0)
    inv = 1.0 / (dx * dx)
    buf = np.empty(n + 4, np.complex128)
    k = np.empty_like(psi)
    tp = np.empty_like(psi)
    tv = np.empty_like(psi)
    sp = np.empty_like(psi)
    sv = np.empty_like(psi)
    prev = _norm2(psi, vel)
    for step in range(nsteps):
        _kg_accel(psi, vel, V, gamma, m, inv, c0, c1, c2, periodic, buf, k)
        for i in range(n):
            sp[i] = vel[i]
            sv[i] = k[i]
            tp[i] = psi[i] + 0.5 * dt * vel[i]
            tv[i] = vel[i] + 0.5 * dt * k[i]
        _kg_accel(tp, tv, V, gamma, m, inv, c0, c1, c2, periodic, buf, k)
        for i in range(n):
            sp[i] += 2.0 * tv[i]
            sv[i] += 2.0 * k[i]
            a = tv[i]
            tp[i] = psi[i] + 0.5 * dt * a
            tv[i] = vel[i] + 0.5 * dt * k[i]
        _kg_accel(tp, tv, V, gamma, m, inv, c0, c1, c2, periodic, buf, k)
        for i in range(n):
            sp[i] += 2.0 * tv[i]
            sv[i] += 2.0 * k[i]
            a = tv[i]
            tp[i] = psi[i] + dt * a
            tv[i] = vel[i] + dt * k[i]
        _kg_accel(tp, tv, V, gamma, m, inv, c0, c1, c2, periodic, buf, k)
        cur = 0.0
        for i in range(n):
            psi[i] += dt / 6.0 * (sp[i] + tv[i])
            vel[i] += dt / 6.0 * (sv[i] + k[i])
            cur += psi[i].real ** 2 + psi[i].imag ** 2 + vel[i].real ** 2 + vel[i].imag ** 2
        if not np.isfinite(cur) or (prev > 0.0 and cur > GROWTH_LIMIT * prev):
            return step
        prev = cur
    return -1
