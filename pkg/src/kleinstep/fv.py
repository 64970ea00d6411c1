"""Two-component (phi, chi) form of the Klein-Gordon field on a uniform grid.

phi carries the particle-like part and chi the antiparticle-like part of
psi = phi + chi. With hbar = c = 1 the pair obeys

    i phi_t = (V + m) phi - (1/2m) d_xx (phi + chi)
    i chi_t = (V - m) chi + (1/2m) d_xx (phi + chi)

and the conserved charge density is |phi|^2 - |chi|^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .core import DomainError
from .kernels import laplacian_coefficients

Boundary = Literal["periodic", "absorbing"]

MIN_ABSORB_POINTS = 16


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    dx: float
    n: int
    boundary: Boundary = "periodic"
    stencil_order: int = 4
    absorb_width: int = 0  # points per side; only used with absorbing boundaries
    absorb_strength: float = 0.5  # peak damping rate at the outer edge

    def __post_init__(self):
        if not self.dx > 0:
            raise DomainError("grid spacing must be positive")
        if self.n < 8:
            raise DomainError("grid needs at least 8 points")
        if self.boundary not in ("periodic", "absorbing"):
            raise DomainError(f"unknown boundary {self.boundary!r}")
        if self.stencil_order not in (2, 4):
            raise DomainError("stencil_order must be 2 or 4")
        if self.boundary == "absorbing":
            if self.absorb_width < MIN_ABSORB_POINTS:
                raise DomainError(f"absorbing layer needs >= {MIN_ABSORB_POINTS} points")
            if 2 * self.absorb_width >= self.n:
                raise DomainError("absorbing layers cover the whole grid")

    @classmethod
    def covering(cls, x_lo: float, x_hi: float, dx: float, anchor: float = 0.0, **kw) -> "Grid1D":
        """Smallest grid spanning [x_lo, x_hi] with ``anchor`` on a grid point."""
        k_lo = math.floor((x_lo - anchor) / dx)
        k_hi = math.ceil((x_hi - anchor) / dx)
        return cls(x_min=anchor + k_lo * dx, dx=dx, n=k_hi - k_lo + 1, **kw)

    @classmethod
    def symmetric(cls, half_length: float, dx: float, **kw) -> "Grid1D":
        """Even-sized grid with x_k = -x_{n-1-k}; the origin falls between two points."""
        n = 2 * math.ceil(half_length / dx)
        return cls(x_min=-0.5 * (n - 1) * dx, dx=dx, n=n, **kw)

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    @property
    def x_max(self) -> float:
        return self.x_min + self.dx * (self.n - 1)

    @property
    def is_symmetric(self) -> bool:
        return abs(self.x_min + self.x_max) <= 1e-9 * self.dx

    def damping(self) -> np.ndarray:
        """Quadratic damping ramp inside the absorbing layers, zero elsewhere."""
        g = np.zeros(self.n)
        if self.boundary == "absorbing":
            w = self.absorb_width
            ramp = self.absorb_strength * ((np.arange(w, 0, -1)) / w) ** 2
            g[:w] = ramp
            g[-w:] = ramp[::-1]
        return g

    def interior(self) -> np.ndarray:
        """Mask of points outside the absorbing layers."""
        mask = np.ones(self.n, dtype=bool)
        if self.boundary == "absorbing":
            mask[: self.absorb_width] = False
            mask[-self.absorb_width :] = False
        return mask

    def index_of(self, x: float) -> int:
        return int(round((x - self.x_min) / self.dx))

    def laplacian_symbol_max(self) -> float:
        """Largest eigenvalue of -D2 (attained at the Nyquist mode)."""
        return (16.0 / 3.0 if self.stencil_order == 4 else 4.0) / self.dx**2


def _pad(f: np.ndarray, grid: Grid1D, width: int = 2) -> np.ndarray:
    if grid.periodic:
        return np.pad(f, width, mode="wrap")
    return np.pad(f, width)


def d2(f: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Central second derivative; zero ghost values outside a non-periodic grid."""
    c0, c1, c2 = laplacian_coefficients(grid.stencil_order)
    g = _pad(f, grid)
    return (c0 * g[2:-2] + c1 * (g[1:-3] + g[3:-1]) + c2 * (g[:-4] + g[4:])) / grid.dx**2


def d1(f: np.ndarray, grid: Grid1D) -> np.ndarray:
    g = _pad(f, grid)
    if grid.stencil_order == 4:
        return (8.0 * (g[3:-1] - g[1:-3]) - (g[4:] - g[:-4])) / (12.0 * grid.dx)
    return (g[3:-1] - g[1:-3]) / (2.0 * grid.dx)


def laplacian_symbol(k: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Eigenvalue of -D2 on exp(i k x)."""
    th = np.asarray(k) * grid.dx
    if grid.stencil_order == 4:
        return (30.0 - 32.0 * np.cos(th) + 2.0 * np.cos(2 * th)) / (12.0 * grid.dx**2)
    return (2.0 - 2.0 * np.cos(th)) / grid.dx**2


@dataclass
class FVState:
    phi: np.ndarray
    chi: np.ndarray
    potential: np.ndarray
    grid: Grid1D
    m: float = 1.0
    t: float = 0.0

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=np.complex128)
        self.chi = np.asarray(self.chi, dtype=np.complex128)
        self.potential = np.asarray(self.potential, dtype=float)
        shape = (self.grid.n,)
        if self.phi.shape != shape or self.chi.shape != shape or self.potential.shape != shape:
            raise DomainError("phi, chi and V must be sampled on the same grid")

    def copy(self) -> "FVState":
        return replace(self, phi=self.phi.copy(), chi=self.chi.copy(), potential=self.potential.copy())

    @property
    def psi(self) -> np.ndarray:
        return self.phi + self.chi


@dataclass
class KGState:
    psi: np.ndarray
    psi_dot: np.ndarray
    potential: np.ndarray
    grid: Grid1D
    m: float = 1.0
    t: float = 0.0

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=np.complex128)
        self.psi_dot = np.asarray(self.psi_dot, dtype=np.complex128)
        self.potential = np.asarray(self.potential, dtype=float)
        shape = (self.grid.n,)
        if self.psi.shape != shape or self.psi_dot.shape != shape or self.potential.shape != shape:
            raise DomainError("psi, psi_dot and V must be sampled on the same grid")

    def copy(self) -> "KGState":
        return replace(self, psi=self.psi.copy(), psi_dot=self.psi_dot.copy(), potential=self.potential.copy())


def sample_potential(potential, grid: Grid1D) -> np.ndarray:
    return np.asarray(potential(grid.x), dtype=float)


def fv_split(kg: KGState) -> FVState:
    m, V = kg.m, kg.potential
    phi = 0.5 * ((1.0 - V / m) * kg.psi + (1j / m) * kg.psi_dot)
    chi = 0.5 * ((1.0 + V / m) * kg.psi - (1j / m) * kg.psi_dot)
    return FVState(phi=phi, chi=chi, potential=V, grid=kg.grid, m=m, t=kg.t)


def fv_reconstruct(fv: FVState) -> KGState:
    m, V = fv.m, fv.potential
    psi = fv.phi + fv.chi
    psi_dot = -1j * m * ((fv.phi - fv.chi) + (V / m) * psi)
    return KGState(psi=psi, psi_dot=psi_dot, potential=V, grid=fv.grid, m=m, t=fv.t)


def fv_rhs(fv: FVState) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives (phi_t, chi_t), including absorbing-layer damping."""
    m, V = fv.m, fv.potential
    kin = d2(fv.phi + fv.chi, fv.grid) / (2.0 * m)
    gamma = fv.grid.damping()
    dphi = -1j * ((V + m) * fv.phi - kin) - gamma * fv.phi
    dchi = -1j * ((V - m) * fv.chi + kin) - gamma * fv.chi
    return dphi, dchi


def charge_density(fv: FVState) -> np.ndarray:
    return np.abs(fv.phi) ** 2 - np.abs(fv.chi) ** 2


def total_charge(fv: FVState) -> float:
    return float(np.sum(charge_density(fv)) * fv.grid.dx)


def kg_charge_density(kg: KGState) -> np.ndarray:
    """(i/2m)(psi* psi_t - psi psi_t*) - (V/m)|psi|^2."""
    return -np.imag(np.conj(kg.psi) * kg.psi_dot) / kg.m - kg.potential / kg.m * np.abs(kg.psi) ** 2


def psi_current(psi: np.ndarray, grid: Grid1D, m: float) -> np.ndarray:
    """(i/2m)(psi d psi* - psi* d psi) = Im(psi* d psi)/m."""
    return np.imag(np.conj(psi) * d1(psi, grid)) / m


def current_density(fv: FVState) -> np.ndarray:
    return psi_current(fv.psi, fv.grid, fv.m)


def current_density_components(fv: FVState) -> np.ndarray:
    """Same current written as the four phi/chi cross terms."""
    g, m = fv.grid, fv.m
    phi, chi = fv.phi, fv.chi
    dphi, dchi = d1(phi, g), d1(chi, g)

    def term(u, du, v, dv):
        # (i/2m)(u dv* - v* du)
        return u * np.conj(dv) - np.conj(v) * du

    total = term(phi, dphi, phi, dphi) + term(chi, dchi, chi, dchi)
    total += term(phi, dphi, chi, dchi) + term(chi, dchi, phi, dphi)
    return np.real(1j / (2 * m) * total)


@dataclass(frozen=True)
class ContentReport:
    particle_norm: float
    antiparticle_norm: float
    particle_dominant: np.ndarray = field(repr=False)

    @property
    def particle_fraction(self) -> float:
        tot = self.particle_norm + self.antiparticle_norm
        return self.particle_norm / tot if tot > 0 else math.nan

    @property
    def antiparticle_fraction(self) -> float:
        tot = self.particle_norm + self.antiparticle_norm
        return self.antiparticle_norm / tot if tot > 0 else math.nan

    @property
    def dominant(self) -> str:
        if self.particle_norm > self.antiparticle_norm:
            return "particle"
        if self.antiparticle_norm > self.particle_norm:
            return "antiparticle"
        return "balanced"


def content_classify(fv: FVState, mask: np.ndarray | None = None) -> ContentReport:
    """Integrated |phi|^2 and |chi|^2, optionally restricted to ``mask``."""
    a2 = np.abs(fv.phi) ** 2
    c2 = np.abs(fv.chi) ** 2
    sel = slice(None) if mask is None else mask
    dx = fv.grid.dx
    return ContentReport(
        particle_norm=float(np.sum(a2[sel]) * dx),
        antiparticle_norm=float(np.sum(c2[sel]) * dx),
        particle_dominant=a2 > c2,
    )


def pt_transform(fv: FVState) -> FVState:
    """phi~(x, t) = chi(-x, -t), chi~(x, t) = phi(-x, -t), V~(x) = -V(-x).

    The grid must be mirror symmetric about the origin.
    """
    if not fv.grid.is_symmetric:
        raise DomainError("pt_transform needs a grid symmetric about x = 0")
    return FVState(
        phi=fv.chi[::-1].copy(),
        chi=fv.phi[::-1].copy(),
        potential=-fv.potential[::-1],
        grid=fv.grid,
        m=fv.m,
        t=-fv.t,
    )
