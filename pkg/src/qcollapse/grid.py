"""Uniform 1-D grid, complex field states, and canonical state construction.

States are immutable value objects: every operation returns a new
WaveFunction and never mutates its inputs.  The grid is periodic, which is
what makes the spectral propagator exactly unitary; constructions therefore
reject states that put noticeable mass near the boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    BoundaryClipping,
    EmptySuperposition,
    GridMismatch,
    GridTooCoarse,
    ValidationError,
)

NORM_TOL = 1e-10
# Constructions reject > this much probability mass in the outer 5% of the
# grid, since periodic wrap-around would corrupt weak-interference tests.
EDGE_MASS_TOL = 1e-8
EDGE_FRACTION = 0.05


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid x_j = x_min + j*dx, j = 0..n_points-1."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        n = self.n_points
        if n < 16 or (n & (n - 1)) != 0:
            raise ValidationError(
                f"n_points must be a power of two >= 16, got {n}")
        if not self.x_max > self.x_min:
            raise ValidationError("x_max must exceed x_min")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @cached_property
    def x(self) -> np.ndarray:
        x = self.x_min + self.dx * np.arange(self.n_points)
        x.flags.writeable = False
        return x

    @cached_property
    def k(self) -> np.ndarray:
        """Angular wavenumbers matching numpy's FFT ordering."""
        k = 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)
        k.flags.writeable = False
        return k


@dataclass(frozen=True)
class PhysicalParams:
    """Mass and hbar; natural units by default."""

    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if self.mass <= 0 or self.hbar <= 0:
            raise ValidationError("mass and hbar must be positive")


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Complex amplitude field on a Grid1D."""

    grid: Grid1D
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128)
        if amps.shape != (self.grid.n_points,):
            raise ValidationError(
                f"amplitudes shape {amps.shape} does not match grid "
                f"({self.grid.n_points},)")
        if not np.all(np.isfinite(amps.view(np.float64))):
            raise ValidationError("amplitudes must be finite")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        a = self.amplitudes
        return math.sqrt(float(np.sum(a.real**2 + a.imag**2)) * self.grid.dx)

    def normalize(self) -> "WaveFunction":
        n = self.norm()
        if n == 0.0:
            raise ValidationError("cannot normalize the zero state")
        return WaveFunction(self.grid, self.amplitudes / n)

    def probability_density(self) -> np.ndarray:
        a = self.amplitudes
        return a.real**2 + a.imag**2

    def edge_mass(self) -> float:
        """Probability mass in the outer 5% of the grid (both sides)."""
        n_edge = max(1, int(self.grid.n_points * EDGE_FRACTION))
        rho = self.probability_density()
        return float(rho[:n_edge].sum() + rho[-n_edge:].sum()) * self.grid.dx


def inner_product(a: WaveFunction, b: WaveFunction) -> complex:
    """Grid inner product sum(conj(a)*b)*dx; antilinear in `a`."""
    if a.grid != b.grid:
        raise GridMismatch("states live on different grids")
    return complex(np.vdot(a.amplitudes, b.amplitudes)) * a.grid.dx


def make_gaussian(grid: Grid1D, center: float, sigma: float,
                  momentum: float = 0.0,
                  params: PhysicalParams = PhysicalParams()) -> WaveFunction:
    """Normalized Gaussian packet exp(-(x-c)^2/(4 sigma^2) + i p x / hbar).

    Has <x> = center, std x = sigma, <p> = momentum, std p = hbar/(2 sigma).
    """
    if sigma < 4.0 * grid.dx:
        raise GridTooCoarse(
            f"sigma={sigma} below 4*dx={4.0 * grid.dx}; packet unresolvable")
    p_max = 0.25 * math.pi * params.hbar / grid.dx
    if abs(momentum) > p_max:
        raise ValidationError(
            f"|momentum|={abs(momentum)} exceeds Nyquist headroom {p_max}")
    x = grid.x
    amps = np.exp(-((x - center) ** 2) / (4.0 * sigma**2)
                  + 1j * momentum * x / params.hbar)
    psi = WaveFunction(grid, amps).normalize()
    mass = psi.edge_mass()
    # Analytic tail beyond the grid, in case the grid truncates the packet.
    tail = 0.5 * (math.erfc((center - grid.x_min) / (math.sqrt(2) * sigma))
                  + math.erfc((grid.x_max - center) / (math.sqrt(2) * sigma)))
    if max(mass, tail) > EDGE_MASS_TOL:
        raise BoundaryClipping(
            f"boundary mass {max(mass, tail):.3g} exceeds {EDGE_MASS_TOL}")
    return psi


def superpose(branches) -> WaveFunction:
    """Renormalized sum(c_n * psi_n) over (coefficient, state) pairs."""
    branches = list(branches)
    if not branches:
        raise EmptySuperposition("need at least one branch")
    grid = branches[0][1].grid
    total = np.zeros(grid.n_points, dtype=np.complex128)
    for c, psi in branches:
        if psi.grid != grid:
            raise GridMismatch("superposition branches on different grids")
        total += complex(c) * psi.amplitudes
    return WaveFunction(grid, total).normalize()


def write_snapshot(psi: WaveFunction, path) -> None:
    """CSV snapshot `x,re,im`, one row per grid point, 17 significant digits."""
    with open(path, "w") as fh:
        fh.write("x,re,im\n")
        for x, a in zip(psi.grid.x, psi.amplitudes):
            fh.write(f"{x:.17g},{a.real:.17g},{a.imag:.17g}\n")


def read_snapshot(path) -> WaveFunction:
    """Read a CSV snapshot written by write_snapshot."""
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    x = data[:, 0]
    dx = x[1] - x[0]
    grid = Grid1D(x_min=float(x[0]), x_max=float(x[0] + dx * len(x)),
                  n_points=len(x))
    return WaveFunction(grid, data[:, 1] + 1j * data[:, 2])
