"""Expectation values, packet summaries, classicality gates and residuals.

Everything here is a pure read-only function over immutable states.  The
wave-packet gate quantifies the usual ">>" dominance condition as a
configurable ratio threshold and the Taylor-closure condition as a relative
tolerance, so verdicts are reproducible.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Sequence, Tuple

import numpy as np

from .errors import (
    NonHermitianResidue,
    NonUniformSampling,
    ObservableNotPositiveOnSupport,
    TooFewPackets,
    ValidationError,
)
from .grid import PhysicalParams, WaveFunction, inner_product
from .propagate import Potential

HERMITICITY_TOL = 1e-6
VARIANCE_CLAMP_TOL = 1e-9
# Containment width multiplier used by the gate's "practically certainly
# placed" test; +-3 std x covers 99.7% of a Gaussian, the default
# mass_threshold of 0.99 is meaningless at the bare interval width.
GATE_CONTAINMENT_K = 6.0


@dataclass(frozen=True)
class ObservableSpec:
    """Position polynomial A(x) = sum a_k x^k, momentum, or momentum squared."""

    kind: str
    coefficients: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("position_poly", "momentum", "momentum_squared"):
            raise ValidationError(f"unknown observable kind {self.kind!r}")
        if self.kind == "position_poly":
            coeffs = tuple(float(c) for c in self.coefficients)
            if not coeffs or len(coeffs) > 9:
                raise ValidationError("position_poly degree must be <= 8")
            if not all(np.isfinite(coeffs)):
                raise ValidationError("coefficients must be finite")
            object.__setattr__(self, "coefficients", coeffs)

    @staticmethod
    def position_poly(coefficients: Sequence[float]) -> "ObservableSpec":
        return ObservableSpec("position_poly", tuple(coefficients))

    @staticmethod
    def position(shift: float = 0.0) -> "ObservableSpec":
        """A(x) = x + shift."""
        return ObservableSpec("position_poly", (shift, 1.0))

    @staticmethod
    def momentum() -> "ObservableSpec":
        return ObservableSpec("momentum")

    @staticmethod
    def momentum_squared() -> "ObservableSpec":
        return ObservableSpec("momentum_squared")

    def classical_value(self, x: np.ndarray | float):
        if self.kind != "position_poly":
            raise ValidationError("classical_value only defined for position_poly")
        return np.polynomial.polynomial.polyval(x, self.coefficients)


@dataclass(frozen=True)
class PacketSummary:
    """Position/momentum moments plus the support interval of a state."""

    exp_x: float
    std_x: float
    exp_p: float
    std_p: float
    support: Tuple[float, float]
    mass_in_support: float

    @property
    def uncertainty_product(self) -> float:
        return self.std_x * self.std_p


@dataclass(frozen=True)
class GateConfig:
    """Thresholds quantifying the wave-packet approximation conditions."""

    eta: float = 10.0          # dominance ratio standing in for ">>"
    k: float = 1.0             # support interval width multiplier
    taylor_tol: float = 0.05   # relative tolerance for <A> ~ A(<x>)
    mass_threshold: float = 0.99

    def __post_init__(self):
        if self.eta <= 1:
            raise ValidationError("eta must exceed 1")
        if self.k <= 0:
            raise ValidationError("k must be positive")
        if not 0 < self.taylor_tol < 1:
            raise ValidationError("taylor_tol must lie in (0, 1)")
        if not 0.5 < self.mass_threshold < 1:
            raise ValidationError("mass_threshold must lie in (0.5, 1)")


@dataclass(frozen=True)
class GateVerdict:
    is_wave_packet: bool
    per_observable: Tuple[Tuple[ObservableSpec, float, float], ...]
    uncertainty_product: float
    mass_in_support: float


@dataclass(frozen=True)
class OrderParameters:
    """Minimum pairwise packet separation against its critical value."""

    min_pairwise_separation: float
    critical_value: float

    @property
    def transition(self) -> bool:
        return self.min_pairwise_separation >= self.critical_value


@dataclass(frozen=True)
class EhrenfestResiduals:
    """Ehrenfest and Newtonian-limit residuals at interior sample times."""

    times: np.ndarray
    residual_x: np.ndarray       # |m d<x>/dt - <p>|
    residual_p: np.ndarray       # |d<p>/dt + <dV/dx>|
    residual_newton: np.ndarray  # |d<p>/dt + dV(<x>)/d<x>|


def apply_observable(psi: WaveFunction, a: ObservableSpec,
                     params: PhysicalParams) -> np.ndarray:
    """Amplitudes of A|psi> (not normalized)."""
    if a.kind == "position_poly":
        return a.classical_value(psi.grid.x) * psi.amplitudes
    phi = np.fft.fft(psi.amplitudes)
    p = params.hbar * psi.grid.k
    power = 1 if a.kind == "momentum" else 2
    return np.fft.ifft(p**power * phi)


def _expect_raw(psi: WaveFunction, op_amps: np.ndarray, dx: float) -> float:
    val = complex(np.vdot(psi.amplitudes, op_amps)) * dx
    if abs(val.imag) > HERMITICITY_TOL:
        raise NonHermitianResidue(
            f"imaginary residue {val.imag:.3g} exceeds {HERMITICITY_TOL}")
    return val.real


def expectation(psi: WaveFunction, a: ObservableSpec,
                params: PhysicalParams = PhysicalParams()) -> float:
    """<A> = (psi, A psi) with the hermiticity residue checked and discarded."""
    return _expect_raw(psi, apply_observable(psi, a, params), psi.grid.dx)


def _second_moment(psi: WaveFunction, a: ObservableSpec,
                   params: PhysicalParams) -> float:
    dx = psi.grid.dx
    if a.kind == "position_poly":
        rho = psi.probability_density()
        vals = a.classical_value(psi.grid.x)
        return float(np.sum(vals**2 * rho)) * dx
    phi = np.fft.fft(psi.amplitudes)
    p = params.hbar * psi.grid.k
    power = 2 if a.kind == "momentum" else 4
    # Parseval: sum_k |phi_k|^2 * dx / N equals the norm^2.
    weight = (phi.real**2 + phi.imag**2) * dx / psi.grid.n_points
    return float(np.sum(p**power * weight))


def std_dev(psi: WaveFunction, a: ObservableSpec,
            params: PhysicalParams = PhysicalParams()) -> float:
    """sqrt(<A^2> - <A>^2), clamped at zero with a warning on real excursions."""
    mean = expectation(psi, a, params)
    var = _second_moment(psi, a, params) - mean**2
    if var < 0:
        if var < -VARIANCE_CLAMP_TOL:
            warnings.warn(
                f"negative variance {var:.3g} clamped to zero", RuntimeWarning)
        var = 0.0
    return float(np.sqrt(var))


def packet_summary(psi: WaveFunction, cfg: GateConfig = GateConfig(),
                   params: PhysicalParams = PhysicalParams()) -> PacketSummary:
    """Moments, the support interval (<x> +- k std x / 2) and its mass."""
    x_obs = ObservableSpec.position()
    p_obs = ObservableSpec.momentum()
    exp_x = expectation(psi, x_obs, params)
    sx = std_dev(psi, x_obs, params)
    exp_p = expectation(psi, p_obs, params)
    sp = std_dev(psi, p_obs, params)
    half = 0.5 * cfg.k * sx
    lo, hi = exp_x - half, exp_x + half
    rho = psi.probability_density()
    inside = (psi.grid.x >= lo) & (psi.grid.x <= hi)
    mass = float(np.sum(rho[inside])) * psi.grid.dx
    return PacketSummary(exp_x=exp_x, std_x=sx, exp_p=exp_p, std_p=sp,
                         support=(lo, hi), mass_in_support=min(mass, 1.0))


def wave_packet_gate(psi: WaveFunction, observables: Sequence[ObservableSpec],
                     cfg: GateConfig = GateConfig(),
                     params: PhysicalParams = PhysicalParams()) -> GateVerdict:
    """Classicality gate: dominance ratio, Taylor closure and containment.

    Every position polynomial must be strictly positive on the support
    interval, which is the choosability condition that makes a failed ratio
    test meaningful.
    """
    observables = list(observables)
    if not observables:
        raise ValidationError("need at least one observable")
    summary = packet_summary(psi, cfg, params)
    # Containment is judged on a wide interval regardless of cfg.k; see
    # GATE_CONTAINMENT_K.
    wide = packet_summary(psi, replace(cfg, k=max(cfg.k, GATE_CONTAINMENT_K)),
                          params)
    lo, hi = summary.support
    grid_pts = psi.grid.x[(psi.grid.x >= lo) & (psi.grid.x <= hi)]
    probe = np.append(grid_pts, summary.exp_x)

    rows = []
    passed = wide.mass_in_support >= cfg.mass_threshold
    for obs in observables:
        if obs.kind == "position_poly":
            if np.any(obs.classical_value(probe) <= 0.0):
                raise ObservableNotPositiveOnSupport(
                    f"A(x) not strictly positive on support ({lo}, {hi})")
            classical = float(obs.classical_value(summary.exp_x))
        elif obs.kind == "momentum":
            classical = summary.exp_p
        else:
            classical = summary.exp_p**2
        mean = expectation(psi, obs, params)
        spread = std_dev(psi, obs, params)
        ratio = abs(mean) / spread if spread > 0 else np.inf
        taylor_err = abs(mean - classical) / abs(mean) if mean != 0 else np.inf
        rows.append((obs, ratio, taylor_err))
        passed = passed and ratio >= cfg.eta and taylor_err <= cfg.taylor_tol
    return GateVerdict(is_wave_packet=passed, per_observable=tuple(rows),
                       uncertainty_product=summary.uncertainty_product,
                       mass_in_support=wide.mass_in_support)


def weak_interference(summaries: Sequence[PacketSummary],
                      simplified: bool = False) -> np.ndarray:
    """Pairwise weak-interference matrix.

    Entry (n, m) is True iff |<x>_n - <x>_m| >= (std_n + std_m)/2 (inclusive).
    With simplified=True the common-width form |<x>_n - <x>_m| >= mean width
    is reported instead.  Diagonal is False by definition.
    """
    if len(summaries) < 2:
        raise TooFewPackets("need at least two packet summaries")
    centers = np.array([s.exp_x for s in summaries])
    widths = np.array([s.std_x for s in summaries])
    sep = np.abs(centers[:, None] - centers[None, :])
    if simplified:
        crit = np.full_like(sep, float(np.mean(widths)))
    else:
        crit = 0.5 * (widths[:, None] + widths[None, :])
    out = sep >= crit
    np.fill_diagonal(out, False)
    return out


def order_parameters(branch_summaries: Sequence[PacketSummary]) -> OrderParameters:
    """Min pairwise separation vs the max pairwise half-width-sum threshold."""
    if len(branch_summaries) < 2:
        raise TooFewPackets("need at least two branches")
    centers = np.array([s.exp_x for s in branch_summaries])
    widths = np.array([s.std_x for s in branch_summaries])
    iu = np.triu_indices(len(centers), k=1)
    sep = np.abs(centers[:, None] - centers[None, :])[iu]
    crit = (0.5 * (widths[:, None] + widths[None, :]))[iu]
    return OrderParameters(min_pairwise_separation=float(sep.min()),
                           critical_value=float(crit.max()))


def ehrenfest_residual(trajectory: Sequence[Tuple[float, WaveFunction]],
                       v: Potential,
                       params: PhysicalParams = PhysicalParams()
                       ) -> EhrenfestResiduals:
    """Centered-difference residuals of the Ehrenfest relations.

    residual_x and residual_p test the exact relations; residual_newton uses
    the classical force at <x> instead of the averaged force, which only
    agrees within the wave-packet approximation (or for linear forces).
    """
    if len(trajectory) < 3:
        raise ValidationError("need at least three trajectory samples")
    times = np.array([t for t, _ in trajectory])
    dts = np.diff(times)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=0.0):
        raise NonUniformSampling("trajectory samples must be uniformly spaced")
    dt = float(dts[0])

    x_obs = ObservableSpec.position()
    p_obs = ObservableSpec.momentum()
    grid = trajectory[0][1].grid
    grad = v.gradient(grid, params)
    exp_x = np.empty(len(trajectory))
    exp_p = np.empty(len(trajectory))
    exp_f = np.empty(len(trajectory))
    for i, (_, psi) in enumerate(trajectory):
        exp_x[i] = expectation(psi, x_obs, params)
        exp_p[i] = expectation(psi, p_obs, params)
        exp_f[i] = float(np.sum(grad * psi.probability_density())) * grid.dx

    dxdt = (exp_x[2:] - exp_x[:-2]) / (2.0 * dt)
    dpdt = (exp_p[2:] - exp_p[:-2]) / (2.0 * dt)
    grad_at_mean = _gradient_at(v, exp_x[1:-1], params)
    return EhrenfestResiduals(
        times=times[1:-1],
        residual_x=np.abs(params.mass * dxdt - exp_p[1:-1]),
        residual_p=np.abs(dpdt + exp_f[1:-1]),
        residual_newton=np.abs(dpdt + grad_at_mean),
    )


def _gradient_at(v: Potential, x: np.ndarray, params: PhysicalParams) -> np.ndarray:
    if v.kind == "free":
        return np.zeros_like(x)
    if v.kind == "harmonic":
        return params.mass * v.omega**2 * (x - v.center)
    if v.kind == "double_well":
        a = 0.5 * v.well_separation
        return v.barrier_height * 4.0 * (x / a**2) * ((x / a) ** 2 - 1.0)
    raise ValidationError("Newtonian residual needs an analytic potential")


def coefficient_moduli(psi: WaveFunction, basis: Sequence[WaveFunction]
                       ) -> np.ndarray:
    """|(psi_n, psi)| for each basis member; constant under co-evolution."""
    return np.array([abs(inner_product(b, psi)) for b in basis])
