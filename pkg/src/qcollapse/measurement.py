"""Object + apparatus measurement chain.

The object is a finite-dimensional system expanded in the eigenbasis of the
measured observable; the apparatus is a grid wave packet.  The coupling
translates the branch-n pointer packet at velocity n * shift_velocity, so the
inter-branch separation (the order parameter) grows continuously until it
crosses the critical value set by the packet widths.  Measurement then
samples a self-collapse on the apparatus and records the induced mixture on
the object; the exact composite state is never modified.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .collapse import (
    CollapseEvent,
    SuperpositionDecomposition,
    apply_self_collapse,
    decompose,
    sample_collapse,
)
from .diagnostics import (
    GateConfig,
    ObservableSpec,
    OrderParameters,
    packet_summary,
    wave_packet_gate,
)
from .errors import (
    ApparatusNotReady,
    TransitionNotReached,
    ValidationError,
)
from .grid import PhysicalParams, WaveFunction, inner_product, superpose
from .propagate import Potential, step, translate


@dataclass(frozen=True, eq=False)
class ObjectState:
    """Finite-dimensional state in the measured observable's eigenbasis."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1 or amps.size < 1:
            raise ValidationError("object amplitudes must be a 1-D vector")
        total = float(np.sum(amps.real**2 + amps.imag**2))
        if abs(total - 1.0) > 1e-10:
            raise ValidationError(f"object norm^2 = {total} deviates from 1")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return len(self.amplitudes)


@dataclass(frozen=True, eq=False)
class CompositeState:
    """Branches (object index n, c_n, apparatus packet) of sum c_n |n> x |a_n>."""

    branches: Tuple[Tuple[int, complex, WaveFunction], ...]

    def __post_init__(self):
        branches = tuple((int(n), complex(c), s) for n, c, s in self.branches)
        object.__setattr__(self, "branches", branches)
        total = sum(abs(c) ** 2 for _, c, _ in branches)
        if abs(total - 1.0) > 1e-8:
            raise ValidationError(f"sum |c_n|^2 = {total} deviates from 1")

    def __len__(self) -> int:
        return len(self.branches)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for _, c, _ in self.branches])

    @property
    def apparatus_states(self) -> List[WaveFunction]:
        return [s for _, _, s in self.branches]

    @property
    def is_product(self) -> bool:
        """True iff every branch carries the identical apparatus field."""
        states = self.apparatus_states
        first = states[0].amplitudes
        return all(np.array_equal(first, s.amplitudes) for s in states[1:])

    def norm(self) -> float:
        return math.sqrt(sum(abs(c) ** 2 * s.norm() ** 2
                             for _, c, s in self.branches))


@dataclass(frozen=True)
class CouplingConfig:
    shift_velocity: float
    d_sep: float
    tau: float

    def __post_init__(self):
        if self.shift_velocity <= 0:
            raise ValidationError("shift_velocity must be positive")
        if self.d_sep <= 0 or self.tau <= 0:
            raise ValidationError("d_sep and tau must be positive")
        if self.tau * self.shift_velocity < self.d_sep:
            raise ValidationError(
                "coupling too short: tau * shift_velocity < d_sep")

    def validate_apparatus(self, sigma: float) -> None:
        if self.d_sep < 3.0 * sigma:
            raise ValidationError(
                f"d_sep={self.d_sep} below 3 * apparatus sigma={sigma}")


@dataclass(frozen=True)
class TransitionReport:
    """Earliest persistent order-parameter crossing, if any, plus the series."""

    t_star: Optional[float]
    series: Tuple[Tuple[float, float, float], ...]  # (t, min_sep, critical)


@dataclass(frozen=True)
class MeasurementOutcome:
    event: CollapseEvent
    apparatus_state: WaveFunction
    object_mixture: Tuple[float, ...]
    realized_object_index: int


def premeasurement(obj: ObjectState, apparatus_ready: WaveFunction,
                   gate_cfg: GateConfig = GateConfig(),
                   params: PhysicalParams = PhysicalParams()) -> CompositeState:
    """Product state: every object branch shares the ready apparatus packet."""
    verdict = wave_packet_gate(apparatus_ready, [_positive_position(
        apparatus_ready, gate_cfg, params)], gate_cfg, params)
    if not verdict.is_wave_packet:
        raise ApparatusNotReady("apparatus state fails the wave-packet gate")
    return CompositeState(branches=tuple(
        (n, c, apparatus_ready) for n, c in enumerate(obj.amplitudes)))


def _positive_position(psi: WaveFunction, cfg: GateConfig,
                       params: PhysicalParams) -> ObservableSpec:
    """A(x) = x + C with the smallest C (plus one width) keeping A positive.

    Keeping the shift minimal is what lets the dominance ratio discriminate:
    a narrow packet at center >> width passes, while a broad or multi-humped
    state has |<A>| comparable to its own width and fails.
    """
    summary = packet_summary(psi, cfg, params)
    lo = summary.exp_x - 3.0 * summary.std_x
    shift = max(0.0, 0.1 * summary.std_x - lo) + summary.std_x
    return ObservableSpec.position(shift)


def von_neumann_evolve(state: CompositeState, cfg: CouplingConfig,
                       v: Potential, params: PhysicalParams, dt: float,
                       observer=None) -> Tuple[CompositeState, TransitionReport]:
    """Couple object and apparatus for a duration tau.

    Branch n drifts at velocity n * shift_velocity while evolving under the
    potential carried along in the branch's co-moving frame, so confining
    potentials hold the packet shape while its center translates.  The
    coefficients are carried unchanged.  `observer`, if given, receives
    (t, per-branch PacketSummary list) at every step.
    """
    if dt <= 0:
        raise ValidationError("dt must be positive")
    cfg.validate_apparatus(packet_summary(state.apparatus_states[0]).std_x)
    n_steps = int(round(cfg.tau / dt))
    branches = [(n, c, s) for n, c, s in state.branches]
    offsets = [0.0 for _ in branches]
    series: list = []

    def sample(t: float) -> None:
        summaries = [packet_summary(s) for _, _, s in branches]
        if observer is not None:
            observer(t, summaries)
        if len(summaries) >= 2:
            ops = _order_params(summaries)
            series.append((t, ops.min_pairwise_separation, ops.critical_value))

    sample(0.0)
    for i in range(1, n_steps + 1):
        for b, (n, c, psi) in enumerate(branches):
            psi = step(psi, v.shifted(offsets[b]), params, dt)
            ds = n * cfg.shift_velocity * dt
            if ds != 0.0:
                psi = translate(psi, ds)
                offsets[b] += ds
            branches[b] = (n, c, psi)
        sample(i * dt)
    final = CompositeState(branches=tuple(branches))
    return final, detect_transition(series)


def _order_params(summaries) -> OrderParameters:
    from .diagnostics import order_parameters
    return order_parameters(summaries)


def detect_transition(series: Sequence[Tuple[float, float, float]]
                      ) -> TransitionReport:
    """Earliest crossing min_sep >= critical that persists to the end."""
    series = tuple(series)
    t_star = None
    for t, sep, crit in reversed(series):
        if sep >= crit:
            t_star = t
        else:
            break
    return TransitionReport(t_star=t_star, series=series)


def apparatus_decomposition(state: CompositeState,
                            gate_cfg: GateConfig = GateConfig(),
                            params: PhysicalParams = PhysicalParams()
                            ) -> SuperpositionDecomposition:
    """Decomposition of the apparatus superposition over its branch packets."""
    coeffs = state.coefficients
    basis = state.apparatus_states
    psi2 = superpose(zip(coeffs, basis))
    return decompose(psi2, basis, gate_cfg, params,
                     expected_coefficients=coeffs)


def measure(state: CompositeState, report: TransitionReport, seed: int,
            gate_cfg: GateConfig = GateConfig(),
            params: PhysicalParams = PhysicalParams()) -> MeasurementOutcome:
    """Self-collapse on the apparatus, relative collapse on the object.

    Requires a detected transition; before that the pointer packets are not
    weakly interfering and collapse semantics do not apply.  The composite
    state is read, never modified.
    """
    if report.t_star is None:
        raise TransitionNotReached(
            "order parameter never crossed its critical value")
    decomp = apparatus_decomposition(state, gate_cfg, params)
    event = sample_collapse(decomp, seed)
    realized = apply_self_collapse(decomp, event)
    mixture = tuple(float(abs(c) ** 2) for c in state.coefficients)
    return MeasurementOutcome(event=event, apparatus_state=realized,
                              object_mixture=mixture,
                              realized_object_index=event.branch_index)


def pointer_distinguishability(state: CompositeState) -> np.ndarray:
    """|(apparatus_n, apparatus_m)| for all branch pairs."""
    states = state.apparatus_states
    n = len(states)
    out = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            out[i, j] = out[j, i] = abs(inner_product(states[i], states[j]))
    return out
