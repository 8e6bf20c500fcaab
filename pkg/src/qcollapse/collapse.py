"""Reduced intervals, geometric probabilities and stochastic self-collapse.

Collapse semantics only apply to superpositions of weakly interfering
packets.  Probabilities are computed geometrically, as the quotient of the
reduced and the full support-interval widths, and must reproduce the squared
coefficient moduli; sampling is fully deterministic given a seed.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .diagnostics import (
    GateConfig,
    PacketSummary,
    packet_summary,
    weak_interference,
)
from .errors import (
    IndexOutOfRange,
    NotWeaklyInterfering,
    ValidationError,
)
from .grid import PhysicalParams, WaveFunction, inner_product

RNG_ALGORITHM = "numpy.random.PCG64"

COEFF_NORM_TOL = 1e-8
# Geometric weak interference alone admits Gaussian tails; collapse
# additionally requires branch overlaps at or below this.
BRANCH_OVERLAP_TOL = 1e-6
COEFF_EXTRACTION_TOL = 1e-6


@dataclass(frozen=True)
class ReducedInterval:
    """Reduced support interval sharing its center with the parent packet."""

    center: float
    width: float


@dataclass(frozen=True)
class CollapseEvent:
    branch_index: int
    probability: float
    seed: int
    a_posteriori: Tuple[float, ...]


@dataclass(frozen=True, eq=False)
class SuperpositionDecomposition:
    """Branches (c_n, state_n, summary_n) of a superposition over packets."""

    branches: Tuple[Tuple[complex, WaveFunction, PacketSummary], ...]

    def __post_init__(self):
        branches = tuple((complex(c), s, m) for c, s, m in self.branches)
        object.__setattr__(self, "branches", branches)
        total = sum(abs(c) ** 2 for c, _, _ in branches)
        if abs(total - 1.0) > COEFF_NORM_TOL:
            raise ValidationError(
                f"sum |c_n|^2 = {total} deviates from 1 beyond {COEFF_NORM_TOL}")

    def __len__(self) -> int:
        return len(self.branches)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _, _ in self.branches])

    @property
    def states(self) -> List[WaveFunction]:
        return [s for _, s, _ in self.branches]

    @property
    def summaries(self) -> List[PacketSummary]:
        return [m for _, _, m in self.branches]

    @cached_property
    def probabilities(self) -> np.ndarray:
        return geometric_probabilities(self)


def decompose(psi: WaveFunction, basis: Sequence[WaveFunction],
              cfg: GateConfig = GateConfig(),
              params: PhysicalParams = PhysicalParams(),
              expected_coefficients: Optional[Sequence[complex]] = None
              ) -> SuperpositionDecomposition:
    """Extract coefficients c_n = (psi_n, psi) by grid inner products.

    Coefficients are always re-extracted rather than trusted, so a
    non-orthogonal basis shows up as a discrepancy error here instead of as
    silently wrong probabilities later.
    """
    basis = list(basis)
    coeffs = np.array([inner_product(b, psi) for b in basis])
    if expected_coefficients is not None:
        expected = np.asarray(expected_coefficients, dtype=complex)
        err = float(np.max(np.abs(coeffs - expected)))
        if err > COEFF_EXTRACTION_TOL:
            raise ValidationError(
                f"extracted coefficients deviate by {err:.3g} from the "
                "supplied ones; branches are probably not orthogonal")
    summaries = [packet_summary(b, cfg, params) for b in basis]
    return SuperpositionDecomposition(
        branches=tuple(zip(coeffs, basis, summaries)))


def _check_weak_interference(decomp: SuperpositionDecomposition) -> None:
    if len(decomp) < 2:
        return
    matrix = weak_interference(decomp.summaries)
    iu = np.triu_indices(len(decomp), k=1)
    if not np.all(matrix[iu]):
        raise NotWeaklyInterfering(
            "some branch pair fails the support-separation condition")
    states = decomp.states
    for i, j in zip(*iu):
        overlap = abs(inner_product(states[i], states[j]))
        if overlap > BRANCH_OVERLAP_TOL:
            raise NotWeaklyInterfering(
                f"branches {i},{j} overlap by {overlap:.3g} "
                f"(limit {BRANCH_OVERLAP_TOL})")


def reduced_intervals(decomp: SuperpositionDecomposition) -> List[ReducedInterval]:
    """Width |c_n|^2 * std_n x around the unchanged branch center.

    Re-verifies the local average-conservation identity
    |c_n|^2 A(<x>_n) std_n = A(<x>_n) width_n for A = x + C.
    """
    _check_weak_interference(decomp)
    out = []
    for c, _, summary in decomp.branches:
        w = abs(c) ** 2 * summary.std_x
        a_val = summary.exp_x + _positive_shift(decomp)
        lhs = abs(c) ** 2 * a_val * summary.std_x
        rhs = a_val * w
        if abs(lhs - rhs) > 1e-9 * max(1.0, abs(lhs)):
            raise ValidationError("local average-conservation identity broken")
        out.append(ReducedInterval(center=summary.exp_x, width=w))
    return out


def _positive_shift(decomp: SuperpositionDecomposition) -> float:
    """A constant making A(x) = x + C positive at every branch center."""
    min_center = min(s.exp_x for s in decomp.summaries)
    return max(0.0, 1.0 - min_center)


def geometric_probabilities(decomp: SuperpositionDecomposition) -> np.ndarray:
    """p_n = reduced width / full width, computed from the interval values."""
    intervals = reduced_intervals(decomp)
    p = np.array([iv.width / s.std_x
                  for iv, s in zip(intervals, decomp.summaries)])
    if abs(float(p.sum()) - 1.0) > COEFF_NORM_TOL:
        raise ValidationError(f"probabilities sum to {p.sum()}, not 1")
    return p


def measure_quotients(decomp: SuperpositionDecomposition) -> np.ndarray:
    """Prose measure quotient q_n = std_n x / sum_m std_m x.

    Reported for inspection only; it equals |c_n|^2 only when the packet
    widths happen to be proportional to the weights.
    """
    widths = np.array([s.std_x for s in decomp.summaries])
    return widths / widths.sum()


def sample_collapse(decomp: SuperpositionDecomposition,
                    seed: int) -> CollapseEvent:
    """Inverse-CDF sample of the realized branch on a seeded PCG64 stream.

    Branch intervals are half-open [lo, hi) in coefficient index order, so
    identical (decomp, seed) always give an identical event.
    """
    p = decomp.probabilities
    u = np.random.default_rng(seed).random()
    cum = np.cumsum(p)
    idx = int(np.searchsorted(cum, u, side="right"))
    idx = min(idx, len(p) - 1)
    posterior = tuple(1.0 if i == idx else 0.0 for i in range(len(p)))
    return CollapseEvent(branch_index=idx,
                         probability=float(abs(decomp.coefficients[idx]) ** 2),
                         seed=seed, a_posteriori=posterior)


def apply_self_collapse(decomp: SuperpositionDecomposition,
                        event: CollapseEvent) -> WaveFunction:
    """The realized branch packet at unit norm; the decomposition is untouched."""
    if not 0 <= event.branch_index < len(decomp):
        raise IndexOutOfRange(
            f"branch {event.branch_index} out of range for {len(decomp)} branches")
    return decomp.branches[event.branch_index][1].normalize()
