import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcollapse import (
    EvolutionConfig,
    GateConfig,
    Grid1D,
    ObservableSpec,
    PhysicalParams,
    Potential,
    ehrenfest_residual,
    evolve,
    expectation,
    make_gaussian,
    order_parameters,
    packet_summary,
    std_dev,
    superpose,
    wave_packet_gate,
    weak_interference,
)
from qcollapse.diagnostics import coefficient_moduli
from qcollapse.errors import (
    NonUniformSampling,
    ObservableNotPositiveOnSupport,
    TooFewPackets,
    ValidationError,
)

from oracles import gaussian_moment_oracle


class TestObservableSpec:
    def test_degree_cap(self):
        ObservableSpec.position_poly([0.0] * 9)
        with pytest.raises(ValidationError):
            ObservableSpec.position_poly([0.0] * 10)
        with pytest.raises(ValidationError):
            ObservableSpec.position_poly([])

    def test_classical_value(self):
        a = ObservableSpec.position_poly([1.0, 0.0, 2.0])  # 1 + 2 x^2
        assert a.classical_value(3.0) == pytest.approx(19.0)
        with pytest.raises(ValidationError):
            ObservableSpec.momentum().classical_value(1.0)


class TestExpectation:
    def test_position_moments_vs_quadrature(self, grid, gaussian, params):
        psi = gaussian(center=2.0, sigma=1.5, momentum=0.3)
        ex, sx, ep, sp = gaussian_moment_oracle(2.0, 1.5, 0.3, grid.x_min,
                                                grid.x_max, grid.n_points)
        assert expectation(psi, ObservableSpec.position(), params) == \
            pytest.approx(ex, abs=1e-8)
        assert std_dev(psi, ObservableSpec.position(), params) == \
            pytest.approx(sx, abs=1e-6)
        assert expectation(psi, ObservableSpec.momentum(), params) == \
            pytest.approx(ep, abs=1e-8)
        assert std_dev(psi, ObservableSpec.momentum(), params) == \
            pytest.approx(sp, abs=1e-6)

    def test_momentum_squared(self, gaussian, params):
        # <p^2> = <p>^2 + (hbar / 2 sigma)^2
        psi = gaussian(sigma=1.0, momentum=0.5)
        got = expectation(psi, ObservableSpec.momentum_squared(), params)
        assert got == pytest.approx(0.25 + 0.25, rel=1e-8)

    def test_quadratic_position_observable(self, gaussian, params):
        # <x^2> = center^2 + sigma^2
        psi = gaussian(center=3.0, sigma=2.0)
        a = ObservableSpec.position_poly([0.0, 0.0, 1.0])
        assert expectation(psi, a, params) == pytest.approx(13.0, rel=1e-8)

    def test_basis_independence(self, grid, params):
        # translating the whole frame shifts <x> by exactly the offset
        psi_a = make_gaussian(grid, -5.0, 1.0, 0.4, params)
        psi_b = make_gaussian(grid, 5.0, 1.0, 0.4, params)
        xa = expectation(psi_a, ObservableSpec.position(), params)
        xb = expectation(psi_b, ObservableSpec.position(), params)
        assert xb - xa == pytest.approx(10.0, abs=1e-7)
        assert std_dev(psi_a, ObservableSpec.position(), params) == \
            pytest.approx(std_dev(psi_b, ObservableSpec.position(), params),
                          abs=1e-9)


class TestPacketSummary:
    def test_support_interval_and_mass(self, gaussian, params):
        psi = gaussian(center=5.0, sigma=0.5)
        s = packet_summary(psi, GateConfig(k=2.0), params=params)
        lo, hi = s.support
        assert lo == pytest.approx(4.5, abs=1e-8)
        assert hi == pytest.approx(5.5, abs=1e-8)
        # +-1 sigma holds erf(1/sqrt 2) ~ 0.6827 of the mass
        assert s.mass_in_support == pytest.approx(math.erf(1 / math.sqrt(2)),
                                                  abs=0.01)

    def test_wide_interval_mass(self, gaussian, params):
        s = packet_summary(gaussian(), GateConfig(k=6.0), params=params)
        assert s.mass_in_support >= 0.997

    def test_uncertainty_bound(self, gaussian, params):
        for sigma in (0.5, 1.0, 2.0):
            s = packet_summary(gaussian(sigma=sigma), params=params)
            assert s.uncertainty_product >= 0.5 - 1e-9
            assert s.uncertainty_product == pytest.approx(0.5, rel=1e-6)


def _positive_position_for(summary, eta=10.0):
    """A(x) = x + C with the smallest C keeping A positive on the support."""
    lo, _ = summary.support
    shift = max(0.0, 0.1 * summary.std_x - lo) + summary.std_x
    return ObservableSpec.position(shift)


class TestWavePacketGate:
    def test_narrow_far_packet_passes(self, params):
        grid = Grid1D(0.0, 20.0, 2048)
        psi = make_gaussian(grid, 10.0, 0.1, 0.0, params)
        verdict = wave_packet_gate(psi, [ObservableSpec.position()],
                                   params=params)
        _, ratio, taylor = verdict.per_observable[0]
        assert ratio == pytest.approx(100.0, rel=1e-6)
        assert taylor <= 1e-10
        assert verdict.is_wave_packet

    def test_cat_fails_ratio(self, grid, gaussian, params):
        cat = superpose([(1 / math.sqrt(2), gaussian(center=-10.0)),
                         (1 / math.sqrt(2), gaussian(center=10.0))])
        a = ObservableSpec.position(20.0)
        verdict = wave_packet_gate(cat, [a], params=params)
        assert not verdict.is_wave_packet
        _, ratio, _ = verdict.per_observable[0]
        # spread ~ 10, mean ~ 20 -> ratio ~ 2, far below eta = 10
        assert ratio < 3.0

    def test_observable_must_be_positive(self, gaussian, params):
        psi = gaussian(center=10.0, sigma=0.5)
        a = ObservableSpec.position_poly([100.0, -20.0, 1.0])  # (x - 10)^2
        with pytest.raises(ObservableNotPositiveOnSupport):
            wave_packet_gate(psi, [a], params=params)

    def test_momentum_observable(self, params):
        grid = Grid1D(-40.0, 40.0, 2048)
        psi = make_gaussian(grid, 0.0, 4.0, 2.0, params)
        # std p = 1/8, <p> = 2 -> ratio 16 >= eta
        verdict = wave_packet_gate(psi, [ObservableSpec.momentum()],
                                   params=params)
        _, ratio, taylor = verdict.per_observable[0]
        assert ratio == pytest.approx(16.0, rel=1e-6)
        assert taylor <= 1e-10
        assert verdict.is_wave_packet

    def test_marginal_ratio_fails(self, params):
        grid = Grid1D(-12.0, 20.0, 1024)
        psi = make_gaussian(grid, 5.0, 1.0, 0.0, params)
        # ratio ~ 5+shift but with a bare A(x) = x probe at center 5, sigma 1
        # the dominance ratio is 5 < 10
        verdict = wave_packet_gate(psi, [ObservableSpec.position()],
                                   params=params)
        _, ratio, _ = verdict.per_observable[0]
        assert ratio == pytest.approx(5.0, rel=1e-6)
        assert not verdict.is_wave_packet

    @settings(deadline=None, max_examples=25)
    @given(sigma=st.floats(0.5, 1.5), d=st.floats(12.0, 20.0),
           mid=st.floats(-5.0, 5.0),
           w=st.floats(0.05, 0.95))
    def test_gate_obstruction_for_cats(self, sigma, d, mid, w):
        """No sharply split two-packet state passes the gate."""
        grid = Grid1D(-40.0, 40.0, 1024)
        params = PhysicalParams()
        c1, c2 = math.sqrt(w), math.sqrt(1.0 - w)
        cat = superpose([
            (c1, make_gaussian(grid, mid - d / 2, sigma, 0.0, params)),
            (c2, make_gaussian(grid, mid + d / 2, sigma, 0.0, params)),
        ])
        summary = packet_summary(cat, params=params)
        verdict = wave_packet_gate(cat, [_positive_position_for(summary)],
                                   params=params)
        assert not verdict.is_wave_packet


class TestWeakInterference:
    def _summaries(self, centers, widths):
        return [
            type("S", (), {"exp_x": c, "std_x": w})()
            for c, w in zip(centers, widths)
        ]

    def test_separated_pair(self, gaussian, params):
        s = [packet_summary(gaussian(center=c), params=params)
             for c in (-10.0, 10.0)]
        m = weak_interference(s)
        assert m[0, 1] and m[1, 0]
        assert not m[0, 0] and not m[1, 1]

    def test_overlapping_pair(self, gaussian, params):
        s = [packet_summary(gaussian(center=c, sigma=2.0), params=params)
             for c in (-0.5, 0.5)]
        m = weak_interference(s)
        assert not m[0, 1]

    def test_boundary_is_inclusive(self):
        s = self._summaries([0.0, 1.0], [1.0, 1.0])
        assert weak_interference(s)[0, 1]
        s = self._summaries([0.0, 1.0 - 1e-12], [1.0, 1.0])
        assert not weak_interference(s)[0, 1]

    def test_simplified_form(self):
        # widths 1 and 3: pairwise threshold 2, common-width threshold 2
        s = self._summaries([0.0, 2.5], [1.0, 3.0])
        assert weak_interference(s)[0, 1]
        assert weak_interference(s, simplified=True)[0, 1]
        s = self._summaries([0.0, 1.5], [1.0, 3.0])
        assert not weak_interference(s)[0, 1]

    def test_too_few(self, gaussian, params):
        with pytest.raises(TooFewPackets):
            weak_interference([packet_summary(gaussian(), params=params)])


class TestOrderParameters:
    def test_three_branch_extremes(self):
        mk = lambda c, w: type("S", (), {"exp_x": c, "std_x": w})()
        s = [mk(0.0, 1.0), mk(10.0, 3.0), mk(30.0, 1.0)]
        op = order_parameters(s)
        assert op.min_pairwise_separation == pytest.approx(10.0)
        assert op.critical_value == pytest.approx(2.0)
        assert op.transition

    def test_below_threshold(self):
        mk = lambda c, w: type("S", (), {"exp_x": c, "std_x": w})()
        op = order_parameters([mk(0.0, 1.0), mk(0.3, 1.0)])
        assert op.min_pairwise_separation == pytest.approx(0.3)
        assert op.critical_value == pytest.approx(1.0)
        assert not op.transition


class TestEhrenfest:
    def _trajectory(self, psi, v, params, dt, n, every):
        traj = [(0.0, psi)]
        evolve(psi, v, params,
               EvolutionConfig(dt=dt, n_steps=n, record_every=every),
               lambda t, s: traj.append((t, s)))
        return traj

    def test_free_particle_exact(self, gaussian, params):
        traj = self._trajectory(gaussian(momentum=1.0), Potential.free(),
                                params, 1e-3, 200, 10)
        res = ehrenfest_residual(traj, Potential.free(), params)
        assert res.residual_x.max() <= 1e-6
        assert res.residual_p.max() <= 1e-10
        assert res.residual_newton.max() <= 1e-10

    def test_harmonic_newton_matches_exact(self, grid, params):
        v = Potential.harmonic(omega=1.0)
        psi = make_gaussian(grid, 2.0, 1.0, 0.0, params)
        traj = self._trajectory(psi, v, params, 1e-3, 200, 10)
        res = ehrenfest_residual(traj, v, params)
        # linear force: averaged force equals force at the mean
        assert np.max(np.abs(res.residual_p - res.residual_newton)) <= 1e-8
        # centered differences at sample spacing 0.01: error ~ (dt^2/6) x'''
        assert res.residual_p.max() <= 5e-5

    def test_anharmonic_broad_packet_breaks_newton(self, params):
        grid = Grid1D(-16.0, 16.0, 512)
        v = Potential.double_well(barrier_height=1.0, well_separation=4.0)
        psi = make_gaussian(grid, 1.0, 1.5, 0.0, params)
        traj = self._trajectory(psi, v, params, 1e-3, 200, 10)
        res = ehrenfest_residual(traj, v, params)
        assert res.residual_newton.max() >= 10.0 * res.residual_p.max()

    def test_residual_convergence_order(self, grid, params):
        v = Potential.harmonic(omega=1.0)
        psi = make_gaussian(grid, 2.0, 1.0, 0.0, params)
        maxima = []
        for dt in (2e-3, 1e-3):
            traj = self._trajectory(psi, v, params, dt, int(0.2 / dt), 10)
            maxima.append(ehrenfest_residual(traj, v, params).residual_p.max())
        assert maxima[0] / maxima[1] >= 3.5  # ~ O(dt^2)

    def test_nonuniform_sampling_rejected(self, gaussian, params):
        psi = gaussian()
        traj = [(0.0, psi), (0.1, psi), (0.3, psi)]
        with pytest.raises(NonUniformSampling):
            ehrenfest_residual(traj, Potential.free(), params)


class TestCoefficientModuli:
    def test_recovers_weights(self, gaussian, params):
        basis = [gaussian(center=-18.0), gaussian(center=18.0)]
        cat = superpose(zip((0.6, 0.8), basis))
        mods = coefficient_moduli(cat, basis)
        assert mods == pytest.approx([0.6, 0.8], abs=1e-8)
