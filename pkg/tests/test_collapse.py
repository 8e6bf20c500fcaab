import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcollapse import (
    CollapseEvent,
    Grid1D,
    PhysicalParams,
    apply_self_collapse,
    decompose,
    geometric_probabilities,
    inner_product,
    make_gaussian,
    measure_quotients,
    reduced_intervals,
    sample_collapse,
    superpose,
)
from qcollapse.collapse import RNG_ALGORITHM
from qcollapse.errors import (
    IndexOutOfRange,
    NotWeaklyInterfering,
    ValidationError,
)

from conftest import l2_distance


@pytest.fixture
def cat_decomp(gaussian, params):
    basis = [gaussian(center=-18.0), gaussian(center=18.0)]
    cat = superpose(zip((0.6, 0.8), basis))
    return decompose(cat, basis, params=params,
                     expected_coefficients=(0.6, 0.8))


class TestDecompose:
    def test_extracts_coefficients(self, cat_decomp):
        assert np.allclose(cat_decomp.coefficients, [0.6, 0.8], atol=1e-8)

    def test_rejects_wrong_expected_coefficients(self, gaussian, params):
        basis = [gaussian(center=-18.0), gaussian(center=18.0)]
        cat = superpose(zip((0.6, 0.8), basis))
        with pytest.raises(ValidationError):
            decompose(cat, basis, params=params,
                      expected_coefficients=(0.8, 0.6))

    def test_rejects_non_unit_total(self, gaussian, params):
        basis = [gaussian(center=-18.0), gaussian(center=18.0)]
        cat = superpose(zip((0.6, 0.8), basis))
        with pytest.raises(ValidationError):
            decompose(cat, basis[:1], params=params)


class TestReducedIntervals:
    def test_widths_scale_with_weights(self, cat_decomp):
        ivs = reduced_intervals(cat_decomp)
        assert ivs[0].width == pytest.approx(0.36, abs=1e-8)
        assert ivs[1].width == pytest.approx(0.64, abs=1e-8)
        assert ivs[0].center == pytest.approx(-18.0, abs=1e-6)
        assert ivs[1].center == pytest.approx(18.0, abs=1e-6)

    def test_quarter_weight_example(self, params):
        # |c|^2 = 1/4 on a packet of width 4 gives a reduced width of 1
        basis = [make_gaussian(Grid1D(-80.0, 80.0, 2048), c, 4.0, 0.0, params)
                 for c in (-32.0, 32.0)]
        cat = superpose(zip((0.5, math.sqrt(0.75)), basis))
        decomp = decompose(cat, basis, params=params)
        ivs = reduced_intervals(decomp)
        assert ivs[0].width == pytest.approx(0.25 * 4.0, rel=1e-8)

    def test_single_branch_is_trivial(self, gaussian, params):
        psi = gaussian(center=3.0)
        decomp = decompose(psi, [psi], params=params)
        (iv,) = reduced_intervals(decomp)
        assert iv.width == pytest.approx(psi and decomp.summaries[0].std_x,
                                         rel=1e-8)

    @staticmethod
    def _direct_decomp(coeffs, basis, params):
        from qcollapse import packet_summary
        from qcollapse.collapse import SuperpositionDecomposition
        return SuperpositionDecomposition(branches=tuple(
            (c, b, packet_summary(b, params=params))
            for c, b in zip(coeffs, basis)))

    def test_overlapping_branches_rejected(self, gaussian, params):
        basis = [gaussian(center=-0.5, sigma=2.0), gaussian(center=0.5, sigma=2.0)]
        decomp = self._direct_decomp((1 / math.sqrt(2),) * 2, basis, params)
        with pytest.raises(NotWeaklyInterfering):
            reduced_intervals(decomp)

    def test_marginal_separation_still_rejected(self, gaussian, params):
        # separation 10 sigma passes the interval test but the residual
        # overlap 3.7e-6 still blocks collapse semantics
        basis = [gaussian(center=-5.0), gaussian(center=5.0)]
        decomp = self._direct_decomp((0.6, 0.8), basis, params)
        with pytest.raises(NotWeaklyInterfering):
            reduced_intervals(decomp)

    def test_non_orthogonal_basis_caught_at_decompose(self, gaussian, params):
        basis = [gaussian(center=-0.5, sigma=2.0), gaussian(center=0.5, sigma=2.0)]
        raw = superpose(zip((1 / math.sqrt(2),) * 2, basis))
        with pytest.raises(ValidationError):
            decompose(raw, basis, params=params)


class TestGeometricProbabilities:
    def test_equal_squared_moduli(self, cat_decomp):
        p = geometric_probabilities(cat_decomp)
        assert p == pytest.approx([0.36, 0.64], abs=1e-8)
        assert float(p.sum()) == pytest.approx(1.0, abs=1e-8)

    def test_matches_inner_product_oracle(self, gaussian, params):
        c = np.array([0.3 + 0.4j, 0.5, math.sqrt(1 - 0.25 - 0.25)])
        basis = [gaussian(center=x0) for x0 in (-20.0, 0.0, 20.0)]
        cat = superpose(zip(c, basis))
        decomp = decompose(cat, basis, params=params)
        oracle = np.abs([inner_product(b, cat) for b in basis]) ** 2
        assert np.allclose(decomp.probabilities, oracle, atol=1e-6)

    def test_single_branch(self, gaussian, params):
        psi = gaussian()
        decomp = decompose(psi, [psi], params=params)
        assert decomp.probabilities == pytest.approx([1.0], abs=1e-10)

    def test_measure_quotient_differs_from_born(self, gaussian, params):
        # equal widths: q = (1/2, 1/2) regardless of the 0.36/0.64 weights
        basis = [gaussian(center=-18.0), gaussian(center=18.0)]
        cat = superpose(zip((0.6, 0.8), basis))
        decomp = decompose(cat, basis, params=params)
        q = measure_quotients(decomp)
        assert q == pytest.approx([0.5, 0.5], abs=1e-6)
        assert not np.allclose(q, decomp.probabilities, atol=0.05)

    @settings(deadline=None, max_examples=20)
    @given(w=st.floats(0.05, 0.95), phase=st.floats(0.0, 2.0 * math.pi))
    def test_born_rule_property(self, w, phase):
        grid = Grid1D(-40.0, 40.0, 512)
        params = PhysicalParams()
        c = (math.sqrt(w) * complex(math.cos(phase), math.sin(phase)),
             math.sqrt(1.0 - w))
        basis = [make_gaussian(grid, x0, 1.0, 0.0, params)
                 for x0 in (-18.0, 18.0)]
        decomp = decompose(superpose(zip(c, basis)), basis, params=params)
        assert np.allclose(decomp.probabilities, [w, 1.0 - w], atol=1e-7)


class TestSampling:
    def test_determinism(self, cat_decomp):
        events = [sample_collapse(cat_decomp, 42) for _ in range(5)]
        assert all(e == events[0] for e in events)
        assert events[0].seed == 42
        assert events[0].probability == pytest.approx(
            0.36 if events[0].branch_index == 0 else 0.64, abs=1e-8)

    def test_generator_identity_documented(self):
        assert RNG_ALGORITHM == "numpy.random.PCG64"

    def test_matches_inverse_cdf_oracle(self, cat_decomp):
        for seed in range(50):
            u = np.random.default_rng(seed).random()
            expected = 0 if u < 0.36 else 1
            assert sample_collapse(cat_decomp, seed).branch_index == expected

    def test_certain_branch_always_chosen(self, gaussian, params):
        psi = gaussian()
        decomp = decompose(psi, [psi], params=params)
        for seed in range(20):
            assert sample_collapse(decomp, seed).branch_index == 0

    def test_posterior_is_one_hot(self, cat_decomp):
        e = sample_collapse(cat_decomp, 7)
        assert sum(e.a_posteriori) == 1.0
        assert e.a_posteriori[e.branch_index] == 1.0

    def test_empirical_frequencies(self, cat_decomp):
        n = 2000
        hits = sum(sample_collapse(cat_decomp, s).branch_index for s in range(n))
        # 3 sigma binomial band around p = 0.64
        band = 3.0 * math.sqrt(0.64 * 0.36 / n)
        assert abs(hits / n - 0.64) <= band


class TestApplySelfCollapse:
    def test_returns_normalized_branch(self, cat_decomp, gaussian):
        e = sample_collapse(cat_decomp, 42)
        out = apply_self_collapse(cat_decomp, e)
        assert out.norm() == pytest.approx(1.0, abs=1e-12)
        target = gaussian(center=-18.0 if e.branch_index == 0 else 18.0)
        assert l2_distance(out, target) <= 1e-10

    def test_index_out_of_range(self, cat_decomp):
        bad = CollapseEvent(branch_index=5, probability=0.0, seed=0,
                            a_posteriori=(0.0, 0.0))
        with pytest.raises(IndexOutOfRange):
            apply_self_collapse(cat_decomp, bad)
        assert isinstance(IndexOutOfRange("x"), IndexError)

    def test_decomposition_untouched(self, cat_decomp):
        before = [s.amplitudes.copy() for s in cat_decomp.states]
        p_before = cat_decomp.probabilities.copy()
        e = sample_collapse(cat_decomp, 3)
        apply_self_collapse(cat_decomp, e)
        for old, new in zip(before, cat_decomp.states):
            assert np.array_equal(old, new.amplitudes)
        assert np.array_equal(p_before, cat_decomp.probabilities)
