import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from tomosim import linalg, quantum
from tomosim.quantum import (
    DensityMatrix,
    Povm,
    PovmElement,
    born_probability,
    bures_sq,
    fidelity,
    haar_unitary,
    maximally_mixed,
    mub_qubit,
    projector,
    pure_state,
    random_bures_mixed,
    random_pure_haar,
)

RHO_H = pure_state(quantum.KET_H)
RHO_V = pure_state(quantum.KET_V)


class TestTypes:
    def test_density_matrix_validates_trace(self):
        with pytest.raises(ValueError, match="trace"):
            DensityMatrix(np.diag([0.5, 0.6]))

    def test_density_matrix_validates_positivity(self):
        with pytest.raises(linalg.NotPositiveSemidefiniteError):
            DensityMatrix(np.diag([1.5, -0.5]))

    def test_povm_element_weight_is_trace(self):
        e = PovmElement(np.diag([0.25, 0.5]))
        assert e.weight == pytest.approx(0.75)
        assert not e.inert

    def test_zero_weight_element_flagged_inert(self):
        assert PovmElement(np.zeros((2, 2))).inert

    def test_complete_povm_checked(self):
        half = PovmElement(np.eye(2) / 2)
        Povm((half, half), complete=True)
        with pytest.raises(ValueError, match="sum to identity"):
            Povm((half,), complete=True)

    def test_matrices_are_frozen(self):
        rho = maximally_mixed(2)
        with pytest.raises(ValueError):
            rho.matrix[0, 0] = 1.0


class TestBornRule:
    def test_projector_on_own_state(self):
        m = PovmElement(projector(quantum.KET_H))
        assert born_probability(m, RHO_H) == pytest.approx(1.0, abs=1e-12)

    def test_projector_on_mixed(self):
        m = PovmElement(projector(quantum.KET_H))
        assert born_probability(m, maximally_mixed(2)) == pytest.approx(0.5)

    def test_diagonal_basis_overlap(self):
        # oracle: |<D|H>|^2 computed from the vectors directly
        oracle = abs(np.vdot(quantum.KET_D, quantum.KET_H)) ** 2
        m = PovmElement(projector(quantum.KET_D))
        assert oracle == pytest.approx(0.5)
        assert born_probability(m, RHO_H) == pytest.approx(oracle, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            born_probability(PovmElement(np.eye(3)), maximally_mixed(2))


class TestFidelityAndBures:
    def test_self_fidelity(self, rng):
        rho = random_bures_mixed(2, rng)
        assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-10)

    def test_orthogonal_pure_states(self):
        assert fidelity(RHO_H, RHO_V) == pytest.approx(0.0, abs=1e-12)
        assert bures_sq(RHO_H, RHO_V) == pytest.approx(2.0, abs=1e-9)

    def test_pure_vs_mixed(self):
        assert fidelity(RHO_H, maximally_mixed(2)) == pytest.approx(0.5, abs=1e-10)
        # plugging F = 0.5 into the distance formula: 2 - sqrt(2)
        assert bures_sq(RHO_H, maximally_mixed(2)) == pytest.approx(
            0.5857864376269049, abs=1e-9)

    def test_bures_zero_for_identical(self, rng):
        rho = random_bures_mixed(2, rng)
        assert bures_sq(rho, rho) == pytest.approx(0.0, abs=1e-9)

    def test_pure_pure_equals_squared_overlap(self, rng):
        for _ in range(100):
            v1 = quantum._complex_gaussians(rng, 2)
            v2 = quantum._complex_gaussians(rng, 2)
            v1 /= np.linalg.norm(v1)
            v2 /= np.linalg.norm(v2)
            oracle = abs(np.vdot(v1, v2)) ** 2
            assert fidelity(pure_state(v1), pure_state(v2)) == pytest.approx(
                oracle, abs=1e-9)

    def test_symmetry(self, rng):
        for _ in range(50):
            a = random_bures_mixed(2, rng)
            b = random_pure_haar(2, rng)
            assert fidelity(a, b) == pytest.approx(fidelity(b, a), abs=1e-9)

    def test_small_distance_linearization(self, rng):
        # d_B^2 ~= 1 - F when d_B^2 << 1
        base = random_bures_mixed(2, rng)
        for scale in (1e-3, 1e-4):
            bumped = DensityMatrix(
                (1 - scale) * base.matrix + scale * np.eye(2) / 2)
            d = bures_sq(base, bumped)
            if d <= 0.01 and d > 1e-12:
                assert d == pytest.approx(1 - fidelity(base, bumped), rel=5e-3)


class TestMub:
    def test_first_element_is_h_projector(self):
        povm = mub_qubit()
        assert np.allclose(povm.elements[0].matrix, np.diag([1.0, 0.0]))

    def test_sums_to_three_identities(self):
        total = sum(e.matrix for e in mub_qubit().elements)
        assert np.max(np.abs(total - 3 * np.eye(2))) <= 1e-12

    def test_cross_basis_overlaps_are_half(self):
        kets = quantum.MUB_KETS
        for i in range(6):
            for j in range(6):
                if i // 2 != j // 2:  # different bases
                    assert abs(np.vdot(kets[i], kets[j])) ** 2 == pytest.approx(
                        0.5, abs=1e-12)

    def test_ordering_convention(self):
        assert quantum.MUB_LABELS == ("H", "V", "D", "A", "R", "L")
        assert np.allclose(projector(quantum.KET_D),
                           0.5 * np.array([[1, 1], [1, 1]]))


class TestHaarSampler:
    def test_sample_is_rank_one_unit_trace(self, rng):
        rho = random_pure_haar(2, rng)
        assert rho.matrix.trace().real == pytest.approx(1.0, abs=1e-12)
        assert linalg.numeric_rank(rho.matrix, 1e-8) == 1

    def test_mean_overlap_is_half(self, rng):
        vals = [random_pure_haar(2, rng).matrix[0, 0].real for _ in range(10 ** 4)]
        assert np.mean(vals) == pytest.approx(0.5, abs=0.02)

    def test_second_moment_matches_quadrature(self, rng):
        # overlap is uniform on [0,1]; E[x^2] = integral x^2 dx = 1/3,
        # frozen from numerical quadrature of the density
        oracle = 0.33333333333333337
        vals = [random_pure_haar(2, rng).matrix[0, 0].real ** 2
                for _ in range(10 ** 4)]
        assert np.mean(vals) == pytest.approx(oracle, abs=0.02)

    def test_overlap_uniformity_ks(self, rng):
        vals = [random_pure_haar(2, rng).matrix[0, 0].real for _ in range(10 ** 4)]
        assert stats.kstest(vals, "uniform").pvalue > 0.01

    def test_haar_unitary_is_unitary(self, rng):
        for dim in (2, 3):
            u = haar_unitary(dim, rng)
            assert np.max(np.abs(u.conj().T @ u - np.eye(dim))) <= 1e-10


class TestBuresSampler:
    def test_samples_are_valid_states(self, rng):
        for _ in range(100):
            rho = random_bures_mixed(2, rng)
            assert rho.matrix.trace().real == pytest.approx(1.0, abs=1e-12)
            assert np.linalg.eigvalsh(rho.matrix)[0] >= -1e-10

    def test_unitary_invariance(self, rng):
        # eigenvalue distribution is unchanged under rho -> W rho W^dag
        n = 10 ** 4
        base = np.array([
            np.linalg.eigvalsh(random_bures_mixed(2, rng).matrix)[0]
            for _ in range(n)])
        w = haar_unitary(2, np.random.default_rng(1))
        rotated = np.array([
            np.linalg.eigvalsh(
                w @ random_bures_mixed(2, rng).matrix @ w.conj().T)[0]
            for _ in range(n)])
        ks = stats.ks_2samp(base, rotated).statistic
        assert ks < 0.05

    def test_mean_purity_matches_reimplementation(self, rng):
        # independent oracle: same construction, separate code path and RNG
        def oracle_sample(orng):
            g = (orng.normal(size=(2, 2)) + 1j * orng.normal(size=(2, 2)))
            z = orng.normal(size=(2, 2)) + 1j * orng.normal(size=(2, 2))
            q, r = np.linalg.qr(z)
            w = q @ np.diag(np.diagonal(r) / np.abs(np.diagonal(r)))
            a = (np.eye(2) + w) @ g
            m = a @ a.conj().T
            m = m / np.trace(m).real
            return float(np.trace(m @ m).real)

        orng = np.random.default_rng(987654321)
        oracle = np.mean([oracle_sample(orng) for _ in range(10 ** 4)])
        ours = np.mean([random_bures_mixed(2, rng).purity() for _ in range(10 ** 4)])
        assert ours == pytest.approx(oracle, abs=0.01)


class TestMaximallyMixed:
    def test_qubit(self):
        assert np.allclose(maximally_mixed(2).matrix, np.diag([0.5, 0.5]))

    def test_qutrit(self):
        assert np.allclose(maximally_mixed(3).matrix, np.eye(3) / 3)

    def test_born_probability_is_one_over_d(self, rng):
        for dim in (2, 3, 4):
            u = haar_unitary(dim, rng)
            m = PovmElement(projector(u[:, 0]))
            assert born_probability(m, maximally_mixed(dim)) == pytest.approx(
                1.0 / dim, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 9))
def test_born_probability_in_range(seed):
    r = np.random.default_rng(seed)
    rho = random_bures_mixed(2, r)
    m = PovmElement(projector(haar_unitary(2, r)[:, 0]) * float(r.uniform(0.1, 3.0)))
    p = born_probability(m, rho)
    assert 0.0 <= p <= m.weight


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 9))
def test_fidelity_bounds_property(seed):
    r = np.random.default_rng(seed)
    a = random_bures_mixed(2, r)
    b = random_pure_haar(2, r)
    f = fidelity(a, b)
    assert 0.0 <= f <= 1.0
    assert 0.0 <= bures_sq(a, b) <= 2.0
