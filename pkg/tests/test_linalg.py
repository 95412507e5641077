import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specclip import eigendecompose, is_schur_stable, reconstruct, spectral_radius
from specclip.errors import DimensionMismatch, NonRealResult
from specclip.linalg import conjugate_partners

from conftest import random_diagonalizable


class TestEigendecompose:
    def test_scaled_rotation_eigenvalues_by_hand(self):
        # characteristic polynomial lam^2 + 2.25 = 0
        s = eigendecompose([[0.0, -1.5], [1.5, 0.0]])
        np.testing.assert_allclose(s.eigenvalues, [1.5j, -1.5j], atol=1e-14)

    def test_upper_triangular_order(self):
        s = eigendecompose([[0.5, 1.0, 0.0], [0.0, -2.0, 3.0], [0.0, 0.0, 2.0]])
        # magnitude desc, then real part desc
        np.testing.assert_allclose(s.eigenvalues, [2.0, -2.0, 0.5], atol=1e-12)

    def test_pairs_adjacent_positive_imag_first(self, rng):
        for _ in range(50):
            A = rng.standard_normal((7, 7))
            lam = eigendecompose(A).eigenvalues
            partner = conjugate_partners(lam)
            for i, j in enumerate(partner):
                assert lam[j] == np.conj(lam[i])
                if i < j:
                    assert lam[i].imag > 0

    def test_eigenvectors_unit_norm_and_phase(self, rng):
        s = eigendecompose(rng.standard_normal((6, 6)))
        np.testing.assert_allclose(np.linalg.norm(s.modal, axis=0), 1.0, atol=1e-13)
        for col in s.modal.T:
            lead = col[np.flatnonzero(np.abs(col) > 1e-12)[0]]
            assert lead.imag == pytest.approx(0.0, abs=1e-14) and lead.real > 0

    def test_residuals(self, rng):
        A = rng.standard_normal((10, 10))
        s = eigendecompose(A)
        res = np.linalg.norm(A @ s.modal - s.modal * s.eigenvalues, axis=0)
        assert res.max() <= 1e-10 * np.linalg.norm(A)

    def test_jordan_block_is_flagged_defective(self):
        assert eigendecompose([[1.0, 1.0], [0.0, 1.0]]).defective

    def test_identity_cond_one(self):
        s = eigendecompose(np.eye(4))
        assert s.cond_modal == pytest.approx(1.0)
        assert not s.defective

    def test_spectrum_arrays_read_only(self):
        s = eigendecompose(np.eye(2))
        with pytest.raises(ValueError):
            s.eigenvalues[0] = 3.0

    @pytest.mark.parametrize("bad", [np.zeros((2, 3)), np.zeros(3), [[np.nan, 0], [0, 1]], np.zeros((0, 0))])
    def test_rejects_bad_input(self, bad):
        with pytest.raises(DimensionMismatch):
            eigendecompose(bad)


class TestReconstruct:
    def test_rotation_from_hand_computed_factors(self):
        # M and its inverse written out by hand for R = [[0,-1],[1,0]]
        r = 1 / np.sqrt(2)
        M = r * np.array([[1, 1], [-1j, 1j]])
        Minv = r * np.array([[1, 1j], [1, -1j]])
        lam = np.array([1j, -1j])
        expected = (M * lam) @ Minv
        np.testing.assert_allclose(expected.imag, 0, atol=1e-15)
        np.testing.assert_allclose(expected.real, [[0, -1], [1, 0]], atol=1e-15)
        s = eigendecompose([[0.0, -1.0], [1.0, 0.0]])
        np.testing.assert_allclose(reconstruct(s), expected.real, atol=1e-14)

    def test_round_trip(self, rng):
        for n in (1, 2, 5, 12):
            A = random_diagonalizable(rng, n, 1.2)
            np.testing.assert_allclose(reconstruct(eigendecompose(A)), A, atol=1e-10 * np.linalg.norm(A))

    def test_broken_conjugate_pair_is_non_real(self):
        s = eigendecompose([[0.0, -1.0], [1.0, 0.0]])
        with pytest.raises(NonRealResult):
            reconstruct(s.with_eigenvalues([1j, 0.5]))


class TestRadius:
    def test_known_radius(self):
        assert spectral_radius([[0.0, -2.0], [2.0, 0.0]]) == pytest.approx(2.0)

    @pytest.mark.parametrize("rho, margin, expected", [(0.9, 0.0, True), (1.0, 0.0, True), (1.01, 0.0, False),
                                                       (0.95, 0.1, False), (0.85, 0.1, True)])
    def test_is_schur_stable(self, rho, margin, expected):
        assert is_schur_stable(np.diag([rho, 0.1]), margin) is expected

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 8), st.floats(0.1, 10.0), st.integers(0, 2 ** 31))
    def test_radius_is_homogeneous(self, n, c, seed):
        A = np.random.default_rng(seed).standard_normal((n, n))
        assert spectral_radius(c * A) == pytest.approx(c * spectral_radius(A), rel=1e-8)
