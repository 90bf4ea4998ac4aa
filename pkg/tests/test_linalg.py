"""Tests for the complex-matrix kernels.

Random-instance checks compare against naive loop oracles written here,
independent of the implementation under test; the Moore-Penrose identities
and inversion residuals act as their own oracles.
"""

import numpy as np
import pytest

from osicsim.linalg import (
    RankDeficiencyError,
    SingularMatrixError,
    hermitian,
    inverse,
    matmul,
    pinv,
    row_norms,
)


def rand_complex(rng, rows, cols):
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def naive_matmul(a, b):
    """Triple-loop product, the oracle for matmul."""
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m), dtype=complex)
    for i in range(n):
        for j in range(m):
            acc = 0.0 + 0.0j
            for t in range(k):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc
    return out


def penrose_residuals(a, p):
    """The four Moore-Penrose residuals, relative where meaningful."""
    apa = a @ p @ a
    pap = p @ a @ p
    pa = p @ a
    ap = a @ p
    r1 = np.linalg.norm(apa - a) / np.linalg.norm(a)
    r2 = np.linalg.norm(pap - p) / np.linalg.norm(p)
    r3 = np.linalg.norm(pa.conj().T - pa) / max(1.0, np.linalg.norm(pa))
    r4 = np.linalg.norm(ap.conj().T - ap) / max(1.0, np.linalg.norm(ap))
    return r1, r2, r3, r4


class TestHermitian:
    def test_identity(self):
        assert np.array_equal(hermitian(np.eye(2)), np.eye(2))

    def test_scalar_conjugation(self):
        assert hermitian([[1j]])[0, 0] == -1j

    def test_involution_elementwise(self):
        rng = np.random.default_rng(1)
        a = rand_complex(rng, 3, 2)
        back = hermitian(hermitian(a))
        for i in range(3):
            for j in range(2):
                assert back[i, j] == a[i, j]

    def test_swaps_dimensions_and_conjugates(self):
        rng = np.random.default_rng(2)
        a = rand_complex(rng, 4, 3)
        h = hermitian(a)
        assert h.shape == (3, 4)
        for i in range(4):
            for j in range(3):
                assert h[j, i] == np.conj(a[i, j])


class TestMatmul:
    def test_identity(self):
        rng = np.random.default_rng(3)
        a = rand_complex(rng, 3, 3)
        assert np.allclose(matmul(a, np.eye(3)), a)

    def test_scalar_modulus(self):
        out = matmul([[1 + 1j]], [[1 - 1j]])
        assert out[0, 0] == pytest.approx(2.0)

    def test_against_naive_oracle(self):
        rng = np.random.default_rng(4)
        a = rand_complex(rng, 3, 3)
        b = rand_complex(rng, 3, 3)
        expected = naive_matmul(a, b)
        assert np.max(np.abs(matmul(a, b) - expected)) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            matmul(np.eye(2), np.eye(3))

    def test_associativity(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            a = rand_complex(rng, 3, 4)
            b = rand_complex(rng, 4, 2)
            c = rand_complex(rng, 2, 5)
            lhs = matmul(matmul(a, b), c)
            rhs = matmul(a, matmul(b, c))
            assert np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs) < 1e-10


class TestInverse:
    def test_identity(self):
        assert np.allclose(inverse(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        out = inverse([[2, 0], [0, 4]])
        assert np.allclose(out, [[0.5, 0], [0, 0.25]])

    def test_residual_on_random_well_conditioned(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            a = rand_complex(rng, 4, 4)
            if np.linalg.cond(a) >= 1e8:
                continue
            res = np.linalg.norm(a @ inverse(a) - np.eye(4))
            assert res < 1e-9

    def test_singular_raises(self):
        a = np.array([[1.0, 2.0], [2.0, 4.0]], dtype=complex)
        with pytest.raises(SingularMatrixError):
            inverse(a)

    def test_zero_matrix_raises(self):
        with pytest.raises(SingularMatrixError):
            inverse(np.zeros((3, 3)))

    def test_non_square_rejected(self):
        with pytest.raises(ValueError, match="square"):
            inverse(np.ones((2, 3)))

    def test_nan_rejected(self):
        a = np.eye(3, dtype=complex)
        a[1, 1] = np.nan
        with pytest.raises(ValueError, match="NaN or Inf"):
            inverse(a)

    def test_inf_rejected(self):
        a = np.eye(3, dtype=complex)
        a[0, 2] = np.inf
        with pytest.raises(ValueError, match="NaN or Inf"):
            inverse(a)

    def test_needs_pivoting(self):
        # zero in the leading position forces a row swap
        a = np.array([[0.0, 1.0], [1.0, 1.0]], dtype=complex)
        assert np.linalg.norm(a @ inverse(a) - np.eye(2)) < 1e-12


class TestPinv:
    def test_identity(self):
        assert np.allclose(pinv(np.eye(4)), np.eye(4))

    def test_tall_ones_column(self):
        # (A^H A)^-1 A^H with A = [[1], [1]]: A^H A = 2, so P = [[0.5, 0.5]]
        out = pinv([[1.0], [1.0]])
        assert np.allclose(out, [[0.5, 0.5]])

    def test_penrose_identities_random(self):
        rng = np.random.default_rng(7)
        a = rand_complex(rng, 6, 4)
        residuals = penrose_residuals(a, pinv(a))
        assert max(residuals) < 1e-8

    def test_penrose_identities_many_shapes(self):
        rng = np.random.default_rng(8)
        for rows, cols in [(2, 2), (4, 3), (8, 8), (10, 6), (16, 16), (5, 1)]:
            for _ in range(5):
                a = rand_complex(rng, rows, cols)
                residuals = penrose_residuals(a, pinv(a))
                assert max(residuals) < 1e-8, (rows, cols)

    def test_matches_inverse_on_square(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            a = rand_complex(rng, 5, 5)
            p = pinv(a)
            inv = inverse(a)
            assert np.linalg.norm(p - inv) / np.linalg.norm(inv) < 1e-8

    def test_rank_deficient_raises(self):
        a = np.ones((4, 2), dtype=complex)  # duplicated columns
        with pytest.raises(RankDeficiencyError):
            pinv(a)

    def test_nan_rejected(self):
        a = np.ones((3, 2), dtype=complex)
        a[2, 0] = np.nan
        with pytest.raises(ValueError, match="NaN or Inf"):
            pinv(a)


class TestRowNorms:
    def test_identity(self):
        assert np.allclose(row_norms(np.eye(2)), [1.0, 1.0])

    def test_three_four_five(self):
        assert row_norms([[3.0, 4.0j]])[0] == pytest.approx(5.0)

    def test_against_naive_oracle(self):
        rng = np.random.default_rng(10)
        a = rand_complex(rng, 5, 7)
        expected = []
        for i in range(5):
            acc = 0.0
            for j in range(7):
                acc += abs(a[i, j]) ** 2
            expected.append(np.sqrt(acc))
        assert np.max(np.abs(row_norms(a) - np.array(expected))) < 1e-12
