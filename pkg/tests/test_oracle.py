import numpy as np
import pytest

from utils.oracle import oracle_jacobi, oracle_matmul, oracle_pca, projector_distance, residuals


def test_matmul_matches_numpy(rng):
    a, b = rng.standard_normal((5, 7)), rng.standard_normal((7, 3))
    assert np.allclose(oracle_matmul(a, b), a @ b)
    with pytest.raises(ValueError):
        oracle_matmul(a, a)


def test_jacobi_small_case():
    values, vectors, trace = oracle_jacobi([[2.0, 1.0], [1.0, 2.0]])
    assert values == pytest.approx([3.0, 1.0])
    assert abs(vectors[0, 0]) == pytest.approx(2 ** -0.5)
    assert trace[0] == pytest.approx(2 ** 0.5)
    assert trace[-1] < 1e-14


def test_jacobi_agrees_with_lapack(rng):
    a = rng.standard_normal((9, 9))
    c = (a + a.T) / 2
    values, vectors, _ = oracle_jacobi(c)
    assert np.allclose(values, np.sort(np.linalg.eigvalsh(c))[::-1], atol=1e-10)
    assert max(residuals(c, values, vectors)) < 1e-10


def test_jacobi_rejects_bad_input():
    with pytest.raises(ValueError, match="symmetric"):
        oracle_jacobi([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError, match="square"):
        oracle_jacobi([[1.0, 2.0]])


def test_pca_and_projector_distance(rng):
    x = rng.standard_normal((30, 4)) * [5.0, 3.0, 1.0, 0.5]
    values, vk, projected = oracle_pca(x, 2)
    assert len(values) == 4
    assert vk.shape == (4, 2)
    assert np.allclose(projected, x @ vk)
    assert projector_distance(vk, -vk) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        oracle_pca(x, 5)
