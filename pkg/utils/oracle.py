"""Double-precision reference code used as ground truth in tests.

Plain Python loops and the math module only; nothing here touches the
fixed-point, tiling, cache or engine code it is used to check.
"""
import math
from typing import List, Sequence, Tuple

import numpy as np


def _rows(a) -> List[List[float]]:
    return [[float(v) for v in row] for row in np.asarray(a, dtype=np.float64)]


def oracle_matmul(a, b) -> np.ndarray:
    """Triple-loop product, summing k in ascending order."""
    ra, rb = _rows(a), _rows(b)
    n, inner = len(ra), len(ra[0]) if ra else 0
    if len(rb) != inner:
        raise ValueError(f"dimension mismatch: {n}x{inner} times {len(rb)}x{len(rb[0]) if rb else 0}")
    m = len(rb[0]) if rb else 0
    out = [[0.0] * m for _ in range(n)]
    for i in range(n):
        row = ra[i]
        for j in range(m):
            total = 0.0
            for k in range(inner):
                total += row[k] * rb[k][j]
            out[i][j] = total
    return np.array(out, dtype=np.float64).reshape(n, m)


def _off_norm(a: List[List[float]]) -> float:
    n = len(a)
    return math.sqrt(sum(a[i][j] * a[i][j] for i in range(n) for j in range(n) if i != j))


def oracle_jacobi(c, max_sweeps: int = 50, tol: float = 1e-14) -> Tuple[np.ndarray, np.ndarray, List[float]]:
    """Cyclic Jacobi with the textbook tan(theta) update.

    Stops after max_sweeps or once the off-diagonal norm is at most tol
    times the Frobenius norm of c. Returns (eigenvalues descending,
    eigenvectors as columns, off-diagonal norm per sweep starting at sweep 0).
    """
    a = _rows(c)
    n = len(a)
    for i in range(n):
        if len(a[i]) != n:
            raise ValueError("oracle_jacobi needs a square matrix")
        for j in range(i + 1, n):
            if abs(a[i][j] - a[j][i]) > 1e-9 * max(1.0, abs(a[i][j])):
                raise ValueError("oracle_jacobi needs a symmetric matrix")
    v = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    frob = math.sqrt(sum(x * x for row in a for x in row))
    trace = [_off_norm(a)]

    for _ in range(max_sweeps):
        if trace[-1] <= tol * frob:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p][q]
                if apq == 0.0:
                    continue
                tau = (a[q][q] - a[p][p]) / (2.0 * apq)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                cs = 1.0 / math.sqrt(1.0 + t * t)
                sn = t * cs
                for k in range(n):
                    akp, akq = a[k][p], a[k][q]
                    a[k][p] = cs * akp - sn * akq
                    a[k][q] = sn * akp + cs * akq
                for k in range(n):
                    apk, aqk = a[p][k], a[q][k]
                    a[p][k] = cs * apk - sn * aqk
                    a[q][k] = sn * apk + cs * aqk
                for k in range(n):
                    vkp, vkq = v[k][p], v[k][q]
                    v[k][p] = cs * vkp - sn * vkq
                    v[k][q] = sn * vkp + cs * vkq
        trace.append(_off_norm(a))

    eig = [a[i][i] for i in range(n)]
    order = sorted(range(n), key=lambda i: -eig[i])
    values = np.array([eig[i] for i in order], dtype=np.float64)
    vectors = np.array([[v[r][i] for i in order] for r in range(n)], dtype=np.float64).reshape(n, n)
    return values, vectors, trace


def oracle_pca(x, k: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(eigenvalues, V_k, X V_k) for an already centered/standardized X."""
    xt = np.asarray(x, dtype=np.float64).T
    c = oracle_matmul(xt, x)
    values, vectors, _ = oracle_jacobi(c)
    if not 1 <= k <= len(values):
        raise ValueError(f"k must be in [1, {len(values)}], got {k}")
    vk = vectors[:, :k]
    return values, vk, oracle_matmul(x, vk)


def projector_distance(a: np.ndarray, b: np.ndarray) -> float:
    """||A A^T - B B^T||_F, insensitive to column signs and rotations within the span."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.linalg.norm(a @ a.T - b @ b.T))


def residuals(c: np.ndarray, values: Sequence[float], vectors: np.ndarray) -> List[float]:
    """||C v - lambda v|| per eigenpair."""
    c = np.asarray(c, dtype=np.float64)
    return [float(np.linalg.norm(c @ vectors[:, i] - values[i] * vectors[:, i])) for i in range(len(values))]
