"""Synthetic inputs and the benchmark dataset registry."""
import logging
from typing import Dict, NamedTuple

import numpy as np

logger = logging.getLogger(__name__)


class DatasetDims(NamedTuple):
    records: int
    features: int
    description: str


# Record/feature counts of the benchmark suite, for analytical runs at full scale
BENCHMARK_DATASETS: Dict[str, DatasetDims] = {
    "digits-8x8": DatasetDims(1797, 64, "grayscale 8x8 handwritten digits"),
    "mnist-28x28": DatasetDims(70000, 784, "grayscale 28x28 handwritten digits"),
    "cifar-10": DatasetDims(60000, 3072, "32x32 RGB natural images"),
    "olivetti-faces": DatasetDims(400, 4096, "64x64 grayscale face images"),
    "breast-cancer": DatasetDims(45312, 7, "tabular clinical records"),
    "20-newsgroups": DatasetDims(18846, 1024, "text documents, 1024 hashed features"),
}

GENERATORS = ("planted-spike", "random-symmetric", "uncorrelated", "wilkinson")


def dataset_dims(name: str) -> DatasetDims:
    try:
        return BENCHMARK_DATASETS[name]
    except KeyError:
        raise ValueError(f"unknown dataset {name!r}; choose from {sorted(BENCHMARK_DATASETS)}")


def planted_spike(records: int, features: int, factors: int = 2, noise: float = 1e-3, seed: int = 0) -> np.ndarray:
    """Data with `factors` dominant directions plus small isotropic noise."""
    if not 1 <= factors <= features:
        raise ValueError(f"factors must be in [1, {features}], got {factors}")
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((features, factors)))
    strengths = np.linspace(2.0, 1.0, factors) * 10.0
    scores = rng.standard_normal((records, factors)) * strengths
    return scores @ basis.T + noise * rng.standard_normal((records, features))


def random_symmetric(n: int, seed: int = 0, integer: bool = False, scale: float = 1.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if integer:
        a = rng.integers(-4, 5, size=(n, n)).astype(np.float64)
        return np.triu(a) + np.triu(a, 1).T
    a = rng.standard_normal((n, n)) * scale
    return (a + a.T) / 2.0


def uncorrelated(records: int, features: int, seed: int = 0) -> np.ndarray:
    """Zero-mean, mutually orthogonal unit-variance columns: X^T X = (M-1) I."""
    if records <= features:
        raise ValueError("need more records than features for orthogonal columns")
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((records, features))
    raw -= raw.mean(axis=0)
    q, _ = np.linalg.qr(raw)
    return q * np.sqrt(records - 1)


def wilkinson(n: int = 21) -> np.ndarray:
    """Wilkinson W+ matrix: tridiagonal, clustered eigenvalue pairs."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    half = (n - 1) / 2.0
    w = np.diag(np.abs(np.arange(n) - half))
    idx = np.arange(n - 1)
    w[idx, idx + 1] = 1.0
    w[idx + 1, idx] = 1.0
    return w


def digits_matrix() -> np.ndarray:
    """The 1797x64 digits dataset bundled with scikit-learn (optional dependency)."""
    try:
        from sklearn.datasets import load_digits
    except ImportError:
        raise ImportError("the digits dataset needs scikit-learn (pip install -r requirements-dev.txt)")
    return load_digits().data.astype(np.float64)


def generate(kind: str, records: int, features: int, seed: int = 0, factors: int = 2) -> np.ndarray:
    logger.info(f"Generating {kind} data: {records}x{features}, seed={seed}")
    if kind == "planted-spike":
        return planted_spike(records, features, factors=factors, seed=seed)
    if kind == "random-symmetric":
        return random_symmetric(features, seed=seed)
    if kind == "uncorrelated":
        return uncorrelated(records, features, seed=seed)
    if kind == "wilkinson":
        return wilkinson(features)
    raise ValueError(f"unknown generator {kind!r}; choose from {list(GENERATORS)}")
