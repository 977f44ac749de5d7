import numpy as np
import pytest

import bayesbound as bb


def random_spd(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.standard_normal((d, d))
    return scale * (a @ a.T + d * np.eye(d))


def random_model(
    classes: int,
    dim: int,
    rng: np.random.Generator,
    mean_scale: float = 1.0,
    spd_cov: bool = False,
    priors: np.ndarray | None = None,
) -> bb.GaussianClassModel:
    means = mean_scale * rng.standard_normal((classes, dim))
    cov = random_spd(dim, rng, 1.0 / dim) if spd_cov else np.eye(dim)
    if priors is None:
        priors = np.full(classes, 1.0 / classes)
    return bb.GaussianClassModel.from_arrays(means, cov, priors)


@pytest.fixture
def binary_symmetric() -> bb.GaussianClassModel:
    """K=2, d=2, orthogonal unit-vector means (whitened distance sqrt(2))."""
    means = np.array([[1.0, 0.0], [0.0, 1.0]])
    return bb.GaussianClassModel.from_arrays(means, np.eye(2), [0.5, 0.5])
