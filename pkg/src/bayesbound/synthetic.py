"""Synthetic model generators for benchmarks and validation harnesses."""

import numpy as np

from .model import GaussianClassModel


def unit_sphere_means(classes: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Rows drawn uniformly on the unit sphere."""
    m = rng.standard_normal((classes, dim))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def simplex_means(classes: int, dim: int) -> np.ndarray:
    """Centered standard-basis vertices: all pairwise distances equal sqrt(2)."""
    if dim < classes:
        raise ValueError("simplex scheme needs dim >= classes")
    m = np.zeros((classes, dim))
    m[:, :classes] = np.eye(classes) - 1.0 / classes
    return m


def make_synthetic_model(
    classes: int,
    dim: int,
    mean_scheme: str = "unit-sphere",
    seed: int = 0,
    cov_scale: float = 1.0,
) -> GaussianClassModel:
    """Uniform-prior model with identity covariance (times cov_scale)."""
    if classes < 1 or dim < 1:
        raise ValueError("need at least one class and one dimension")
    if cov_scale <= 0:
        raise ValueError("cov_scale must be positive")
    if mean_scheme == "unit-sphere":
        means = unit_sphere_means(classes, dim, np.random.default_rng(seed))
    elif mean_scheme == "simplex":
        means = simplex_means(classes, dim)
    else:
        raise ValueError(f"unknown mean scheme {mean_scheme!r}")
    priors = np.full(classes, 1.0 / classes)
    return GaussianClassModel.from_arrays(means, cov_scale * np.eye(dim), priors)
