"""Gaussian class-conditional model with a shared covariance.

The model holds K class means, one covariance matrix (factored once at
load), and class priors.  All downstream machinery (decision constraints,
splitting estimator, flow harness) consumes this object read-only, so it is
safe to share across worker threads.
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.special import erfc, log_ndtr

_MAGIC = b"GCM1"
_VERSION = 1
_JSON_SIZE_LIMIT = 1 << 20

COV_FULL = 0
COV_DIAG = 1
COV_SCALAR = 2

# jitter ladder, relative to the mean diagonal of the covariance
_JITTER_STEPS = (1e-10, 1e-8, 1e-6)

_LOG_2PI = float(np.log(2.0 * np.pi))


class ModelFormatError(ValueError):
    """Raised when a model file is malformed or violates an invariant."""


def _cholesky_with_jitter(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, retrying with increasing diagonal jitter.

    Exported covariances can be borderline positive definite; three retries
    with jitter proportional to the mean diagonal are attempted before the
    model is rejected.
    """
    mean_diag = float(np.mean(np.diag(cov)))
    if mean_diag <= 0:
        mean_diag = 1.0
    attempts = [0.0] + [eps * mean_diag for eps in _JITTER_STEPS]
    for jitter in attempts:
        try:
            return cholesky(cov + jitter * np.eye(cov.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            continue
        except ValueError:
            continue
    raise ModelFormatError("covariance is not positive definite (after jitter)")


@dataclass(frozen=True)
class GaussianClassModel:
    """K Gaussian class-conditional distributions N(mean_j, tau^2 * cov).

    Attributes
    ----------
    means : (K, d) array
        One row per class.
    cov : (d, d) array
        Shared covariance, symmetric positive definite.
    chol : (d, d) array
        Lower-triangular L with cov = L @ L.T, computed once at load.
    priors : (K,) array
        Class probabilities, nonnegative, summing to 1 within 1e-9.
    """

    means: np.ndarray
    cov: np.ndarray
    chol: np.ndarray
    priors: np.ndarray
    log_priors: np.ndarray = field(repr=False)
    _half_log_det: float = field(repr=False)

    @property
    def num_classes(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @classmethod
    def from_arrays(
        cls, means: np.ndarray, cov: np.ndarray, priors: np.ndarray
    ) -> "GaussianClassModel":
        means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        cov = np.asarray(cov, dtype=np.float64)
        priors = np.asarray(priors, dtype=np.float64).ravel()

        k, d = means.shape
        if k < 1 or d < 1:
            raise ModelFormatError("need at least one class and one dimension")
        if cov.shape != (d, d):
            raise ModelFormatError(f"covariance shape {cov.shape} != ({d}, {d})")
        if priors.shape != (k,):
            raise ModelFormatError(f"priors length {priors.size} != {k} classes")

        scale = max(1.0, float(np.max(np.abs(cov))))
        if float(np.max(np.abs(cov - cov.T))) > 1e-12 * scale:
            raise ModelFormatError("covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)

        if np.any(priors < 0):
            raise ModelFormatError("priors must be nonnegative")
        if abs(float(priors.sum()) - 1.0) > 1e-9:
            raise ModelFormatError("priors do not sum to 1")

        chol = _cholesky_with_jitter(cov)
        with np.errstate(divide="ignore"):
            log_priors = np.where(priors > 0, np.log(np.maximum(priors, 1e-300)), -np.inf)
        half_log_det = float(np.sum(np.log(np.diag(chol))))

        model = cls(
            means=means,
            cov=cov,
            chol=chol,
            priors=priors,
            log_priors=log_priors,
            _half_log_det=half_log_det,
        )
        for arr in (model.means, model.cov, model.chol, model.priors, model.log_priors):
            arr.setflags(write=False)
        return model

    # ------------------------------------------------------------------
    # densities and sampling
    # ------------------------------------------------------------------

    def whiten(self, j: int, x: np.ndarray, tau: float) -> np.ndarray:
        """Map x to u with x = mean_j + tau * L @ u.  Accepts (d,) or (n, d)."""
        diff = (np.asarray(x, dtype=np.float64) - self.means[j]) / tau
        return solve_triangular(self.chol, diff.T, lower=True).T

    def log_density(self, j: int, x: np.ndarray, tau: float) -> float | np.ndarray:
        """Log density of class j at temperature tau.

        Evaluates log N(x; mean_j, tau^2 cov) through the cached Cholesky
        factor.  ``x`` may be a single point (d,) or a batch (n, d).
        """
        if tau <= 0:
            raise ValueError("tau must be positive")
        v = self.whiten(j, x, tau)
        quad = np.sum(np.square(v), axis=-1)
        out = (
            -0.5 * self.dim * _LOG_2PI
            - self.dim * np.log(tau)
            - self._half_log_det
            - 0.5 * quad
        )
        return float(out) if np.ndim(out) == 0 else out

    def class_scores(self, x: np.ndarray, tau: float) -> np.ndarray:
        """Log posteriors up to a constant: log prior_j + log density_j.

        Returns shape (K,) for a single point or (n, K) for a batch.
        """
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        scores = np.empty((pts.shape[0], self.num_classes))
        for j in range(self.num_classes):
            scores[:, j] = self.log_priors[j] + self.log_density(j, pts, tau)
        return scores[0] if single else scores

    def sample(
        self, j: int, tau: float, rng: np.random.Generator, size: int | None = None
    ) -> np.ndarray:
        """Draw from class j at temperature tau: mean_j + tau * L @ u.

        Deterministic given the generator state.  ``size=None`` returns a
        single (d,) vector, otherwise (size, d).
        """
        if tau <= 0:
            raise ValueError("tau must be positive")
        n = 1 if size is None else size
        u = rng.standard_normal((n, self.dim))
        x = self.means[j] + tau * (u @ self.chol.T)
        return x[0] if size is None else x

    def bayes_classify(self, x: np.ndarray, tau: float) -> int | np.ndarray:
        """Most probable class at x; ties break to the lowest class index."""
        scores = self.class_scores(x, tau)
        idx = np.argmax(scores, axis=-1)
        return int(idx) if np.ndim(idx) == 0 else idx

    # ------------------------------------------------------------------
    # binary closed form
    # ------------------------------------------------------------------

    def whitened_mean_distance(self) -> float:
        """|| L^-1 (mean_0 - mean_1) ||_2 for the two-class model."""
        if self.num_classes != 2:
            raise ValueError("whitened mean distance is defined for K=2")
        w = solve_triangular(self.chol, self.means[0] - self.means[1], lower=True)
        return float(np.linalg.norm(w))

    def binary_closed_form(self, tau: float) -> float:
        """Exact optimal error for K=2 with uniform priors.

        Computed via the complementary error function so the deep tail is
        accurate to absolute 1e-14.
        """
        log_err = self.binary_closed_form_log(tau)
        return float(np.exp(log_err))

    def binary_closed_form_log(self, tau: float) -> float:
        """Natural log of the K=2 closed-form error, accurate in the far tail."""
        if tau <= 0:
            raise ValueError("tau must be positive")
        if self.num_classes != 2:
            raise ValueError("closed form requires exactly 2 classes")
        if abs(self.priors[0] - 0.5) > 1e-9:
            raise ValueError("closed form requires uniform priors")
        delta = self.whitened_mean_distance()
        # 1 - Phi(x) = Phi(-x); log_ndtr keeps the tail exact
        return float(log_ndtr(-delta / (2.0 * tau)))


def gaussian_tail(x: float) -> float:
    """Upper-tail probability 1 - Phi(x) via erfc (absolute error <= 1e-14)."""
    return float(0.5 * erfc(x / np.sqrt(2.0)))


# ----------------------------------------------------------------------
# interchange format
# ----------------------------------------------------------------------


def _covariance_payload(cov: np.ndarray, cov_kind: int, d: int) -> np.ndarray:
    if cov_kind == COV_FULL:
        if cov.size != d * d:
            raise ModelFormatError("full covariance payload has wrong size")
        return cov.reshape(d, d)
    if cov_kind == COV_DIAG:
        if cov.size != d:
            raise ModelFormatError("diagonal covariance payload has wrong size")
        return np.diag(cov.ravel())
    if cov_kind == COV_SCALAR:
        if cov.size != 1:
            raise ModelFormatError("scalar covariance payload has wrong size")
        return float(cov.ravel()[0]) * np.eye(d)
    raise ModelFormatError(f"unknown covariance kind {cov_kind}")


def _parse_binary(blob: bytes) -> GaussianClassModel:
    header = struct.Struct("<4sIIIB")
    if len(blob) < header.size:
        raise ModelFormatError("file too short for header")
    magic, version, k, d, cov_kind = header.unpack_from(blob, 0)
    if magic != _MAGIC:
        raise ModelFormatError("bad magic bytes")
    if version != _VERSION:
        raise ModelFormatError(f"unsupported version {version}")
    cov_len = {COV_FULL: d * d, COV_DIAG: d, COV_SCALAR: 1}.get(cov_kind)
    if cov_len is None:
        raise ModelFormatError(f"unknown covariance kind {cov_kind}")
    n_doubles = k + k * d + cov_len
    expected = header.size + 8 * n_doubles
    if len(blob) != expected:
        raise ModelFormatError(f"file length {len(blob)} != expected {expected}")
    data = np.frombuffer(blob, dtype="<f8", count=n_doubles, offset=header.size)
    priors = data[:k]
    means = data[k : k + k * d].reshape(k, d)
    cov = _covariance_payload(data[k + k * d :], cov_kind, d)
    return GaussianClassModel.from_arrays(means, cov, priors)


def _parse_json(blob: bytes) -> GaussianClassModel:
    if len(blob) > _JSON_SIZE_LIMIT:
        raise ModelFormatError("JSON model files are limited to 1 MiB")
    try:
        doc = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"not a GCM binary or JSON model: {exc}") from exc
    return model_from_json(doc)


def model_from_json(doc: dict) -> GaussianClassModel:
    """Build a model from the JSON twin {"k","d","cov_kind","priors","means","cov"}."""
    try:
        k = int(doc["k"])
        d = int(doc["d"])
        cov_kind = int(doc["cov_kind"])
        priors = np.asarray(doc["priors"], dtype=np.float64)
        means = np.asarray(doc["means"], dtype=np.float64)
        cov = np.asarray(doc["cov"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed JSON model: {exc}") from exc
    if means.size != k * d:
        raise ModelFormatError("means do not match k*d")
    cov_full = _covariance_payload(cov, cov_kind, d)
    return GaussianClassModel.from_arrays(means.reshape(k, d), cov_full, priors)


def model_to_json(model: GaussianClassModel, cov_kind: int | None = None) -> dict:
    """Emit the JSON twin of a model; covariance kind is detected by default."""
    kind, payload = _compact_covariance(model.cov, cov_kind)
    return {
        "k": model.num_classes,
        "d": model.dim,
        "cov_kind": kind,
        "priors": model.priors.tolist(),
        "means": model.means.tolist(),
        "cov": payload.tolist() if isinstance(payload, np.ndarray) else payload,
    }


def _compact_covariance(cov: np.ndarray, cov_kind: int | None):
    d = cov.shape[0]
    if cov_kind is None:
        off_diag = cov - np.diag(np.diag(cov))
        if np.count_nonzero(off_diag) == 0:
            diag = np.diag(cov)
            cov_kind = COV_SCALAR if np.all(diag == diag[0]) else COV_DIAG
        else:
            cov_kind = COV_FULL
    if cov_kind == COV_FULL:
        return COV_FULL, cov
    if cov_kind == COV_DIAG:
        return COV_DIAG, np.diag(cov).copy()
    return COV_SCALAR, float(cov[0, 0])


def model_to_bytes(model: GaussianClassModel, cov_kind: int | None = None) -> bytes:
    """Serialize to the GCM binary format (little-endian)."""
    kind, payload = _compact_covariance(model.cov, cov_kind)
    if kind == COV_SCALAR:
        payload = np.asarray([payload])
    header = struct.pack(
        "<4sIIIB", _MAGIC, _VERSION, model.num_classes, model.dim, kind
    )
    body = np.concatenate(
        [model.priors, model.means.ravel(), np.asarray(payload, dtype=np.float64).ravel()]
    )
    return header + body.astype("<f8").tobytes()


def load_model(source: str | Path | bytes) -> GaussianClassModel:
    """Load a model from a GCM binary or JSON-twin file (path or raw bytes).

    Raises
    ------
    ModelFormatError
        Malformed file, non-positive-definite covariance after the jitter
        ladder, or priors failing the normalization check.
    """
    if isinstance(source, (str, Path)):
        blob = Path(source).read_bytes()
    else:
        blob = bytes(source)
    if blob[:4] == _MAGIC:
        return _parse_binary(blob)
    return _parse_json(blob)


def save_model(model: GaussianClassModel, path: str | Path, cov_kind: int | None = None) -> None:
    Path(path).write_bytes(model_to_bytes(model, cov_kind))
