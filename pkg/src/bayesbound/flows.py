"""Invertible coupling transforms with exact log-determinants.

Each layer splits the coordinates into an active and a passive block,
shifts the active block by a bounded nonlinear function of the passive one
(tanh of an affine map), and optionally rescales it with per-coordinate
log-scales.  The Jacobian is triangular with a data-independent diagonal,
so the log-determinant is just the sum of the log-scales.  Parameters load
from JSON; nothing here is trained.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bayes_error import BayesErrorEstimate, compute_bayes_error
from .hdr import HdrConfig
from .model import GaussianClassModel


class FlowFormatError(ValueError):
    """Raised when a flow description is malformed."""


@dataclass(frozen=True)
class CouplingLayer:
    """One coupling block: x_A = z_A * exp(log_scale) + tanh(W z_B + bias)."""

    mask_a: np.ndarray  # active indices
    mask_b: np.ndarray  # passive indices
    weight: np.ndarray  # (|A|, |B|)
    bias: np.ndarray  # (|A|,)
    log_scale: np.ndarray | None  # (|A|,) or None for the additive variant

    def shift(self, passive: np.ndarray) -> np.ndarray:
        return np.tanh(passive @ self.weight.T + self.bias)


@dataclass(frozen=True)
class CouplingFlow:
    dim: int
    layers: tuple[CouplingLayer, ...]

    def forward(self, z: np.ndarray) -> np.ndarray:
        """Apply the layers in order; accepts (d,) or (n, d)."""
        x = np.array(z, dtype=np.float64, copy=True)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        for layer in self.layers:
            a, b = layer.mask_a, layer.mask_b
            x_a = x[:, a]
            if layer.log_scale is not None:
                x_a = x_a * np.exp(layer.log_scale)
            x[:, a] = x_a + layer.shift(x[:, b])
        return x[0] if single else x

    def inverse(self, x: np.ndarray) -> np.ndarray:
        """Exact algebraic inverse: layers reversed, shift removed, unscaled."""
        z = np.array(x, dtype=np.float64, copy=True)
        single = z.ndim == 1
        z = np.atleast_2d(z)
        for layer in reversed(self.layers):
            a, b = layer.mask_a, layer.mask_b
            z_a = z[:, a] - layer.shift(z[:, b])
            if layer.log_scale is not None:
                z_a = z_a * np.exp(-layer.log_scale)
            z[:, a] = z_a
        return z[0] if single else z

    def log_det_jacobian(self) -> float:
        """Independent of the input for this layer family; 0 when additive."""
        total = 0.0
        for layer in self.layers:
            if layer.log_scale is not None:
                total += float(np.sum(layer.log_scale))
        return total


def make_layer(
    dim: int,
    mask_a: np.ndarray,
    weight: np.ndarray,
    bias: np.ndarray,
    log_scale: np.ndarray | None,
) -> CouplingLayer:
    mask_a = np.asarray(mask_a, dtype=np.int64).ravel()
    if mask_a.size == 0:
        raise FlowFormatError("active set must be nonempty")
    if np.unique(mask_a).size != mask_a.size:
        raise FlowFormatError("active set has repeated indices")
    if np.any(mask_a < 0) or np.any(mask_a >= dim):
        raise FlowFormatError("active index out of range")
    mask_b = np.setdiff1d(np.arange(dim), mask_a)
    if mask_b.size == 0:
        raise FlowFormatError("passive set must be nonempty")
    weight = np.asarray(weight, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64).ravel()
    if weight.shape != (mask_a.size, mask_b.size):
        raise FlowFormatError(
            f"weight shape {weight.shape} != ({mask_a.size}, {mask_b.size})"
        )
    if bias.shape != (mask_a.size,):
        raise FlowFormatError("bias length does not match the active set")
    if log_scale is not None:
        log_scale = np.asarray(log_scale, dtype=np.float64).ravel()
        if log_scale.shape != (mask_a.size,):
            raise FlowFormatError("log-scale length does not match the active set")
        if not np.all(np.isfinite(log_scale)):
            raise FlowFormatError("log-scales must be finite")
    return CouplingLayer(
        mask_a=mask_a, mask_b=mask_b, weight=weight, bias=bias, log_scale=log_scale
    )


def make_flow(dim: int, layers: list[CouplingLayer]) -> CouplingFlow:
    """Assemble a flow and verify forward/inverse closure on fixed probes."""
    if dim < 1:
        raise FlowFormatError("dimension must be positive")
    flow = CouplingFlow(dim=dim, layers=tuple(layers))
    probe = np.random.default_rng(1234).standard_normal((8, dim))
    with np.errstate(over="ignore", invalid="ignore"):
        err = float(np.max(np.abs(flow.inverse(flow.forward(probe)) - probe)))
    if not err <= 1e-9:  # also catches NaN from overflowing scales
        raise FlowFormatError(f"round-trip check failed (max error {err:.3e})")
    return flow


# ----------------------------------------------------------------------
# JSON interchange
# ----------------------------------------------------------------------


def flow_from_json(doc: dict) -> CouplingFlow:
    """Parse {"d": int, "layers": [{"mask_a", "w", "b", "log_s"|null}, ...]}."""
    try:
        dim = int(doc["d"])
        layer_docs = doc["layers"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FlowFormatError(f"malformed flow JSON: {exc}") from exc
    layers = []
    for i, ld in enumerate(layer_docs):
        try:
            layers.append(
                make_layer(dim, ld["mask_a"], ld["w"], ld["b"], ld.get("log_s"))
            )
        except (KeyError, TypeError) as exc:
            raise FlowFormatError(f"layer {i}: {exc}") from exc
    return make_flow(dim, layers)


def flow_to_json(flow: CouplingFlow) -> dict:
    return {
        "d": flow.dim,
        "layers": [
            {
                "mask_a": layer.mask_a.tolist(),
                "w": layer.weight.tolist(),
                "b": layer.bias.tolist(),
                "log_s": None if layer.log_scale is None else layer.log_scale.tolist(),
            }
            for layer in flow.layers
        ],
    }


def load_flow(source: str | Path | dict) -> CouplingFlow:
    if isinstance(source, dict):
        return flow_from_json(source)
    try:
        doc = json.loads(Path(source).read_text())
    except json.JSONDecodeError as exc:
        raise FlowFormatError(f"invalid flow JSON: {exc}") from exc
    return flow_from_json(doc)


def random_flow(
    dim: int, n_layers: int, seed: int, affine: bool = True
) -> CouplingFlow:
    """Seeded random flow with alternating even/odd masks, for tests and
    the invariance harness."""
    if dim < 2:
        raise FlowFormatError("random flows need dimension >= 2")
    rng = np.random.default_rng(seed)
    even = np.arange(0, dim, 2)
    odd = np.arange(1, dim, 2)
    layers = []
    for i in range(n_layers):
        mask_a = even if i % 2 == 0 else odd
        n_a = mask_a.size
        n_b = dim - n_a
        weight = rng.normal(scale=1.0, size=(n_a, n_b))
        bias = rng.normal(scale=0.5, size=n_a)
        log_scale = rng.uniform(-0.5, 0.5, size=n_a) if affine else None
        layers.append(make_layer(dim, mask_a, weight, bias, log_scale))
    return make_flow(dim, layers)


# ----------------------------------------------------------------------
# pushforward densities and the invariance harness
# ----------------------------------------------------------------------


def pushforward_log_density(
    flow: CouplingFlow,
    model: GaussianClassModel,
    j: int,
    x: np.ndarray,
    tau: float,
) -> float | np.ndarray:
    """Log density of forward(Z), Z ~ class j at temperature tau, at x."""
    z = flow.inverse(x)
    return model.log_density(j, z, tau) - flow.log_det_jacobian()


def pushforward_classify(
    flow: CouplingFlow, model: GaussianClassModel, x: np.ndarray, tau: float
) -> int | np.ndarray:
    """Argmax of log prior_j + pushforward log density; the log-determinant
    is class-independent so this matches the base classifier at inverse(x)."""
    z = flow.inverse(x)
    scores = model.class_scores(z, tau) - flow.log_det_jacobian()
    idx = np.argmax(scores, axis=-1)
    return int(idx) if np.ndim(idx) == 0 else idx


@dataclass(frozen=True)
class InvarianceReport:
    error_x_space: float
    stderr_x_space: float
    error_base: float
    stderr_base: float
    tau: float
    samples: int
    passed: bool

    @property
    def difference(self) -> float:
        return self.error_x_space - self.error_base

    @property
    def combined_stderr(self) -> float:
        return math.hypot(self.stderr_x_space, self.stderr_base)


def invariance_harness(
    flow: CouplingFlow,
    model: GaussianClassModel,
    tau: float,
    n: int,
    config: HdrConfig | None = None,
    seed: int = 0,
    threads: int = 1,
    chunk: int = 1 << 15,
) -> InvarianceReport:
    """Check that the transformed-space error matches the base-space error.

    Monte Carlo in the transformed space: draw (z, y), push z through the
    flow, classify with the pushforward densities, count mistakes.  Compare
    against the splitting estimate on the base Gaussians; pass when the two
    agree within three combined standard errors.
    """
    if n < 10_000:
        raise ValueError("need at least 1e4 samples for a meaningful check")
    if flow.dim != model.dim:
        raise ValueError("flow and model dimensions differ")
    rng = np.random.default_rng(seed)
    mistakes = 0
    remaining = n
    while remaining > 0:
        m = min(chunk, remaining)
        y = rng.choice(model.num_classes, size=m, p=model.priors)
        u = rng.standard_normal((m, model.dim))
        z = model.means[y] + tau * (u @ model.chol.T)
        x = flow.forward(z)
        pred = pushforward_classify(flow, model, x, tau)
        mistakes += int(np.sum(pred != y))
        remaining -= m
    err_mc = mistakes / n
    se_mc = math.sqrt(err_mc * (1.0 - err_mc) / n)

    base: BayesErrorEstimate = compute_bayes_error(model, tau, config, threads)
    diff = abs(err_mc - base.error)
    combined = math.hypot(se_mc, base.stderr)
    return InvarianceReport(
        error_x_space=err_mc,
        stderr_x_space=se_mc,
        error_base=base.error,
        stderr_base=base.stderr,
        tau=tau,
        samples=n,
        passed=bool(diff <= 3.0 * combined),
    )
