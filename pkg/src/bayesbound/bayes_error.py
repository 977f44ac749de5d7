"""Optimal-error estimators built from per-class polytope probabilities.

Three routes to the same quantity: the splitting estimator on whitened
decision polytopes (any K), a plain Monte Carlo oracle that samples and
classifies, and the K=2 closed form.  On top of these sit temperature
sweeps, numeric inversion of the temperature-to-error map, and the
one-vs-all per-class hardness estimator.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp

from .constraints import HalfSpaceSet, build_constraints, reduce_dimension
from .hdr import (
    HdrConfig,
    HdrEstimate,
    NestingError,
    estimate_polytope_probability,
)
from .model import GaussianClassModel

_MC_CHUNK = 1 << 15


class TargetRangeError(ValueError):
    """Requested error level is outside the achievable range on the bracket."""


@dataclass(frozen=True)
class ClassFraction:
    """Per-class correct-classification estimate from the Monte Carlo route.

    ``p`` is the class-k hit count divided by n * prior_k, so that
    1 - sum_k prior_k * p_k reproduces the overall error exactly.
    """

    p: float
    stderr: float
    draws: int


@dataclass(frozen=True)
class BayesErrorEstimate:
    error: float
    stderr: float
    tau: float
    method: str  # closed_form | hdr | monte_carlo
    per_class: tuple = ()
    closed_form: float | None = None

    @property
    def discrepancy(self) -> float | None:
        if self.closed_form is None:
            return None
        return self.error - self.closed_form

    @property
    def levels_total(self) -> int:
        return sum(
            est.levels_total for est in self.per_class if isinstance(est, HdrEstimate)
        )


@dataclass(frozen=True)
class TemperatureCurve:
    taus: tuple[float, ...]
    estimates: tuple[BayesErrorEstimate, ...]
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class InversionResult:
    tau_star: float
    estimate: BayesErrorEstimate
    evaluations: int
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class BinaryTailEstimate:
    """K=2 error estimated through the flipped (complement) constraints.

    Each class contributes a single half-space, so its misclassification
    probability is itself a half-space probability and can be estimated in
    log space without the catastrophic cancellation of 1 - p.
    """

    log_error: float
    error: float
    rel_stderr: float
    levels_total: int

    @property
    def stderr(self) -> float:
        return self.error * self.rel_stderr


def _class_sets(model: GaussianClassModel, tau: float) -> list[HalfSpaceSet]:
    return [
        reduce_dimension(build_constraints(model, k, tau))
        for k in range(model.num_classes)
    ]


def _uniform_priors(model: GaussianClassModel) -> bool:
    return bool(
        np.max(np.abs(model.priors - 1.0 / model.num_classes)) <= 1e-12
    )


def compute_bayes_error(
    model: GaussianClassModel,
    tau: float,
    config: HdrConfig | None = None,
    threads: int = 1,
) -> BayesErrorEstimate:
    """Splitting-based error estimate: 1 - sum_k prior_k * P(class-k polytope).

    Per-class polytopes are built in the whitened space, projected onto the
    span of their normals, and integrated independently; stderrs combine as
    sqrt(sum prior_k^2 stderr_k^2).  For two classes with uniform priors the
    closed form is attached as a diagnostic.
    """
    if config is None:
        config = HdrConfig()
    sets = _class_sets(model, tau)

    def estimate_one(k: int, executor=None) -> HdrEstimate:
        try:
            return estimate_polytope_probability(
                sets[k], config, seed_key=(k,), executor=executor
            )
        except NestingError as exc:
            raise NestingError(f"class {k}: {exc}") from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_class = [estimate_one(k, pool) for k in range(model.num_classes)]
    else:
        per_class = [estimate_one(k) for k in range(model.num_classes)]

    error = 1.0 - float(np.dot(model.priors, [est.p for est in per_class]))
    error = min(max(error, 0.0), 1.0)
    stderr = math.sqrt(
        float(np.sum((model.priors * [est.stderr for est in per_class]) ** 2))
    )
    closed = None
    if model.num_classes == 2 and _uniform_priors(model):
        closed = model.binary_closed_form(tau)
    return BayesErrorEstimate(
        error=error,
        stderr=stderr,
        tau=tau,
        method="hdr",
        per_class=tuple(per_class),
        closed_form=closed,
    )


def binary_error_tail(
    model: GaussianClassModel,
    tau: float,
    config: HdrConfig | None = None,
    threads: int = 1,
) -> BinaryTailEstimate:
    """Tail-accurate K=2 error via per-class complement half-spaces."""
    if model.num_classes != 2:
        raise ValueError("tail route requires exactly 2 classes")
    if config is None:
        config = HdrConfig()
    sets = _class_sets(model, tau)
    flipped: list[HalfSpaceSet] = []
    for hs in sets:
        if hs.forced_empty:
            # class never wins; its misclassification probability is 1
            flipped.append(HalfSpaceSet(dim=hs.dim))
        elif not hs.constraints:
            flipped.append(HalfSpaceSet(dim=hs.dim, forced_empty=True))
        else:
            (h,) = hs.constraints
            flipped.append(
                HalfSpaceSet(
                    dim=hs.dim,
                    constraints=(replace(h, normal=-h.normal, offset=-h.offset),),
                )
            )

    estimates = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for k, hs in enumerate(flipped):
                estimates.append(
                    estimate_polytope_probability(hs, config, seed_key=(k,), executor=pool)
                )
    else:
        for k, hs in enumerate(flipped):
            estimates.append(estimate_polytope_probability(hs, config, seed_key=(k,)))

    terms = np.array([model.log_priors[k] + estimates[k].log_p for k in range(2)])
    log_error = float(logsumexp(terms))
    weights = np.exp(terms - max(log_error, -745.0))
    weights = weights / weights.sum() if weights.sum() > 0 else weights
    rel = math.sqrt(
        float(np.sum((weights * [est.stderr_log for est in estimates]) ** 2))
    )
    return BinaryTailEstimate(
        log_error=log_error,
        error=float(np.exp(log_error)),
        rel_stderr=rel,
        levels_total=sum(est.levels_total for est in estimates),
    )


def monte_carlo_bayes_error(
    model: GaussianClassModel, tau: float, n: int, seed: int
) -> BayesErrorEstimate:
    """Sampling oracle: draw labels from the priors, features from the class
    Gaussians, classify with the prior-aware rule, count mistakes."""
    if n < 1:
        raise ValueError("need at least one sample")
    if tau <= 0:
        raise ValueError("tau must be positive")
    rng = np.random.default_rng(seed)
    K = model.num_classes
    hits = np.zeros(K, dtype=np.int64)
    counts = np.zeros(K, dtype=np.int64)
    remaining = n
    while remaining > 0:
        m = min(_MC_CHUNK, remaining)
        y = rng.choice(K, size=m, p=model.priors)
        u = rng.standard_normal((m, model.dim))
        x = model.means[y] + tau * (u @ model.chol.T)
        pred = model.bayes_classify(x, tau)
        correct = pred == y
        np.add.at(hits, y[correct], 1)
        np.add.at(counts, y, 1)
        remaining -= m
    total_correct = int(hits.sum())
    error = 1.0 - total_correct / n
    stderr = math.sqrt(error * (1.0 - error) / n)
    per_class = []
    for k in range(K):
        if model.priors[k] > 0:
            q = hits[k] / n
            p_hat = q / model.priors[k]
            se = math.sqrt(max(q * (1.0 - q), 0.0) / n) / model.priors[k]
        else:
            p_hat, se = 0.0, 0.0
        per_class.append(ClassFraction(p=float(p_hat), stderr=float(se), draws=int(counts[k])))
    return BayesErrorEstimate(
        error=error,
        stderr=stderr,
        tau=tau,
        method="monte_carlo",
        per_class=tuple(per_class),
    )


def closed_form_estimate(model: GaussianClassModel, tau: float) -> BayesErrorEstimate:
    return BayesErrorEstimate(
        error=model.binary_closed_form(tau),
        stderr=0.0,
        tau=tau,
        method="closed_form",
        per_class=(),
    )


def temperature_sweep(
    model: GaussianClassModel,
    taus: np.ndarray,
    config: HdrConfig | None = None,
    threads: int = 1,
) -> TemperatureCurve:
    """Error estimates over a strictly increasing temperature grid.

    With the same config at every grid point the random streams are common
    across temperatures, which keeps the realized curve smooth.  For uniform
    priors a warning is recorded whenever an adjacent pair decreases by more
    than three combined standard errors (the underlying truth is monotone).
    """
    taus = np.asarray(taus, dtype=np.float64)
    if taus.ndim != 1 or taus.size < 1:
        raise ValueError("need a 1-d grid with at least one temperature")
    if np.any(taus <= 0) or np.any(np.diff(taus) <= 0):
        raise ValueError("grid must be positive and strictly increasing")
    estimates = [compute_bayes_error(model, float(t), config, threads) for t in taus]
    warnings: list[str] = []
    if _uniform_priors(model):
        for a, b in zip(estimates, estimates[1:]):
            drop = a.error - b.error
            band = 3.0 * math.hypot(a.stderr, b.stderr)
            if drop > band:
                warnings.append(
                    f"monotonicity violated beyond 3 stderr between tau={a.tau:g} "
                    f"and tau={b.tau:g} (drop {drop:.3g}, band {band:.3g})"
                )
    return TemperatureCurve(
        taus=tuple(float(t) for t in taus),
        estimates=tuple(estimates),
        warnings=tuple(warnings),
    )


def invert_temperature(
    model: GaussianClassModel,
    target: float,
    tau_lo: float,
    tau_hi: float,
    tol: float = 0.01,
    config: HdrConfig | None = None,
    threads: int = 1,
    tol_eps: float = 0.0,
    max_evals: int = 200,
) -> InversionResult:
    """Bisection solve of error(tau) = target on [tau_lo, tau_hi].

    Evaluations reuse one configuration (common random numbers), midpoints
    are geometric, and the loop stops when the bracket narrows to tol * tau
    or an evaluation lands within max(tol_eps, 2 * stderr) of the target.
    """
    if not 0 < tau_lo < tau_hi:
        raise ValueError("need 0 < tau_lo < tau_hi")
    if config is None:
        config = HdrConfig()
    warnings: list[str] = []

    evals = 0

    def evaluate(tau: float, cfg: HdrConfig) -> BayesErrorEstimate:
        nonlocal evals
        if evals >= max_evals:
            raise NestingError("inversion evaluation budget exhausted")
        evals += 1
        return compute_bayes_error(model, tau, cfg, threads)

    est_lo = evaluate(tau_lo, config)
    est_hi = evaluate(tau_hi, config)

    floor = max(est_lo.stderr, est_hi.stderr)
    if target < floor:
        config = replace(config, repeats=config.repeats * 4)
        est_lo = evaluate(tau_lo, config)
        est_hi = evaluate(tau_hi, config)
        if target < max(est_lo.stderr, est_hi.stderr):
            warnings.append(
                "target below the stderr floor of the escalated budget; "
                "the inverse is noise-limited"
            )

    if target < est_lo.error - 3 * est_lo.stderr or target > est_hi.error + 3 * est_hi.stderr:
        raise TargetRangeError("target outside achievable range")

    lo, hi = tau_lo, tau_hi
    best = est_lo if abs(est_lo.error - target) <= abs(est_hi.error - target) else est_hi
    while hi - lo > tol * math.sqrt(lo * hi):
        mid = math.sqrt(lo * hi)
        est = evaluate(mid, config)
        if abs(est.error - target) <= max(tol_eps, 2.0 * est.stderr):
            return InversionResult(
                tau_star=mid, estimate=est, evaluations=evals, warnings=tuple(warnings)
            )
        if est.error < target:
            lo = mid
        else:
            hi = mid
        best = est
    tau_star = math.sqrt(lo * hi)
    if best.tau != tau_star:
        best = evaluate(tau_star, config)
    return InversionResult(
        tau_star=tau_star, estimate=best, evaluations=evals, warnings=tuple(warnings)
    )


def one_vs_all_error(
    model: GaussianClassModel,
    j: int,
    tau: float,
    n: int,
    seed: int,
    weight_mode: str = "balanced",
) -> tuple[float, float]:
    """Monte Carlo error of separating class j from the mixture of the rest.

    Label 0 (class j) is drawn with weight w0 (1/2 in "balanced" mode, the
    class prior in "natural" mode) and the decision rule compares
    log w0 + log p_j(x) against log w1 + log p_rest(x), with the mixture
    evaluated by log-sum-exp over its components.
    """
    K = model.num_classes
    if K < 2:
        raise ValueError("one-vs-all needs at least 2 classes")
    if not 0 <= j < K:
        raise ValueError(f"class {j} out of range for K={K}")
    if n < 1:
        raise ValueError("need at least one sample")
    rest_mass = 1.0 - model.priors[j]
    if rest_mass <= 0:
        raise ValueError("remaining classes carry zero probability")
    if weight_mode == "balanced":
        w0 = 0.5
    elif weight_mode == "natural":
        w0 = float(model.priors[j])
        if not 0 < w0 < 1:
            raise ValueError("natural weighting needs 0 < prior_j < 1")
    else:
        raise ValueError(f"unknown weight mode {weight_mode!r}")

    others = np.array([i for i in range(K) if i != j])
    mix = model.priors[others] / rest_mass
    log_mix = np.log(np.where(mix > 0, mix, 1.0))
    log_mix[mix == 0] = -np.inf
    log_w0, log_w1 = math.log(w0), math.log(1.0 - w0)

    rng = np.random.default_rng(seed)
    mistakes = 0
    remaining = n
    while remaining > 0:
        m = min(_MC_CHUNK, remaining)
        y = (rng.random(m) >= w0).astype(np.int64)  # 0 = class j
        comp = np.full(m, j, dtype=np.int64)
        n1 = int(y.sum())
        if n1 > 0:
            comp[y == 1] = rng.choice(others, size=n1, p=mix)
        u = rng.standard_normal((m, model.dim))
        x = model.means[comp] + tau * (u @ model.chol.T)

        dens = np.empty((m, K))
        for i in range(K):
            dens[:, i] = model.log_density(i, x, tau)
        score0 = log_w0 + dens[:, j]
        score1 = log_w1 + logsumexp(dens[:, others] + log_mix, axis=1)
        pred = (score0 < score1).astype(np.int64)
        mistakes += int(np.sum(pred != y))
        remaining -= m

    error = mistakes / n
    return error, math.sqrt(error * (1.0 - error) / n)
