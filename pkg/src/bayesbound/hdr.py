"""Multilevel splitting estimator for Gaussian polytope probabilities.

Estimates P(u in polytope) for u ~ N(0, I_r) as a product of conditional
probabilities over nested events {s(u) > gamma_t}, where s is the minimum
constraint margin.  Levels adapt by quantile, the final level clamps to
gamma = 0, and all accumulation happens in log space so estimates far below
the float underflow threshold keep a usable log probability.
"""

import math
from concurrent.futures import Executor
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp

from .constraints import HalfSpaceSet
from .ess import ess_update_batch


class NestingError(RuntimeError):
    """Raised when the nesting sequence fails to reach gamma = 0."""


@dataclass(frozen=True)
class HdrConfig:
    """Estimator budget and schedule.

    ``thin`` and ``burnin`` count slice-sampler steps between retained draws
    and after each level's re-seeding; both default to the working dimension
    (burn-in to four times it).
    """

    n_per_level: int = 512
    rho: float = 0.5
    repeats: int = 8
    max_levels: int = 200
    seed: int = 0
    thin: int | None = None
    burnin: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must be in (0, 1)")
        if self.n_per_level < 16:
            raise ValueError("n_per_level must be at least 16")
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    def with_seed(self, seed: int) -> "HdrConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class HdrEstimate:
    """Probability estimate aggregated over independent repeats.

    ``p`` is exp(log_p) by construction; when every repeat underflows, p is
    0.0 while log_p stays finite.  ``stderr`` is the spread of the per-repeat
    probabilities across repeats (0 for a single repeat), ``stderr_log`` the
    spread of their logs.
    """

    p: float
    log_p: float
    stderr: float
    stderr_log: float
    levels: tuple[int, ...]
    degenerate_steps: int

    @property
    def levels_total(self) -> int:
        return int(sum(self.levels))


@dataclass(frozen=True)
class RepeatResult:
    log_p: float
    levels: int
    degenerate_steps: int


def _unit_constraints(hs: HalfSpaceSet) -> tuple[np.ndarray, np.ndarray]:
    """Normals scaled to unit length (offsets alike), so the estimator is
    exactly invariant under positive rescaling of any constraint."""
    normals = hs.normals()
    offsets = hs.offsets()
    norms = np.linalg.norm(normals, axis=1)
    return normals / norms[:, None], offsets / norms


def _collect_chain_samples(
    seeds: np.ndarray,
    normals: np.ndarray,
    offsets: np.ndarray,
    n_target: int,
    thin: int,
    burnin: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, int]:
    """Run one slice chain per seed row and pool thinned draws."""
    X = seeds.copy()
    degenerate = 0
    for _ in range(burnin):
        X, d = ess_update_batch(X, normals, offsets, rng)
        degenerate += d
    draws = math.ceil(n_target / X.shape[0])
    batches = []
    for _ in range(draws):
        for _ in range(thin):
            X, d = ess_update_batch(X, normals, offsets, rng)
            degenerate += d
        batches.append(X.copy())
    return np.concatenate(batches, axis=0)[:n_target], degenerate


def run_repeat(
    hs: HalfSpaceSet, config: HdrConfig, seed_seq: np.random.SeedSequence
) -> RepeatResult:
    """One independent splitting run; returns the log probability estimate."""
    rng = np.random.default_rng(seed_seq)
    normals, offsets = _unit_constraints(hs)
    r = hs.dim
    n = config.n_per_level
    thin = config.thin if config.thin is not None else max(1, r)
    burnin = config.burnin if config.burnin is not None else 4 * max(1, r)

    X = rng.standard_normal((n, r))
    s = np.min(X @ normals.T + offsets, axis=1)

    log_p = 0.0
    levels = 0
    degenerate = 0
    while True:
        levels += 1
        # thresholds ascend toward 0 from the infeasible side; once the
        # quantile crosses 0 the target event itself is the next level
        gamma = float(np.quantile(s, 1.0 - config.rho))
        if gamma >= 0.0:
            gamma = 0.0
        keep = s > gamma
        frac = float(np.mean(keep))
        log_p += math.log(frac) if frac > 0 else -math.inf
        if gamma == 0.0 or frac == 0.0:
            return RepeatResult(log_p=log_p, levels=levels, degenerate_steps=degenerate)
        if levels >= config.max_levels:
            raise NestingError("nesting failed to reach zero")
        X, d = _collect_chain_samples(
            X[keep], normals, offsets - gamma, n, thin, burnin, rng
        )
        degenerate += d
        s = np.min(X @ normals.T + offsets, axis=1)


def aggregate_repeats(results: list[RepeatResult]) -> HdrEstimate:
    logs = np.array([res.log_p for res in results])
    n_rep = len(results)
    log_p = float(logsumexp(logs) - math.log(n_rep)) if n_rep else -math.inf
    p_vals = np.exp(logs)
    if n_rep > 1:
        stderr = float(np.std(p_vals, ddof=1) / math.sqrt(n_rep))
        finite = np.isfinite(logs)
        if finite.all():
            stderr_log = float(np.std(logs, ddof=1) / math.sqrt(n_rep))
        elif finite.any():
            stderr_log = math.inf
        else:
            stderr_log = 0.0
    else:
        stderr = 0.0
        stderr_log = 0.0
    return HdrEstimate(
        p=float(np.exp(log_p)),
        log_p=log_p,
        stderr=stderr,
        stderr_log=stderr_log,
        levels=tuple(res.levels for res in results),
        degenerate_steps=sum(res.degenerate_steps for res in results),
    )


def exact_estimate(p: float) -> HdrEstimate:
    """Degenerate estimate for sets that are empty or unconstrained."""
    log_p = 0.0 if p == 1.0 else (-math.inf if p == 0.0 else math.log(p))
    return HdrEstimate(
        p=p, log_p=log_p, stderr=0.0, stderr_log=0.0, levels=(), degenerate_steps=0
    )


def repeat_seed_sequences(
    config: HdrConfig, seed_key: tuple[int, ...]
) -> list[np.random.SeedSequence]:
    """Independent, scheduling-invariant streams keyed by (seed, *key, repeat)."""
    return [
        np.random.SeedSequence(config.seed, spawn_key=(*seed_key, rep))
        for rep in range(config.repeats)
    ]


def estimate_polytope_probability(
    hs: HalfSpaceSet,
    config: HdrConfig,
    seed_key: tuple[int, ...] = (),
    executor: Executor | None = None,
) -> HdrEstimate:
    """Splitting estimate of the set's standard normal probability.

    Forced-empty sets return p = 0 and unconstrained sets p = 1 exactly.
    Repeats derive their random streams from (config.seed, *seed_key,
    repeat index), so results are bit-identical regardless of the executor's
    scheduling.
    """
    if hs.forced_empty:
        return exact_estimate(0.0)
    if not hs.constraints:
        return exact_estimate(1.0)
    seqs = repeat_seed_sequences(config, seed_key)
    if executor is not None:
        results = list(executor.map(lambda sq: run_repeat(hs, config, sq), seqs))
    else:
        results = [run_repeat(hs, config, sq) for sq in seqs]
    return aggregate_repeats(results)


def mc_polytope_probability(
    hs: HalfSpaceSet, n: int, seed: int, chunk: int = 1 << 14
) -> tuple[float, float]:
    """Brute-force oracle: fraction of n i.i.d. N(0, I) draws inside the set."""
    if n < 1:
        raise ValueError("need at least one sample")
    if hs.forced_empty:
        return 0.0, 0.0
    if not hs.constraints:
        return 1.0, 0.0
    normals = hs.normals()
    offsets = hs.offsets()
    rng = np.random.default_rng(seed)
    hits = 0
    remaining = n
    while remaining > 0:
        m = min(chunk, remaining)
        u = rng.standard_normal((m, hs.dim))
        hits += int(np.sum(np.all(u @ normals.T + offsets > 0, axis=1)))
        remaining -= m
    p = hits / n
    return p, math.sqrt(p * (1.0 - p) / n)
