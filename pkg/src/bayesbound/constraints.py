"""Whitened decision constraints for one class.

For class k the correct-decision region, expressed in the whitened variable
u ~ N(0, I), is the intersection of K-1 half-spaces.  The generated normals
and offsets carry the temperature and the prior log-odds, so the standard
normal probability of the set is exactly the class-k term of the optimal
error decomposition.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr, solve_triangular

from .model import GaussianClassModel

# relative threshold for treating two class means as coincident
_DEGENERACY_RTOL = 1e-12


@dataclass(frozen=True)
class HalfSpace:
    """Constraint a . u + c > 0 on u ~ N(0, I_r)."""

    normal: np.ndarray
    offset: float


@dataclass(frozen=True)
class HalfSpaceSet:
    """Intersection of half-spaces; ``forced_empty`` marks probability zero.

    Invariant: when ``forced_empty`` is set the constraint list is empty;
    otherwise every stored normal is nonzero.
    """

    dim: int
    constraints: tuple[HalfSpace, ...] = ()
    forced_empty: bool = False

    def normals(self) -> np.ndarray:
        """Stacked normals, shape (m, dim); (0, dim) when empty."""
        if not self.constraints:
            return np.zeros((0, self.dim))
        return np.stack([h.normal for h in self.constraints])

    def offsets(self) -> np.ndarray:
        return np.array([h.offset for h in self.constraints])

    def contains(self, u: np.ndarray) -> bool | np.ndarray:
        """Membership of u (single point or batch) in the intersection."""
        if self.forced_empty:
            out = np.zeros(np.shape(u)[:-1], dtype=bool)
            return bool(out) if out.ndim == 0 else out
        if not self.constraints:
            out = np.ones(np.shape(u)[:-1], dtype=bool)
            return bool(out) if out.ndim == 0 else out
        vals = np.asarray(u) @ self.normals().T + self.offsets()
        out = np.all(vals > 0, axis=-1)
        return bool(out) if out.ndim == 0 else out


def build_constraints(model: GaussianClassModel, k: int, tau: float) -> HalfSpaceSet:
    """Half-space set whose N(0, I) probability is class k's correct-decision mass.

    For each competitor j the normal is 2 L^-1 (mean_k - mean_j) and the
    offset is ||normal||^2 / (4 tau) + 2 tau log(prior_k / prior_j).  The
    prior term vanishes for uniform priors.  Coincident means resolve by the
    classifier's tie-break (lower index wins): the constraint is dropped when
    k wins, otherwise the whole set is forced empty.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    K, d = model.num_classes, model.dim
    if not 0 <= k < K:
        raise ValueError(f"class {k} out of range for K={K}")
    if K == 1:
        return HalfSpaceSet(dim=d)

    others = [j for j in range(K) if j != k]
    diffs = model.means[k] - model.means[others]  # (K-1, d)
    w = solve_triangular(model.chol, diffs.T, lower=True).T  # rows: L^-1 (mu_k - mu_j)
    normals = 2.0 * w
    norms = np.linalg.norm(normals, axis=1)

    whitened_means = solve_triangular(model.chol, model.means.T, lower=True).T
    scale = 2.0 * max(1.0, float(np.mean(np.linalg.norm(whitened_means, axis=1))))

    constraints: list[HalfSpace] = []
    for idx, j in enumerate(others):
        b_tilde = 0.25 * norms[idx] ** 2
        if model.priors[j] == model.priors[k]:
            prior_term = 0.0  # exact zero, also covers prior 0 vs 0
        else:
            prior_term = 2.0 * tau * (model.log_priors[k] - model.log_priors[j])
        if np.isinf(prior_term):
            # a zero-prior class never beats a positive-prior one
            if prior_term > 0:
                continue
            return HalfSpaceSet(dim=d, forced_empty=True)
        offset = b_tilde / tau + prior_term
        if norms[idx] < _DEGENERACY_RTOL * scale:
            # coincident means: the pair is decided everywhere at once
            if offset > 0 or (offset == 0 and j > k):
                continue  # k wins the tie: constraint always true, drop it
            return HalfSpaceSet(dim=d, forced_empty=True)
        constraints.append(HalfSpace(normal=normals[idx], offset=float(offset)))

    return HalfSpaceSet(dim=d, constraints=tuple(constraints))


def reduce_dimension(hs: HalfSpaceSet, return_basis: bool = False):
    """Project the set onto the span of its normals (rank <= K-1 dimensions).

    Uses column-pivoted QR for an orthonormal basis Q; normals become Q^T a
    with offsets unchanged.  By isotropy of N(0, I) the probability of the
    set is unchanged, and membership of u maps to membership of Q^T u.
    With ``return_basis`` the (dim, rank) basis comes back alongside the set.
    """
    if hs.forced_empty or not hs.constraints:
        return (hs, np.eye(hs.dim)) if return_basis else hs
    a_cols = hs.normals().T  # (d, m)
    q, r, _ = qr(a_cols, mode="economic", pivoting=True)
    diag = np.abs(np.diag(np.atleast_2d(r)))
    tol = max(a_cols.shape) * np.finfo(np.float64).eps * (diag[0] if diag.size else 0.0)
    rank = max(int(np.sum(diag > tol)), 1)
    basis = q[:, :rank]  # (d, rank)
    reduced = hs.normals() @ basis  # (m, rank)
    out = HalfSpaceSet(
        dim=rank,
        constraints=tuple(
            HalfSpace(normal=reduced[i], offset=h.offset)
            for i, h in enumerate(hs.constraints)
        ),
    )
    return (out, basis) if return_basis else out
