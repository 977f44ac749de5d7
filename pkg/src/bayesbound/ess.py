"""Rejection-free elliptical slice sampling on half-space intersections.

For a current state x and auxiliary draw v ~ N(0, I), points on the ellipse
theta -> x cos(theta) + v sin(theta) satisfy a . u + c > 0 exactly on an
angular arc, so the full active set is an intersection of arcs and can be
computed in closed form.  Sampling theta uniformly from that set gives a
Markov kernel that leaves N(0, I) restricted to the domain invariant and
never rejects.
"""

from dataclasses import dataclass

import numpy as np

from .constraints import HalfSpaceSet

TWO_PI = 2.0 * np.pi
# arc endpoints are exact up to rounding; tolerate this much slack
_ENDPOINT_TOL = 1e-9


@dataclass(frozen=True)
class AngleIntervalSet:
    """Disjoint sorted angle intervals in [0, 2*pi) with their total length."""

    intervals: tuple[tuple[float, float], ...]
    total_measure: float

    def contains(self, theta: float) -> bool:
        t = theta % TWO_PI
        return any(lo <= t < hi for lo, hi in self.intervals)


_FULL_CIRCLE = AngleIntervalSet(intervals=((0.0, TWO_PI),), total_measure=TWO_PI)
_EMPTY = AngleIntervalSet(intervals=(), total_measure=0.0)


def _arc_parameters(p: np.ndarray, q: np.ndarray, c: np.ndarray):
    """Per-constraint arc of theta where rho*cos(theta - phi) + c > 0.

    Returns (full, empty, lo, length): boolean masks plus the arc start
    (normalized to [0, 2*pi)) and arc length for the strict-arc cases.
    """
    rho = np.hypot(p, q)
    full = c >= rho
    empty = (c <= -rho) & ~full
    phi = np.arctan2(q, p)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(rho > 0, -c / np.where(rho > 0, rho, 1.0), 0.0)
    alpha = np.arccos(np.clip(ratio, -1.0, 1.0))
    lo = np.mod(phi - alpha, TWO_PI)
    return full, empty, lo, 2.0 * alpha


def active_intervals(x: np.ndarray, v: np.ndarray, hs: HalfSpaceSet) -> AngleIntervalSet:
    """Exact active angle set of the ellipse through x and v.

    Precondition: x satisfies every constraint strictly, so theta = 0 is in
    the set.  If rounding of arc endpoints excludes theta = 0 by less than
    1e-9 the nearest interval is widened to include it; an entirely empty
    result signals numerical degeneracy and the caller keeps x.
    """
    if hs.forced_empty:
        return _EMPTY
    if not hs.constraints:
        return _FULL_CIRCLE
    normals = hs.normals()
    offsets = hs.offsets()
    full, empty, lo, length = _arc_parameters(normals @ x, normals @ v, offsets)
    if np.any(empty):
        return _EMPTY

    # split arcs at the 2*pi wrap into plain [start, end) pieces, then sweep
    starts: list[float] = []
    ends: list[float] = []
    n_arcs = 0
    for i in range(len(offsets)):
        if full[i]:
            continue
        n_arcs += 1
        s, e = float(lo[i]), float(lo[i] + length[i])
        if e <= TWO_PI:
            starts.append(s)
            ends.append(e)
        else:
            starts.extend([s, 0.0])
            ends.extend([TWO_PI, e - TWO_PI])
    if n_arcs == 0:
        return _FULL_CIRCLE

    angles = np.array(starts + ends)
    deltas = np.array([1] * len(starts) + [-1] * len(ends))
    order = np.argsort(angles, kind="stable")
    angles = angles[order]
    deltas = deltas[order]
    coverage = np.cumsum(deltas)
    gap_hi = np.append(angles[1:], TWO_PI)

    intervals: list[list[float]] = []
    for i in range(len(angles)):
        if coverage[i] == n_arcs and gap_hi[i] > angles[i]:
            if intervals and intervals[-1][1] == angles[i]:
                intervals[-1][1] = gap_hi[i]
            else:
                intervals.append([angles[i], gap_hi[i]])
    if not intervals:
        return _EMPTY

    # keep theta=0 inside the set when it was lost to endpoint rounding
    contains_zero = intervals[0][0] == 0.0
    if not contains_zero:
        if intervals[0][0] < _ENDPOINT_TOL:
            intervals[0][0] = 0.0
        elif intervals[-1][1] > TWO_PI - _ENDPOINT_TOL:
            intervals[-1][1] = TWO_PI

    total = float(sum(hi - lo_ for lo_, hi in intervals))
    return AngleIntervalSet(
        intervals=tuple((float(a), float(b)) for a, b in intervals),
        total_measure=total,
    )


def sample_angle(intervals: AngleIntervalSet, rng: np.random.Generator) -> float:
    """Uniform draw from the interval set (measure-weighted choice, then uniform)."""
    u = rng.uniform(0.0, intervals.total_measure)
    for lo, hi in intervals.intervals:
        width = hi - lo
        if u < width:
            return lo + u
        u -= width
    return intervals.intervals[-1][1]


def ess_step(x: np.ndarray, hs: HalfSpaceSet, rng: np.random.Generator) -> np.ndarray:
    """One elliptical slice move from x; returns x unchanged on degeneracy.

    The returned point satisfies every constraint (checked to 1e-9 slack
    relative to the constraint's magnitude on the ellipse).
    """
    v = rng.standard_normal(x.shape[0])
    intervals = active_intervals(x, v, hs)
    if intervals.total_measure <= 0.0:
        return x
    theta = sample_angle(intervals, rng)
    out = x * np.cos(theta) + v * np.sin(theta)
    if hs.constraints:
        normals = hs.normals()
        slack = normals @ out + hs.offsets()
        scale = np.maximum(1.0, np.hypot(normals @ x, normals @ v))
        if np.any(slack < -_ENDPOINT_TOL * scale):
            raise AssertionError("elliptical slice step left the domain")
    return out


def ess_update_batch(
    X: np.ndarray,
    normals: np.ndarray,
    offsets: np.ndarray,
    rng: np.random.Generator,
) -> tuple[np.ndarray, int]:
    """One slice move applied to every row of X under shared constraints.

    Vectorizes the arc intersection across chains with an event sweep:
    sorted arc endpoints, coverage by cumulative sum, then inverse-transform
    sampling over the active gaps.  Rows whose active set vanishes (numerical
    degeneracy) are returned unchanged; their count is the second output.
    """
    n, r = X.shape
    m = normals.shape[0]
    V = rng.standard_normal((n, r))
    if m == 0:
        theta = rng.uniform(0.0, TWO_PI, size=n)
        return X * np.cos(theta)[:, None] + V * np.sin(theta)[:, None], 0

    full, empty, lo, length = _arc_parameters(X @ normals.T, V @ normals.T, offsets)
    row_empty = np.any(empty, axis=1)

    hi = lo + length
    # piece 1 covers [lo, min(hi, 2pi)), piece 2 the wrapped remainder
    s1 = np.where(full, 0.0, lo)
    e1 = np.where(full, TWO_PI, np.minimum(hi, TWO_PI))
    s2 = np.zeros_like(s1)
    e2 = np.where(full, 0.0, np.maximum(hi - TWO_PI, 0.0))

    angles = np.concatenate([s1, s2, e1, e2], axis=1)
    deltas = np.concatenate(
        [np.ones((n, 2 * m)), -np.ones((n, 2 * m))], axis=1
    )
    order = np.argsort(angles, axis=1, kind="stable")
    angles = np.take_along_axis(angles, order, axis=1)
    deltas = np.take_along_axis(deltas, order, axis=1)
    coverage = np.cumsum(deltas, axis=1)
    gap_hi = np.concatenate([angles[:, 1:], np.full((n, 1), TWO_PI)], axis=1)
    gap_len = np.maximum(gap_hi - angles, 0.0)
    act_len = np.where(coverage == m, gap_len, 0.0)
    total = act_len.sum(axis=1)

    degenerate = row_empty | (total <= 0.0)
    # u in (0, total]: a draw of exactly 0 could select an inactive gap
    u = (1.0 - rng.random(n)) * np.where(degenerate, 1.0, total)
    cum = np.cumsum(act_len, axis=1)
    idx = (np.minimum(np.sum(cum < u[:, None], axis=1), 4 * m - 1))[:, None]
    prev = np.take_along_axis(cum, idx, 1) - np.take_along_axis(act_len, idx, 1)
    theta_sel = np.take_along_axis(angles, idx, 1) + (u[:, None] - prev)
    theta = np.where(degenerate, 0.0, theta_sel[:, 0])

    out = X * np.cos(theta)[:, None] + V * np.sin(theta)[:, None]
    if np.any(degenerate):
        out[degenerate] = X[degenerate]
    return out, int(np.sum(degenerate))
