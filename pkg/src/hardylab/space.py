"""Finite metric-measure spaces: balls, volumes, doubling constants, rescaling.

A Space is a finite point set with an explicit metric matrix and positive
measure weights.  All ball/volume bookkeeping uses the strict ball
B(x, t) = {y : d(x, y) < t}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .errors import DegenerateRange, MeasureViolation, MetricViolation

_METRIC_TOL = 1e-12


@dataclass(frozen=True)
class Space:
    """Finite metric-measure space (labels, metric matrix, weights)."""

    n: int
    labels: tuple
    dist: np.ndarray
    weights: np.ndarray
    coords: Optional[np.ndarray] = None

    @property
    def diameter(self):
        return float(self.dist.max())

    @property
    def total_mass(self):
        return float(self.weights.sum())

    def sorted_dist(self):
        """Row-sorted copy of the distance matrix, used for fast volumes."""
        return np.sort(self.dist, axis=1)


@dataclass(frozen=True)
class DoublingProfile:
    """Fitted growth bound V(x, s t) <= c0 * s^q * V(x, t) on the probe grid."""

    q: float
    c0: float
    samples: list = field(default_factory=list)


def _check_metric(dist):
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    if dist.shape != (n, n):
        raise MetricViolation(f"distance matrix must be square, got {dist.shape}")
    if np.any(dist < 0):
        raise MetricViolation("negative distance entry")
    if np.any(np.abs(np.diag(dist)) > 0):
        raise MetricViolation("nonzero diagonal")
    if not np.allclose(dist, dist.T, rtol=0, atol=_METRIC_TOL * max(1.0, dist.max())):
        raise MetricViolation("asymmetric distance matrix")
    off = dist + np.diag([np.inf] * n)
    if np.any(off <= 0):
        raise MetricViolation("zero off-diagonal distance (duplicate points rejected)")
    tol = _METRIC_TOL * max(1.0, dist.max())
    for k in range(n):
        relaxed = dist[:, k, None] + dist[None, k, :]
        if np.any(dist > relaxed + tol):
            i, j = np.unravel_index(np.argmax(dist - relaxed), dist.shape)
            raise MetricViolation(
                f"triangle inequality fails: d[{i},{j}]={dist[i, j]} > "
                f"d[{i},{k}]+d[{k},{j}]={relaxed[i, j]}"
            )
    return dist


def _check_omega1_submultiplicative(dist):
    # (1 + d_ij) <= (1 + d_ik)(1 + d_kj); follows from the triangle
    # inequality but asserted directly on all triples.
    n = dist.shape[0]
    w = 1.0 + dist
    tol = 1e-10 * max(1.0, w.max() ** 2)
    for k in range(n):
        prod = w[:, k, None] * w[None, k, :]
        if np.any(w > prod + tol):
            raise MetricViolation("omega_1 submultiplicativity fails")


def build_space(dist, weights, labels=None, coords=None) -> Space:
    """Validate a metric matrix + weights and return an immutable Space."""
    dist = _check_metric(dist)
    n = dist.shape[0]
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (n,):
        raise MeasureViolation(f"weights length {weights.shape} != point count {n}")
    if np.any(weights <= 0):
        raise MeasureViolation("non-positive weight")
    _check_omega1_submultiplicative(dist)
    if labels is None:
        labels = tuple(range(n))
    else:
        labels = tuple(labels)
    dist = dist.copy()
    weights = weights.copy()
    dist.flags.writeable = False
    weights.flags.writeable = False
    if coords is not None:
        coords = np.asarray(coords, dtype=float).copy()
        coords.flags.writeable = False
    return Space(n=n, labels=labels, dist=dist, weights=weights, coords=coords)


def space_from_edges(n, edges, weights, labels=None) -> Space:
    """Build a Space from an undirected weighted edge list.

    The metric is the shortest-path completion of the edge lengths.
    """
    adj = np.full((n, n), np.inf)
    np.fill_diagonal(adj, 0.0)
    for i, j, w in edges:
        i, j = int(i), int(j)
        w = float(w)
        if w <= 0:
            raise MetricViolation(f"edge length must be positive, got {w}")
        adj[i, j] = min(adj[i, j], w)
        adj[j, i] = min(adj[j, i], w)
    dist = shortest_path(adj, method="FW", directed=False)
    if np.any(np.isinf(dist)):
        raise MetricViolation("edge list does not connect the point set")
    return build_space(dist, weights, labels=labels)


def load_space(source) -> Space:
    """Load a Space from a JSON file path or an already-parsed dict."""
    if isinstance(source, (str, bytes)):
        with open(source) as fh:
            source = json.load(fh)
    labels = source.get("points")
    weights = source["weights"]
    metric = source["metric"]
    if "matrix" in metric:
        return build_space(metric["matrix"], weights, labels=labels)
    n = len(weights)
    return space_from_edges(n, metric["edges"], weights, labels=labels)


def ball(space: Space, center: int, radius: float):
    """Indices of the strict ball B(center, radius) = {y : d < radius}."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    return np.flatnonzero(space.dist[center] < radius)


def volume(space: Space, center: int, radius: float) -> float:
    """mu(B(center, radius)) with the strict ball."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    return float(space.weights[space.dist[center] < radius].sum())


def _volume_rows(space, radii):
    """V(x, r) for all x and each r in radii, shape (n, len(radii))."""
    order = np.argsort(space.dist, axis=1)
    sorted_d = np.take_along_axis(space.dist, order, axis=1)
    cum_w = np.cumsum(np.take_along_axis(
        np.broadcast_to(space.weights, (space.n, space.n)), order, axis=1), axis=1)
    out = np.empty((space.n, len(radii)))
    for k, r in enumerate(radii):
        counts = np.sum(sorted_d < r, axis=1)
        out[:, k] = np.where(counts > 0, cum_w[np.arange(space.n), np.maximum(counts - 1, 0)], 0.0)
    return out


def _radius_grid(space: Space):
    """Probe radii: distinct distances, consecutive midpoints, +-eps jitter.

    V(x, .) is a step function with jumps only at pairwise distances, so this
    grid is exhaustive for max-ratio fits up to the strict-boundary jitter.
    """
    vals = np.unique(space.dist)
    eps = 1e-9 * max(space.diameter, 1.0)
    mids = (vals[:-1] + vals[1:]) / 2.0
    grid = np.concatenate([vals, mids, vals + eps, vals - eps, [vals[-1] + eps]])
    grid = np.unique(grid[grid > 0])
    return grid


def doubling_profile(space: Space, q_grid: Sequence[float]):
    """Fit c0 per candidate q in V(x, s t) <= c0 s^q V(x, t), exhaustively.

    The (t, s) probes run over the finite radius grid and all ratios of
    radius pairs, which is exact for step-function volumes.
    """
    q_grid = list(q_grid)
    if not q_grid:
        raise ValueError("q_grid must be nonempty")
    if any(q <= 0 for q in q_grid):
        raise ValueError("all q candidates must be positive")
    radii = _radius_grid(space)
    vols = _volume_rows(space, radii)  # (n, R)
    profiles = []
    # ratio pairs: for t = radii[a], s t = radii[b] with b > a
    R = len(radii)
    with np.errstate(divide="ignore"):
        log_r = np.log(radii)
    for q in q_grid:
        best = 1.0
        witness = None
        for a in range(R):
            t = radii[a]
            s = radii[a + 1:] / t
            keep = s > 1.0
            if not np.any(keep):
                continue
            s = s[keep]
            vt = vols[:, a]  # (n,)
            vst = vols[:, a + 1:][:, keep]  # (n, S)
            ratios = vst / (np.power(s, q)[None, :] * vt[:, None])
            idx = np.unravel_index(np.argmax(ratios), ratios.shape)
            if ratios[idx] > best:
                best = float(ratios[idx])
                witness = (int(idx[0]), float(t), float(s[idx[1]]), best)
        samples = [witness] if witness is not None else []
        profiles.append(DoublingProfile(q=q, c0=best, samples=samples))
    return profiles


def check_lower_volume(space: Space, y: int, s_range):
    """Fit V(y, s) >= c s^kappa on s_range subset of (1, diam].

    kappa is the log-log slope of the volume step function over the probe
    grid (snapped to a 0.05 grid), c the largest admissible constant.
    """
    if space.n < 2:
        raise DegenerateRange("space must have at least 2 points")
    lo, hi = float(s_range[0]), float(s_range[1])
    hi = min(hi, space.diameter)
    if not (lo >= 1.0) or hi <= lo:
        raise DegenerateRange(f"empty s-range after clipping: ({lo}, {hi}]")
    radii = np.unique(space.dist)
    probes = radii[(radii > lo) & (radii <= hi)]
    probes = np.unique(np.concatenate([probes, [hi]]))
    if probes.size == 0:
        raise DegenerateRange("no probe radii in range")
    vols = np.array([volume(space, y, float(s)) for s in probes])
    if probes.size == 1 or np.allclose(vols, vols[0]):
        kappa = 0.0
    else:
        slope = np.polyfit(np.log(probes), np.log(vols), 1)[0]
        kappa = float(np.round(max(slope, 0.0) / 0.05) * 0.05)
    c = float(np.min(vols / np.power(probes, kappa)))
    return c, kappa


def rescale_metric(space: Space, tau: float) -> Space:
    """Metric rescaling d -> tau^{-1/2} d, weights unchanged."""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return build_space(space.dist * tau ** -0.5, space.weights,
                       labels=space.labels, coords=space.coords)
