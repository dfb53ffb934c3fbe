"""Model builders: graph Laplacians and a 1-D Schrodinger discretization."""

from __future__ import annotations

import numpy as np

from .errors import NegativePotential, UnknownBuilder
from .space import Space, build_space, load_space
from .spectral import Operator, make_operator


def cycle_laplacian(n: int):
    """Hop-metric cycle C_n with the standard graph Laplacian, deflated."""
    idx = np.arange(n)
    diff = np.abs(idx[:, None] - idx[None, :])
    dist = np.minimum(diff, n - diff).astype(float)
    space = build_space(dist, np.ones(n))
    mat = 2.0 * np.eye(n)
    mat[idx, (idx + 1) % n] = -1.0
    mat[idx, (idx - 1) % n] = -1.0
    op = make_operator(space, mat, locality_radius=1.0, kernel_handling="deflate")
    return space, op


def path_laplacian(n: int):
    """Hop-metric path P_n with the graph Laplacian, deflated."""
    idx = np.arange(n)
    dist = np.abs(idx[:, None] - idx[None, :]).astype(float)
    space = build_space(dist, np.ones(n))
    mat = np.diag(np.r_[1.0, np.full(n - 2, 2.0), 1.0] if n > 1 else [0.0])
    mat[idx[:-1], idx[:-1] + 1] = -1.0
    mat[idx[:-1] + 1, idx[:-1]] = -1.0
    op = make_operator(space, mat, locality_radius=1.0, kernel_handling="deflate")
    return space, op


def schrodinger_1d(n: int, V=0.0, h=None):
    """-d^2/dx^2 + V on n interior grid points of [0, 1], Dirichlet ends.

    Measure weight h per point, so L^2 sums approximate the interval integral.
    """
    if h is None:
        h = 1.0 / (n + 1)
    pot = np.broadcast_to(np.asarray(V, dtype=float), (n,)).copy()
    if np.any(pot < 0):
        raise NegativePotential(f"V must be >= 0, min {pot.min()}")
    x = (np.arange(n) + 1.0) * h
    dist = np.abs(x[:, None] - x[None, :])
    space = build_space(dist, np.full(n, h), coords=x[:, None])
    lap = (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h ** 2
    mat = (lap + np.diag(pot)) / h  # kernel: K diag(mu) equals the matrix form
    return space, make_operator(space, mat, locality_radius=h)


def weighted_graph(source):
    """Space file with an edge list -> mu-symmetric graph Laplacian, deflated."""
    space = load_space(source)
    if isinstance(source, (str, bytes)):
        import json
        with open(source) as fh:
            source = json.load(fh)
    edges = source["metric"].get("edges")
    if edges is None:
        raise UnknownBuilder("weighted_graph requires an edge-list space file")
    n = space.n
    adj = np.zeros((n, n))
    for i, j, w in edges:
        adj[int(i), int(j)] = adj[int(j), int(i)] = 1.0 / float(w)
    deg = adj.sum(axis=1)
    lap = np.diag(deg) - adj
    inv_mu = 1.0 / space.weights
    mat = inv_mu[:, None] * lap * inv_mu[None, :]
    max_edge = max(float(e[2]) for e in edges)
    return space, make_operator(space, mat, locality_radius=max_edge,
                                kernel_handling="deflate")


def build_model(spec):
    """Model spec dict -> (Space, Operator)."""
    if "matrix" in spec.get("operator", {}):
        space = load_space(spec["space"]) if not isinstance(spec["space"], Space) \
            else spec["space"]
        return space, make_operator(space, spec["operator"]["matrix"],
                                    kernel_handling=spec.get("kernel_handling"),
                                    shift=spec.get("shift", 0.0))
    builder = spec.get("builder") or spec.get("operator", {}).get("builder")
    params = spec.get("params") or spec.get("operator", {}).get("params", {})
    if builder == "cycle_laplacian":
        return cycle_laplacian(int(params["n"]))
    if builder == "path_laplacian":
        return path_laplacian(int(params["n"]))
    if builder == "schrodinger_1d":
        return schrodinger_1d(int(params["n"]), params.get("V", 0.0),
                              params.get("h"))
    if builder == "weighted_graph":
        return weighted_graph(params["file"] if "file" in params else params["space"])
    raise UnknownBuilder(f"unknown builder {builder!r}")
