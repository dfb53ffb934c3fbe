"""Square function, H^1 norm, and atom / molecule generation and validation.

The cone integral is discretized on a log-uniform time grid with dt/t
weights.  The cone uses d(x,y) <= t while the volume normalizer V(x,t)
uses the strict ball; both conventions are deliberate and recorded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import gammainc

from .errors import AtomInfeasible, QuadratureTooCoarse
from .space import Space
from .spectral import SpectralDecomposition, kernel_of_function

TRUNCATION_GATE = 1e-6
SUPPORT_THRESHOLD = 1e-12


@dataclass(frozen=True)
class ConeQuadrature:
    """Log-uniform time grid with weights summing to log(t_max/t_min)."""

    t_min: float
    t_max: float
    steps_per_octave: int
    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def build(cls, t_min, t_max, steps_per_octave=8):
        if not (0 < t_min < t_max):
            raise ValueError(f"need 0 < t_min < t_max, got ({t_min}, {t_max})")
        if steps_per_octave < 1:
            raise ValueError("steps_per_octave must be >= 1")
        span = np.log(t_max / t_min)
        n_cells = max(int(np.ceil(span / np.log(2) * steps_per_octave)), 1)
        dlog = span / n_cells
        log_nodes = np.log(t_min) + dlog * (np.arange(n_cells) + 0.5)
        return cls(t_min=float(t_min), t_max=float(t_max),
                   steps_per_octave=int(steps_per_octave),
                   nodes=np.exp(log_nodes), weights=np.full(n_cells, dlog))


def default_quadrature(decomp: SpectralDecomposition, steps_per_octave=8):
    """Spectrum-adapted grid; t_min small enough for the truncation gate."""
    lam = decomp.eigenvalues
    return ConeQuadrature.build(1e-4 / np.sqrt(lam[-1]), 10.0 / np.sqrt(lam[0]),
                                steps_per_octave)


@dataclass(frozen=True)
class Atom:
    a: np.ndarray
    b: np.ndarray
    ball: tuple  # (center index, radius)
    M: int


@dataclass(frozen=True)
class Molecule:
    a_tilde: np.ndarray
    b_tilde: np.ndarray
    ball: tuple
    M: int
    epsilon: float


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    margins: list = field(default_factory=list)  # (condition id, worst slack, witness)
    best_epsilon: Optional[float] = None


def _l2(space, f):
    return float(np.sqrt(np.sum(np.abs(f) ** 2 * space.weights)))


def _heat_band_values(decomp, quad):
    """phi(t, lambda) = t^2 lambda e^{-t^2 lambda} on nodes x modes."""
    t2 = quad.nodes[:, None] ** 2
    lam = decomp.eigenvalues[None, :]
    return t2 * lam * np.exp(-t2 * lam)  # (n_t, n_modes)


def truncation_error_bound(decomp: SpectralDecomposition, quad: ConeQuadrature,
                           f_l2_norm: float) -> float:
    """Rigorous bound on the square-function mass neglected outside [t_min, t_max].

    Per mode, int (t^2 lam)^2 e^{-2 t^2 lam} dt/t over a tail equals
    (1/8) * incomplete-gamma(2, .) after u = 2 t^2 lam; the cone average is
    bounded by 1/min_x V(x,t) <= 1/min mu.
    """
    lam = decomp.eigenvalues
    u_lo = 2.0 * quad.t_min ** 2 * lam
    u_hi = 2.0 * quad.t_max ** 2 * lam
    lower = gammainc(2.0, u_lo) / 8.0            # gamma(2,u)/Gamma(2)
    upper = (1.0 - gammainc(2.0, u_hi)) / 8.0    # Gamma(2,u)/Gamma(2)
    mu_min = float(decomp.space.weights.min())
    tail_sq = float(np.sum(lower + upper)) / mu_min * f_l2_norm ** 2
    return float(np.sqrt(max(tail_sq, 0.0)))


def _cone_profiles(space, quad):
    """For each t: strict-ball volumes V(x,t) and the cone mask d <= t."""
    for t, w in zip(quad.nodes, quad.weights):
        mask = space.dist <= t
        vols = (space.dist < t) @ space.weights
        yield t, w, mask, vols


def square_function(space: Space, decomp: SpectralDecomposition, f, quad: ConeQuadrature,
                    check_truncation=True):
    """Discrete S_h f over the quadrature cone."""
    f = np.asarray(f)
    norm_f = _l2(space, f)
    if check_truncation and norm_f > 0:
        bound = truncation_error_bound(decomp, quad, norm_f)
        if bound > TRUNCATION_GATE * norm_f:
            raise QuadratureTooCoarse(
                f"truncation bound {bound:.3e} exceeds {TRUNCATION_GATE} * ||f||")
    phi = _heat_band_values(decomp, quad)  # (n_t, n_modes)
    coeffs = decomp.coefficients(f)
    band = decomp.eigenvectors @ (phi * coeffs[None, :]).T  # (n, n_t)
    dens = (np.abs(band) ** 2) * space.weights[:, None]     # (n, n_t)
    s2 = np.zeros(space.n)
    for k, (t, w, mask, vols) in enumerate(_cone_profiles(space, quad)):
        s2 += w * (mask @ dens[:, k]) / vols
    return np.sqrt(s2)


def square_function_l2_bound(space: Space, decomp: SpectralDecomposition,
                             quad: ConeQuadrature) -> float:
    """Rigorous constant C_S with ||S_h f||_2 <= C_S ||f||_2.

    Uses ||S_h f||_2^2 = sum_t w <g_t, A(., t) g_t> with
    A(y, t) = sum_x mu(x) 1[d(x,y)<=t] / V(x,t), bounded by its max over y.
    """
    phi = _heat_band_values(decomp, quad)  # (n_t, n_modes)
    a_max = np.empty(len(quad.nodes))
    for k, (t, w, mask, vols) in enumerate(_cone_profiles(space, quad)):
        a_max[k] = np.max((space.weights / vols) @ mask)
    per_mode = quad.weights @ (phi ** 2 * a_max[:, None])
    return float(np.sqrt(per_mode.max()))


def h1_norm(space: Space, decomp: SpectralDecomposition, f, quad: ConeQuadrature) -> float:
    """||S_h f||_{L^1(mu)}."""
    return float(square_function(space, decomp, f, quad) @ space.weights)


def _power_matrices(space, decomp, M):
    """Matrix of L^k acting on plain function vectors, k = 0..M."""
    n = space.n
    mats = [np.eye(n)]
    l_mat = kernel_of_function(decomp, lambda lam: lam) * space.weights[None, :]
    for _ in range(M):
        mats.append(l_mat @ mats[-1])
    return mats


def make_atom(space: Space, decomp: SpectralDecomposition, ball_spec, M: int,
              seed: int) -> Atom:
    """Construct a random unit atom of order M supported in the given ball.

    The witness b is drawn from the SVD nullspace of the stacked
    outside-rows of L^k (k = 1..M) restricted to ball columns, then scaled
    so the worst L^2 budget is met with equality.
    """
    y0, r = int(ball_spec[0]), float(ball_spec[1])
    inside = np.flatnonzero(space.dist[y0] < r)
    outside = np.flatnonzero(space.dist[y0] >= r)
    if inside.size == 0:
        raise AtomInfeasible("empty ball")
    mats = _power_matrices(space, decomp, M)
    if outside.size:
        constraint = np.vstack([mats[k][np.ix_(outside, inside)] for k in range(1, M + 1)])
        u, sig, vt = np.linalg.svd(constraint, full_matrices=True)
        smax = sig[0] if sig.size else 0.0
        rank = int(np.sum(sig > 1e-10 * smax)) if smax > 0 else 0
        null = vt[rank:].T  # (|inside|, dim)
    else:
        null = np.eye(inside.size)
    if null.shape[1] == 0:
        raise AtomInfeasible(
            f"no witness supported in ball({y0}, {r}) stays inside under L^1..{M}")
    rng = np.random.default_rng(seed)
    v = null @ rng.standard_normal(null.shape[1])
    b = np.zeros(space.n)
    b[inside] = v
    mu_ball = float(space.weights[inside].sum())
    norms = [_l2(space, r ** (2 * k) * (mats[k] @ b)) for k in range(M + 1)]
    scale = max(norms) * np.sqrt(mu_ball) / r ** (2 * M)
    if scale == 0:
        raise AtomInfeasible("degenerate witness")
    b = b / scale
    a = mats[M] @ b
    return Atom(a=a, b=b, ball=(y0, r), M=M)


def validate_atom(space: Space, decomp: SpectralDecomposition, atom: Atom) -> ValidationReport:
    """Check a = L^M b, supp L^k b in B, and the (r^2 L)^k b budgets."""
    y0, r = atom.ball
    M = atom.M
    mats = _power_matrices(space, decomp, M)
    margins = []

    resid = np.linalg.norm(atom.a - mats[M] @ atom.b)
    denom = max(np.linalg.norm(atom.a), 1e-300)
    margins.append(("a_eq_LMb", 1e-9 - resid / denom, None))

    outside = space.dist[y0] >= r
    worst_support = 0.0
    wit = None
    for k in range(M + 1):
        v = mats[k] @ atom.b
        peak = np.max(np.abs(v))
        if peak == 0:
            continue
        leak = np.max(np.abs(v[outside])) / peak if np.any(outside) else 0.0
        if leak > worst_support:
            worst_support, wit = leak, k
    margins.append(("support", SUPPORT_THRESHOLD - worst_support, wit))

    mu_ball = float(space.weights[space.dist[y0] < r].sum())
    worst_ratio, wit = 0.0, None
    for k in range(M + 1):
        ratio = _l2(space, (mats[k] @ atom.b)) * r ** (2 * k) * np.sqrt(mu_ball) / r ** (2 * M)
        if ratio > worst_ratio:
            worst_ratio, wit = ratio, k
    margins.append(("l2_budget", (1.0 + 1e-9) - worst_ratio, wit))

    passed = all(m[1] >= -1e-9 for m in margins)
    return ValidationReport(passed=passed, margins=margins)


def annuli(space: Space, y0: int, r: float):
    """U_0 = B(y0, r), U_j = B(y0, 2^j r) \\ B(y0, 2^{j-1} r), until empty."""
    d = space.dist[y0]
    sets = [d < r]
    j = 1
    while 2.0 ** (j - 1) * r <= d.max():
        sets.append((d < 2.0 ** j * r) & (d >= 2.0 ** (j - 1) * r))
        j += 1
    return sets


def validate_molecule(space: Space, decomp: SpectralDecomposition,
                      mol: Molecule) -> ValidationReport:
    """Check the molecule identity and annular L^2 budgets; fit best epsilon."""
    y0, r = mol.ball
    M = mol.M
    mats = _power_matrices(space, decomp, M)
    margins = []

    resid = np.linalg.norm(mol.a_tilde - mats[M] @ mol.b_tilde)
    denom = max(np.linalg.norm(mol.a_tilde), 1e-300)
    margins.append(("a_eq_LMb", 1e-9 - resid / denom, None))

    sets = annuli(space, y0, r)
    powers = [r ** (2 * k) * (mats[k] @ mol.b_tilde) for k in range(M + 1)]
    vol_j = [max(float(space.weights[space.dist[y0] < 2.0 ** j * r].sum()), 1e-300)
             for j in range(len(sets))]

    # j = 0: plain atom-style budget
    worst0, wit0 = 0.0, None
    for k in range(M + 1):
        v = np.sqrt(np.sum(np.abs(powers[k][sets[0]]) ** 2 * space.weights[sets[0]]))
        ratio = v * np.sqrt(vol_j[0]) / r ** (2 * M)
        if ratio > worst0:
            worst0, wit0 = ratio, k
    margins.append(("annulus_j0", (1.0 + 1e-9) - worst0, wit0))

    best_eps = np.inf
    wit = None
    floor = 1e-13 * max(np.max(np.abs(p)) for p in powers)
    for j in range(1, len(sets)):
        sel = sets[j]
        if not np.any(sel):
            continue
        for k in range(M + 1):
            v = np.sqrt(np.sum(np.abs(powers[k][sel]) ** 2 * space.weights[sel]))
            if v <= floor:
                continue
            eps_jk = np.log2(r ** (2 * M) / (v * np.sqrt(vol_j[j]))) / j
            if eps_jk < best_eps:
                best_eps, wit = eps_jk, (j, k)
    margins.append(("annulus_decay", best_eps - mol.epsilon, wit))

    passed = all(m[1] >= -1e-9 for m in margins)
    return ValidationReport(passed=passed, margins=margins,
                            best_epsilon=float(best_eps))
