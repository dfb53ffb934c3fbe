"""Self-adjoint operators on L^2(mu), spectral calculus, heat kernels,
and fitted Gaussian / Davies-Gaffney constants.

An Operator acts through its kernel matrix, (Lf)(x) = sum_y K[x,y] f(y) mu(y).
Diagonalization goes through conjugation by diag(sqrt(mu)), which makes
mu-orthonormality exact up to LAPACK round-off.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (KernelNotTrivial, MultiplierDomainError, NegativeSpectrum,
                     NotSelfAdjoint, UnboundedFit)
from .space import Space

SPD_TOL = 1e-10


@dataclass(frozen=True)
class Operator:
    """Kernel operator on a finite metric-measure space.

    kernel_handling: what spectral_decomposition does with a (near-)zero
    bottom eigenvalue: None (raise), "deflate" (drop the kernel modes) or
    "shift" (work with L + shift*I).
    """

    space: Space
    matrix: np.ndarray
    locality_radius: Optional[float] = None
    kernel_handling: Optional[str] = None
    shift: float = 0.0

    def apply(self, f):
        """(Lf)(x) = sum_y K[x,y] f(y) mu(y)."""
        return self.matrix @ (self.space.weights * np.asarray(f))

    def apply_power(self, f, k):
        out = np.asarray(f)
        for _ in range(k):
            out = self.apply(out)
        return out


def make_operator(space, matrix, locality_radius=None, kernel_handling=None,
                  shift=0.0) -> Operator:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (space.n, space.n):
        raise NotSelfAdjoint(f"kernel matrix shape {matrix.shape} != ({space.n},{space.n})")
    scale = max(np.abs(matrix).max(), 1e-300)
    if not np.allclose(matrix, matrix.T, rtol=0, atol=1e-12 * scale):
        raise NotSelfAdjoint("kernel matrix not symmetric")
    matrix = matrix.copy()
    matrix.flags.writeable = False
    return Operator(space=space, matrix=matrix, locality_radius=locality_radius,
                    kernel_handling=kernel_handling, shift=shift)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending eigenvalues and mu-orthonormal eigenvectors (columns)."""

    space: Space
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # (n, n_modes), columns mu-orthonormal
    deflated_modes: int = 0
    deflated_vectors: Optional[np.ndarray] = None  # dropped kernel modes

    @property
    def n_modes(self):
        return len(self.eigenvalues)

    def coefficients(self, f):
        """<u_i, f>_mu for all retained modes."""
        return self.eigenvectors.T @ (self.space.weights * np.asarray(f))

    def synthesize(self, coeffs):
        return self.eigenvectors @ np.asarray(coeffs)


@dataclass(frozen=True)
class FittedBound:
    """(C, c) pair for an exp(-dist^2/(c t)) style inequality, with witness."""

    C: float
    c: float
    worst_witness: tuple
    margin: float


def spectral_decomposition(op: Operator) -> SpectralDecomposition:
    """Full eigensystem of L in the mu-weighted inner product.

    Conjugates K*diag(mu) by diag(sqrt(mu)) to a symmetric matrix and maps
    eigenvectors back; zero modes are dropped or shifted away according to
    op.kernel_handling.
    """
    space = op.space
    sq = np.sqrt(space.weights)
    sym = (op.matrix * sq[None, :]) * sq[:, None]
    sym = (sym + sym.T) / 2.0
    lam, w = np.linalg.eigh(sym)
    rho = max(np.abs(lam).max(), 1e-300)
    tol = SPD_TOL * rho
    if lam[0] < -tol:
        raise NegativeSpectrum(f"eigenvalue {lam[0]} below -{tol}")
    vecs = w / sq[:, None]
    deflated = 0
    dropped = None
    if np.any(lam <= tol):
        if op.kernel_handling == "deflate":
            keep = lam > tol
            deflated = int(np.sum(~keep))
            dropped = vecs[:, ~keep]
            lam, vecs = lam[keep], vecs[:, keep]
        elif op.kernel_handling == "shift":
            shift = op.shift if op.shift > 0 else 10 * tol
            lam = lam + shift
        else:
            raise KernelNotTrivial(
                f"smallest eigenvalue {lam[0]} <= tol {tol}; "
                "use kernel_handling='deflate' or 'shift'")
    return SpectralDecomposition(space=space, eigenvalues=lam, eigenvectors=vecs,
                                 deflated_modes=deflated, deflated_vectors=dropped)


def _evaluate_multiplier(m: Callable, eigenvalues):
    vals = np.asarray([m(float(lam)) for lam in eigenvalues])
    if np.any(~np.isfinite(vals)):
        bad = eigenvalues[~np.isfinite(vals)][0]
        raise MultiplierDomainError(f"multiplier undefined/inf at eigenvalue {bad}")
    return vals


def apply_function(decomp: SpectralDecomposition, m, f):
    """m(L) f = sum_i m(lambda_i) u_i <u_i, f>_mu."""
    vals = _evaluate_multiplier(m, decomp.eigenvalues)
    coeffs = decomp.coefficients(f)
    return decomp.eigenvectors @ (vals * coeffs)


def kernel_of_function(decomp: SpectralDecomposition, m):
    """Kernel K[x,y] = sum_i m(lambda_i) u_i(x) u_i(y) of m(L)."""
    vals = _evaluate_multiplier(m, decomp.eigenvalues)
    return (decomp.eigenvectors * vals[None, :]) @ decomp.eigenvectors.T


def kernel_apply(space: Space, kernel, f):
    """Integrate a kernel against f with mu-weights."""
    return kernel @ (space.weights * np.asarray(f))


def heat_kernel(decomp: SpectralDecomposition, t: float):
    """Kernel of T_t = e^{-tL}, including any deflated zero modes.

    Deflation is a convention for multipliers that are singular at 0; the
    semigroup itself has e^{-t*0} = 1 there, so the dropped projection is
    added back.  Without it the kernel carries a spurious constant offset
    that wrecks every off-diagonal decay estimate.
    """
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    ker = kernel_of_function(decomp, lambda lam: np.exp(-t * lam))
    if decomp.deflated_vectors is not None:
        ker = ker + decomp.deflated_vectors @ decomp.deflated_vectors.T
    return ker


def heat_derivative_kernel(decomp: SpectralDecomposition, t: float, k: int):
    """Kernel of d^k/dt^k T_t = (-L)^k e^{-tL}, computed spectrally.

    Deflated zero modes contribute nothing for k >= 1 and the identity
    projection for k = 0 (see heat_kernel).
    """
    if k == 0:
        return heat_kernel(decomp, t)
    return kernel_of_function(decomp, lambda lam: (-lam) ** k * np.exp(-t * lam))


def _default_c_grid(center: float):
    # 24 log-spaced values per decade across 4 decades centered on `center`.
    return center * np.logspace(-2, 2, 97)


def _fit_exp_bound(lhs_over_prefactor, dist2_over_t, c_grid, witnesses, cap=1e8):
    """Min over c of C(c) = max(lhs * exp(d^2/(c t))), preferring small c.

    lhs_over_prefactor and dist2_over_t are flat arrays over probe configs.
    Returns (C, c, witness_index, margin).
    """
    with np.errstate(divide="ignore"):
        log_lhs = np.where(lhs_over_prefactor > 0, np.log(lhs_over_prefactor), -np.inf)
    fits = []
    with np.errstate(over="ignore"):
        for c in c_grid:
            expo = log_lhs + dist2_over_t / c
            i = int(np.argmax(expo))
            fits.append((float(np.exp(expo[i])), float(c), i))
    C_min = min(f[0] for f in fits)
    # smallest c whose C is within round-off of the Pareto-minimal C
    C, c, i = next(f for f in fits if f[0] <= C_min * (1 + 1e-6))
    if not np.isfinite(C) or C > cap:
        raise UnboundedFit(f"fitted C={C} exceeds cap {cap}")
    # margin: slack of the final bound at the second-worst configuration
    expo = log_lhs + dist2_over_t / c
    margin = float(np.log(C) - np.partition(expo, -2)[-2]) if len(expo) > 1 else 0.0
    return C, c, witnesses(i), margin


def check_gaussian_bounds(space: Space, decomp: SpectralDecomposition, t_grid,
                          k: int = 0, c_grid=None, cap=1e8,
                          noise_floor=1e-13) -> FittedBound:
    """Fit (C, c) in |d_t^k T_t(x,y)| <= C t^-k V(x,sqrt t)^-1 exp(-d^2/(c t)).

    Kernel entries below noise_floor times the per-t peak are treated as
    exact zeros; otherwise eigensolver round-off in the far tail forces the
    fitted c toward +inf.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or np.any(t_grid <= 0):
        raise ValueError("t_grid must be nonempty and positive")
    if c_grid is None:
        c_grid = _default_c_grid(4.0)
    n = space.n
    lhs_parts, d2t_parts, wit = [], [], []
    for t in t_grid:
        ker = np.abs(heat_derivative_kernel(decomp, t, k))
        ker = np.where(ker > noise_floor * ker.max(), ker, 0.0)
        vols = np.array([np.sum(space.weights[space.dist[x] < np.sqrt(t)]) for x in range(n)])
        pref = (t ** -k) / vols[:, None]  # envelope without the exponential
        lhs_parts.append((ker / pref).ravel())
        d2t_parts.append((space.dist ** 2 / t).ravel())
        wit.append(t)
    lhs = np.concatenate(lhs_parts)
    d2t = np.concatenate(d2t_parts)

    def witness(i):
        ti = i // (n * n)
        x, y = divmod(i % (n * n), n)
        return (int(x), int(y), float(wit[ti]))

    C, c, w, margin = _fit_exp_bound(lhs, d2t, c_grid, witness, cap=cap)
    return FittedBound(C=C, c=c, worst_witness=w, margin=margin)


def _set_distance(space, u1, u2):
    return float(space.dist[np.ix_(u1, u2)].min())


def check_davies_gaffney(space: Space, decomp: SpectralDecomposition, ball_pairs,
                         t_grid, c_grid=None, cap=1e8) -> FittedBound:
    """Fit (C, c) in |<T_t f1, f2>| <= C exp(-dist(U1,U2)^2/(c t)) ||f1|| ||f2||.

    The sup over functions supported in U1/U2 is the exact operator norm of
    the restricted heat-kernel block in L^2(mu).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if c_grid is None:
        c_grid = _default_c_grid(4.0)
    lhs, d2t, wit = [], [], []
    sq = np.sqrt(space.weights)
    for u1, u2 in ball_pairs:
        u1 = np.asarray(u1, dtype=int)
        u2 = np.asarray(u2, dtype=int)
        if np.intersect1d(u1, u2).size:
            raise ValueError("ball pair sets must be disjoint")
        d = _set_distance(space, u1, u2)
        for t in t_grid:
            ker = heat_kernel(decomp, t)
            block = (sq[u2, None] * ker[np.ix_(u2, u1)]) * sq[None, u1]
            norm = float(np.linalg.norm(block, 2))
            lhs.append(norm)
            d2t.append(d ** 2 / t)
            wit.append((tuple(u1), tuple(u2), float(t)))

    C, c, w, margin = _fit_exp_bound(np.array(lhs), np.array(d2t), c_grid,
                                     lambda i: wit[i], cap=cap)
    return FittedBound(C=C, c=c, worst_witness=w, margin=margin)


def weighted_kernel_sups(space: Space, kernel, beta: float, scale: float = 1.0):
    """(row sup, column sup) of int |k(x,y)| (1 + d(x,y)/scale)^beta dmu."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if scale <= 0:
        raise ValueError("scale must be positive")
    w = np.power(1.0 + space.dist / scale, beta) * np.abs(kernel)
    row = float(np.max(w @ space.weights))
    col = float(np.max(space.weights @ w))
    return row, col


def weighted_kernel_norm(space: Space, kernel, beta: float, scale: float = 1.0):
    """The omega(beta) kernel norm: row sup + column sup."""
    row, col = weighted_kernel_sups(space, kernel, beta, scale)
    return row + col
