"""Cosine wave propagators, empirical propagation speed, and the weighted
off-ball inequality with its Fourier-synthesis route.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import HardyLabError, QuadratureTooCoarse
from .multiplier import SobolevGrid, sobolev_norm
from .space import Space
from .spectral import SpectralDecomposition, apply_function


@dataclass(frozen=True)
class EvenSpectralFunction:
    """Even function F on R with a tabulated Fourier transform.

    fourier arrays come from a high-resolution FFT of F's samples on
    (-half_width, half_width); quadrature is trapezoid (uniform) on xi.
    """

    eval: Callable
    xi: np.ndarray
    f_hat: np.ndarray
    xi_weight: float
    half_width: float
    sobolev_gamma_beta: float

    @classmethod
    def from_callable(cls, F, half_width=64.0, samples=1 << 14,
                      sobolev_gamma_beta=1.0):
        dx = 2.0 * half_width / samples
        x = -half_width + dx * np.arange(samples)
        vals = np.array([F(v) for v in x], dtype=float)
        # evenness on the sample grid (x and -x both on grid except endpoint)
        mirrored = vals[np.concatenate(([0], np.arange(samples - 1, 0, -1)))]
        if np.max(np.abs(vals - mirrored)) > 1e-10 * max(np.max(np.abs(vals)), 1e-300):
            raise ValueError("F is not even on the sample grid")
        xi = 2.0 * np.pi * np.fft.fftfreq(samples, d=dx)
        f_hat = dx * np.exp(1j * xi * half_width) * np.fft.fft(vals)
        if np.max(np.abs(f_hat.imag)) > 1e-8 * max(np.max(np.abs(f_hat.real)), 1e-300):
            raise ValueError("Fourier transform of a real even F should be real")
        order = np.argsort(xi)
        return cls(eval=F, xi=xi[order], f_hat=f_hat.real[order],
                   xi_weight=float(xi[order][1] - xi[order][0]),
                   half_width=float(half_width),
                   sobolev_gamma_beta=float(sobolev_gamma_beta))

    def sobolev_norm(self, grid: SobolevGrid = None) -> float:
        if grid is None:
            grid = SobolevGrid(half_width=self.half_width,
                               samples=max(4096, len(self.xi)),
                               alpha=self.sobolev_gamma_beta, p=2)
        return sobolev_norm(self.eval, grid)

    def plancherel_sobolev_norm(self) -> float:
        """Frequency-side Sobolev norm (1/2pi) sum (1+xi^2)^s |F_hat|^2 dxi."""
        s = self.sobolev_gamma_beta
        val = np.sum((1.0 + self.xi ** 2) ** s * np.abs(self.f_hat) ** 2) \
            * self.xi_weight / (2.0 * np.pi)
        return float(np.sqrt(val))


@dataclass(frozen=True)
class SpeedReport:
    sigma: float
    eps: float
    table: list = field(default_factory=list)  # rows (s, radius, mass_outside)


def cosine_propagator(decomp: SpectralDecomposition, s: float, g):
    """cos(s sqrt(L)) g through the spectral calculus."""
    if s < 0:
        raise ValueError("s must be >= 0")
    return apply_function(decomp, lambda lam: np.cos(s * np.sqrt(lam)), g)


def propagation_speed(space: Space, decomp: SpectralDecomposition, g, y0: int,
                      r: float, s_grid, eps: float) -> SpeedReport:
    """Empirical speed: smallest eps-mass radius of cos(s sqrt(L)) g per s."""
    if not (0 < eps < 0.5):
        raise ValueError("eps must be in (0, 0.5)")
    g = np.asarray(g, dtype=float)
    d = space.dist[y0]
    if np.max(np.abs(g[d >= r])) > 1e-12 * max(np.max(np.abs(g)), 1e-300):
        raise ValueError("g not supported in the declared ball")
    total = np.sqrt(np.sum(g ** 2 * space.weights))
    gate = (eps * total) ** 2
    thresholds = np.unique(d)
    rows = []
    sigma = 0.0
    for s in s_grid:
        u = cosine_propagator(decomp, float(s), g)
        mass = np.abs(u) ** 2 * space.weights
        # tail(D) = mass at distance >= D; smallest D with tail <= gate
        rho = None
        for D in thresholds:
            tail = float(mass[d >= D].sum())
            if tail <= gate:
                rho = max(0.0, float(D) - r)
                break
        if rho is None:
            rho = max(0.0, float(thresholds[-1]) - r)
        outside = float(mass[d >= r + rho].sum())
        rows.append((float(s), rho, outside))
        if s > 0:
            sigma = max(sigma, rho / float(s))
    return SpeedReport(sigma=sigma, eps=eps, table=rows)


def even_transform_apply(decomp: SpectralDecomposition, F: EvenSpectralFunction,
                         j: int, g, rtol=1e-6):
    """F(2^-j sqrt(L)) g by cosine synthesis over the tabulated transform.

    The spectral-calculus evaluation of the same operator is the defining
    oracle; a mismatch beyond rtol raises QuadratureTooCoarse.
    """
    scale = 2.0 ** (-j)
    sq = np.sqrt(decomp.eigenvalues)
    max_phase_step = F.xi_weight * scale * sq[-1]
    if max_phase_step > np.pi / 4.0:
        raise QuadratureTooCoarse(
            f"xi spacing {F.xi_weight:.3e} too coarse for 2^-j sqrt(lam_max)="
            f"{scale * sq[-1]:.3e}")
    # per-eigenvalue quadrature of (1/2pi) int F_hat(xi) cos(scale xi sqrt(lam)) dxi
    phases = np.cos(np.outer(scale * sq, F.xi))  # (n_modes, n_xi)
    vals = (phases @ F.f_hat) * F.xi_weight / (2.0 * np.pi)
    coeffs = decomp.coefficients(g)
    out = decomp.eigenvectors @ (vals * coeffs)
    oracle = apply_function(decomp, lambda lam: F.eval(scale * np.sqrt(lam)), g)
    denom = max(float(np.linalg.norm(oracle)), 1e-300)
    err = float(np.linalg.norm(out - oracle)) / denom
    if err > rtol:
        raise QuadratureTooCoarse(f"synthesis mismatch {err:.3e} > {rtol}")
    return out


def verify_lemma_dd1(space: Space, decomp: SpectralDecomposition,
                     F: EvenSpectralFunction, g_ensemble, j_range, beta, gamma,
                     uniformity_factor=8.0, assert_uniform=True):
    """Weighted off-ball energy of F(2^-j sqrt(L)) g against its budget.

    g_ensemble rows are (g, y0, r).  Returns the per-(g, j) ratio table and
    the per-j max ratios; optionally asserts j-uniformity within the factor.
    """
    if gamma <= 0.5 or beta <= 0:
        raise ValueError("need gamma > 1/2 and beta > 0")
    fnorm = F.sobolev_norm()
    rows = []
    per_j = {}
    for g_id, (g, y0, r) in enumerate(g_ensemble):
        g = np.asarray(g, dtype=float)
        gnorm2 = float(np.sum(g ** 2 * space.weights))
        d = space.dist[y0]
        far = d > 2.0 * r
        for j in j_range:
            u = apply_function(decomp, lambda lam: F.eval(2.0 ** (-j) * np.sqrt(lam)), g)
            lhs = float(np.sum(np.abs(u[far]) ** 2 * (d[far] / r) ** beta
                               * space.weights[far]))
            budget = (r * 2.0 ** j) ** (-beta) * fnorm ** 2 * gnorm2
            ratio = lhs / budget
            rows.append({"g_id": g_id, "r": r, "j": j, "lhs": lhs,
                         "budget": budget, "ratio": ratio})
            per_j[j] = max(per_j.get(j, 0.0), ratio)
    positive = [v for v in per_j.values() if v > 0]
    factor = max(positive) / min(positive) if positive else 1.0
    if assert_uniform and factor > uniformity_factor:
        raise HardyLabError(
            f"ratio varies by factor {factor:.2f} > {uniformity_factor} across j")
    return {"rows": rows, "max_ratio": max(positive) if positive else 0.0,
            "per_j": per_j, "uniformity_factor": factor}
