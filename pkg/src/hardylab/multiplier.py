"""Sobolev norms, dilation-uniform multiplier constants, dyadic partitions,
and the end-to-end atom -> H^1 / atom -> molecule experiments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import AtomInfeasible, SobolevGate, SupportOverflow
from .hardy import (ConeQuadrature, Molecule, default_quadrature, h1_norm,
                    make_atom, square_function, validate_atom, validate_molecule)
from .space import Space, volume
from .spectral import (SpectralDecomposition, apply_function, kernel_of_function,
                       weighted_kernel_sups)


@dataclass(frozen=True)
class Multiplier:
    """Spectral function on (0, infinity), possibly complex-valued."""

    eval: Callable
    name: str = "custom"
    params: dict = field(default_factory=dict)
    claimed_alpha: Optional[float] = None

    def __call__(self, lam):
        return self.eval(lam)

    def check_bounded(self, lam_min, lam_max, n_samples=4096):
        grid = np.geomspace(lam_min, lam_max, n_samples)
        vals = np.array([self.eval(x) for x in grid])
        if not np.all(np.isfinite(np.abs(vals))):
            raise ValueError(f"multiplier {self.name} unbounded on spectrum interval")
        return float(np.max(np.abs(vals)))


def multiplier_from_spec(spec) -> Multiplier:
    """JSON multiplier spec -> Multiplier."""
    name = spec["name"]
    params = spec.get("params", {})
    if name == "identity":
        return Multiplier(eval=lambda lam: 1.0, name=name)
    if name == "imaginary_power":
        tau = float(params.get("tau", 1.0))
        return Multiplier(eval=lambda lam: complex(lam) ** (1j * tau),
                          name=name, params={"tau": tau})
    if name == "laplace_type":
        a = float(params.get("a", 1.0))
        return Multiplier(eval=lambda lam: lam / (lam + a), name=name, params={"a": a})
    if name == "oscillatory":
        return Multiplier(eval=lambda lam: np.exp(1j * lam), name=name)
    if name == "table":
        pts = np.array(params["samples"], dtype=float)  # rows (lam, re, im)
        lam_grid = pts[:, 0]
        vals = pts[:, 1] + 1j * pts[:, 2]

        def interp(lam):
            return complex(np.interp(lam, lam_grid, vals.real),
                           np.interp(lam, lam_grid, vals.imag))

        return Multiplier(eval=interp, name=name)
    raise ValueError(f"unknown multiplier spec name {name!r}")


@dataclass(frozen=True)
class SobolevGrid:
    """Sampling window (-R, R) with N points for Bessel-potential norms."""

    half_width: float = 16.0
    samples: int = 4096
    alpha: float = 1.0
    p: float = 2

    def __post_init__(self):
        if self.samples < 4096 or (self.samples & (self.samples - 1)):
            raise ValueError("samples must be a power of two >= 4096")

    @property
    def dx(self):
        return 2.0 * self.half_width / self.samples

    @property
    def x(self):
        return -self.half_width + self.dx * np.arange(self.samples)

    @property
    def xi(self):
        return 2.0 * np.pi * np.fft.fftfreq(self.samples, d=self.dx)


def _sample(F, grid: SobolevGrid):
    if callable(F):
        return np.asarray([F(x) for x in grid.x])
    F = np.asarray(F)
    if F.shape != (grid.samples,):
        raise ValueError(f"sample array length {F.shape} != grid {grid.samples}")
    return F


def sobolev_norm(F, grid: SobolevGrid, alpha=None, p=None) -> float:
    """|| (I - d^2/dx^2)^{alpha/2} F ||_{L^p} by FFT on the sampling window."""
    alpha = grid.alpha if alpha is None else alpha
    p = grid.p if p is None else p
    samples = _sample(F, grid)
    peak = np.max(np.abs(samples))
    edge = max(np.abs(samples[0]), np.abs(samples[-1]))
    if peak > 0 and edge > 1e-10 * peak:
        raise SupportOverflow("function not negligible at the window edge")
    bessel = np.power(1.0 + grid.xi ** 2, alpha / 2.0)
    g = np.fft.ifft(np.fft.fft(samples) * bessel)
    if p == 2:
        return float(np.sqrt(np.sum(np.abs(g) ** 2) * grid.dx))
    if np.isinf(p):
        return float(np.max(np.abs(g)))
    raise ValueError("p must be 2 or inf")


def _dilated_samples(m, eta, t, grid: SobolevGrid):
    """Samples of x -> eta(x) m(t x), zero off (0, infinity)."""
    x = grid.x
    out = np.zeros(grid.samples, dtype=complex)
    sel = (x > 0.25) & (x < 4.0)  # eta support padded; zero elsewhere
    out[sel] = np.array([eta(v) * m(t * v) for v in x[sel]])
    return out


def default_t_grid(decomp: SpectralDecomposition, per_octave=16):
    """Log-uniform dilations covering [c/lam_max, C/lam_min]."""
    lo = 0.25 / decomp.eigenvalues[-1]
    hi = 4.0 / decomp.eigenvalues[0]
    n = max(int(np.ceil(np.log2(hi / lo) * per_octave)), 2)
    return np.geomspace(lo, hi, n)


def hormander_constant(m, eta, alpha, p, t_grid, grid: Optional[SobolevGrid] = None,
                       return_argmax=False):
    """sup over dilations t of || eta(.) m(t .) ||_{W^{p, alpha}}."""
    if grid is None:
        grid = SobolevGrid(half_width=16.0, samples=4096, alpha=alpha, p=p)
    best, t_star = -np.inf, None
    for t in t_grid:
        val = sobolev_norm(_dilated_samples(m, eta, t, grid), grid, alpha=alpha, p=p)
        if val > best:
            best, t_star = val, float(t)
    if return_argmax:
        return best, t_star
    return best


@dataclass(frozen=True)
class Partition:
    """Smooth dyadic partition of unity: sum_j psi(2^-j lam) = 1 on (0, inf)."""

    psi: Callable
    support: tuple = (0.5, 2.0)
    sharpness: float = 1.0

    def __call__(self, lam):
        return self.psi(lam)


def make_partition(sharpness=1.0) -> Partition:
    """psi(lam) = h(log2 lam) / sum_k h(log2 lam - k), h a C_c^inf bump."""
    if sharpness <= 0:
        raise ValueError("sharpness must be positive")

    def h(u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        inside = np.abs(u) < 1.0
        out[inside] = np.exp(-sharpness / (1.0 - u[inside] ** 2))
        return out

    def psi(lam):
        lam = np.asarray(lam, dtype=float)
        scalar = lam.ndim == 0
        lam = np.atleast_1d(lam)
        out = np.zeros_like(lam)
        pos = lam > 0
        u = np.log2(lam[pos])
        frac = u - np.floor(u)
        denom = h(frac) + h(frac - 1.0)
        out[pos] = h(u) / denom
        return float(out[0]) if scalar else out

    return Partition(psi=psi, sharpness=float(sharpness))


def phi_kernel(decomp: SpectralDecomposition, m, t: float, N: int):
    """Kernel of (t^2 L)^N e^{-t^2 L} m(L)."""
    if t <= 0:
        raise ValueError("t must be positive")
    if N not in (1, 2):
        raise ValueError("N must be 1 or 2")
    return kernel_of_function(
        decomp, lambda lam: (t * t * lam) ** N * np.exp(-t * t * lam) * m(lam))


def verify_prop1(space: Space, decomp: SpectralDecomposition, m, beta, t_grid, N):
    """Empirical sup over t of the t-scaled weighted kernel norm of Phi_t."""
    worst = 0.0
    for t in t_grid:
        ker = phi_kernel(decomp, m, t, N)
        row, col = weighted_kernel_sups(space, ker, beta, scale=t)
        worst = max(worst, row, col)
    return worst


def theta_kernel(space: Space, decomp: SpectralDecomposition, m, j, N, t_substeps=8):
    """Theta_j[x][y]: discrete sup over t in [2^j, 2^{j+1}) and d(x,x') < t."""
    if t_substeps < 4:
        raise ValueError("t_substeps must be >= 4")
    theta = np.zeros((space.n, space.n))
    for k in range(t_substeps):
        t = 2.0 ** (j + k / t_substeps)
        mag = np.abs(phi_kernel(decomp, m, t, N))
        mask = space.dist < t  # (x, x')
        # sup over x' in the strict ball around x of |Phi_t(x', y)|
        sup_t = np.max(np.where(mask[:, :, None], mag[None, :, :], 0.0), axis=1)
        theta = np.maximum(theta, sup_t)
    return theta


def verify_lemma3(space: Space, decomp: SpectralDecomposition, m, beta, j_range,
                  t_substeps=8):
    """Empirical sup over j and y of the weighted column mass of Theta_j."""
    worst = 0.0
    for j in j_range:
        th = theta_kernel(space, decomp, m, j, N=1, t_substeps=t_substeps)
        w = np.power(1.0 + space.dist / 2.0 ** j, beta)
        cols = space.weights @ (th * w)
        worst = max(worst, float(cols.max()))
    return worst


def dyadic_piece_norms(m, partition: Partition, N, j_range, alpha,
                       grid: Optional[SobolevGrid] = None):
    """|| psi(.) (2^j .)^N e^{-2^j .} m(2^j .) ||_{W^{inf, alpha}} per j."""
    if grid is None:
        grid = SobolevGrid(half_width=16.0, samples=4096, alpha=alpha, p=np.inf)
    out = {}
    for j in j_range:
        s = 2.0 ** j

        def f(lam, s=s):
            return partition(lam) * (s * lam) ** N * np.exp(-s * lam) * m(s * lam)

        x = grid.x
        samples = np.zeros(grid.samples, dtype=complex)
        sel = (x > 0.25) & (x < 4.0)
        samples[sel] = np.array([f(v) for v in x[sel]])
        out[j] = sobolev_norm(samples, grid, alpha=alpha, p=np.inf)
    return out


def _ensure_atoms(space, decomp, atom_params, M):
    atoms, skipped = [], []
    for center, radius, seed in atom_params:
        try:
            atoms.append(make_atom(space, decomp, (center, radius), M, seed))
        except AtomInfeasible as exc:
            skipped.append(((center, radius, seed), str(exc)))
    return atoms, skipped


def theorem1_experiment(space: Space, decomp: SpectralDecomposition, m, alpha,
                        atom_params, quad: Optional[ConeQuadrature] = None,
                        eta: Optional[Partition] = None, t_grid=None):
    """Map (1,2,1)-atoms through m(L), report H^1 norms and near/far split."""
    if quad is None:
        quad = default_quadrature(decomp)
    if eta is None:
        eta = make_partition()
    if t_grid is None:
        t_grid = default_t_grid(decomp)
    horm = hormander_constant(m, eta, alpha, np.inf, t_grid)
    atoms, skipped = _ensure_atoms(space, decomp, atom_params, M=1)
    rows = []
    for idx, atom in enumerate(atoms):
        y0, r = atom.ball
        ma = apply_function(decomp, m, atom.a)
        s = square_function(space, decomp, ma, quad)
        near = space.dist[y0] < 2.0 * r
        nearfield = float(s[near] @ space.weights[near])
        farfield = float(s[~near] @ space.weights[~near])
        rows.append({
            "atom_id": idx, "r": r, "M": 1,
            "h1_in": h1_norm(space, decomp, atom.a, quad),
            "h1_out": nearfield + farfield,
            "nearfield": nearfield, "farfield": farfield,
            "best_epsilon": "", "hormander_const": horm, "status": "ok",
        })
    for (params, reason) in skipped:
        rows.append({"atom_id": None, "r": params[1], "M": 1, "h1_in": "",
                     "h1_out": "", "nearfield": "", "farfield": "",
                     "best_epsilon": "", "hormander_const": horm,
                     "status": f"infeasible: {reason}"})
    ensemble_max = max((row["h1_out"] for row in rows if row["status"] == "ok"),
                      default=0.0)
    return {"rows": rows, "ensemble_max": ensemble_max, "hormander_const": horm}


def _sqrt_multiplier(m):
    return lambda lam: m(np.sqrt(lam))


def theorem2_experiment(space: Space, decomp: SpectralDecomposition, m, M, alpha,
                        atom_params, partition: Optional[Partition] = None,
                        grid: Optional[SobolevGrid] = None, gate_slack=0.10):
    """(1,2,2M)-atoms -> molecules under m(sqrt(L)), with proof-split checks.

    Reproduces the dyadic split of (r^2 L)^k b~ into pieces driven by
    g1 = L^{k+M} b (high j) and g2 = L^k b (low j), checking the g-budgets,
    the F_j Sobolev bounds, and the telescoping reconstruction.
    """
    if partition is None:
        partition = make_partition()
    if grid is None:
        grid = SobolevGrid(half_width=16.0, samples=8192, alpha=alpha, p=2)
    msqrt = _sqrt_multiplier(m)
    atoms, skipped = _ensure_atoms(space, decomp, atom_params, M=2 * M)
    lam = decomp.eigenvalues
    sq = np.sqrt(lam)
    j_lo = int(np.floor(np.log2(sq[0]))) - 1
    j_hi = int(np.ceil(np.log2(sq[-1]))) + 1
    js = list(range(j_lo, j_hi + 1))

    rows = []
    for idx, atom in enumerate(atoms):
        y0, r = atom.ball
        j0 = -np.log2(r)
        mu_ball = volume(space, y0, r)
        # molecule candidate
        lmb = apply_function(decomp, lambda l: l ** M, atom.b)
        b_tilde = apply_function(decomp, msqrt, lmb)
        a_tilde = apply_function(decomp, msqrt, atom.a)
        mol = Molecule(a_tilde=a_tilde, b_tilde=b_tilde, ball=atom.ball, M=M,
                       epsilon=0.0)
        report = validate_molecule(space, decomp, mol)

        # g-budgets (high/low pieces of the dyadic split)
        g_margin = np.inf
        for k in range(M + 1):
            g1 = apply_function(decomp, lambda l, k=k: l ** (k + M), atom.b)
            g2 = apply_function(decomp, lambda l, k=k: l ** k, atom.b)
            n1 = np.sqrt(np.sum(np.abs(g1) ** 2 * space.weights))
            n2 = np.sqrt(np.sum(np.abs(g2) ** 2 * space.weights))
            g_margin = min(g_margin,
                           1.0 - n1 * np.sqrt(mu_ball) / r ** (2 * M - 2 * k),
                           1.0 - n2 * np.sqrt(mu_ball) / r ** (4 * M - 2 * k))

        # F_j Sobolev bounds
        high, low = {}, {}
        for j in js:
            s = 2.0 ** j
            if j >= j0:
                fj = lambda x, s=s: m(s * x) * partition(x)
                store = high
            else:
                fj = lambda x, s=s, j=j: (2.0 ** (2 * M * j) * m(s * x)
                                          * x ** (2 * M) * partition(x))
                store = low
            x = grid.x
            samples = np.zeros(grid.samples, dtype=complex)
            sel = (x > 0.25) & (x < 4.0)
            samples[sel] = np.array([fj(v) for v in x[sel]])
            store[j] = sobolev_norm(samples, grid, alpha=alpha, p=2)
        c_fit = max(high.values()) if high else 0.0
        for j, val in low.items():
            budget = c_fit * 2.0 ** (2 * M * j)
            if val > budget * (1.0 + gate_slack):
                raise SobolevGate(
                    f"F_j bound fails at j={j}: {val:.3e} > {budget:.3e} "
                    "(alpha too small for this multiplier)")

        # telescoping reconstruction of (r^2 L)^k b~ from the dyadic pieces
        recon_err = 0.0
        for k in range(M + 1):
            target = apply_function(decomp, lambda l, k=k: (r * r * l) ** k, b_tilde)
            acc = np.zeros(space.n, dtype=complex)
            for j in js:
                piece = apply_function(
                    decomp,
                    lambda l, j=j, k=k: ((r * r * l) ** k * partition(2.0 ** -j * np.sqrt(l))
                                         * msqrt(l)),
                    lmb)
                acc = acc + piece
            denom = max(np.linalg.norm(target), 1e-300)
            recon_err = max(recon_err, float(np.linalg.norm(acc - target) / denom))

        multiple = 0.0
        for cid, margin, wit in report.margins:
            if cid == "annulus_j0":
                multiple = (1.0 + 1e-9) - margin
        rows.append({
            "atom_id": idx, "r": r, "M": M,
            "best_epsilon": report.best_epsilon,
            "multiple_constant": multiple,
            "g_budget_margin": g_margin,
            "fj_constant": c_fit,
            "recon_err": recon_err,
            "status": "ok",
        })
    for (params, reason) in skipped:
        rows.append({"atom_id": None, "r": params[1], "M": M, "best_epsilon": "",
                     "multiple_constant": "", "g_budget_margin": "",
                     "fj_constant": "", "recon_err": "",
                     "status": f"infeasible: {reason}"})
    return {"rows": rows}
