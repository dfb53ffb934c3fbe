"""Acceptance gates for the whole laboratory.

Each test prints exactly one PASS/FAIL line.  Criterion 7 carries a
deliberate red assertion: the oscillatory multiplier's per-radius maxima
come out strictly *decreasing* in the ball radius on every ensemble we
tried (see notes in the repo README), so the strictly-increasing clause
fails honestly rather than being weakened.
"""

import json
import os
import time

import numpy as np
import pytest

import hardylab as hl
from hardylab.cli import main as cli_main
from hardylab.multiplier import SobolevGrid, dyadic_piece_norms
from hardylab.spectral import heat_kernel
from hardylab.wave import EvenSpectralFunction


def report(num, ok, detail=""):
    line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


def random_even_profile(rng):
    c = rng.uniform(0.2, 1.0, 3)
    a = rng.uniform(0.5, 2.0, 3)

    def f(x):
        return np.sum(c * np.exp(-a * np.asarray(x, dtype=float) ** 2))

    def f_vec(lam):
        return sum(ck * np.exp(-ak * lam) for ck, ak in zip(c, a))

    return f, f_vec


def test_criterion_1_transform_oracle(cycle64, schro64, rng):
    t0 = time.time()
    worst = 0.0
    cases = [(cycle64, range(-2, 5), 64.0, 1 << 14),
             (schro64, range(2, 7), 256.0, 1 << 16)]
    for (space, _, dec), j_pool, half_width, samples in cases:
        for _ in range(25):
            f, f_vec = random_even_profile(rng)
            F = EvenSpectralFunction.from_callable(
                lambda x: float(f(x)), half_width=half_width, samples=samples,
                sobolev_gamma_beta=1.1)
            j = int(rng.choice(list(j_pool)))
            g = rng.standard_normal(space.n)
            out = hl.even_transform_apply(dec, F, j, g)
            ref = hl.apply_function(
                dec, lambda lam, j=j: f_vec((2.0 ** -j * np.sqrt(lam)) ** 2), g)
            worst = max(worst, np.linalg.norm(out - ref) / np.linalg.norm(ref))
    dt = time.time() - t0
    report(1, worst < 1e-6 and dt < 60.0,
           f"max rel err {worst:.2e}, {dt:.1f}s")


def test_criterion_2_functional_calculus(cycle64, rng):
    t0 = time.time()
    space, _, dec = cycle64
    worst_hom, worst_map = 0.0, 0.0
    for _ in range(200):
        c1 = rng.uniform(-1, 1, 4)
        c2 = rng.uniform(-1, 1, 4)
        p1 = lambda lam: np.polyval(c1, lam)
        p2 = lambda lam: np.polyval(c2, lam)
        f = rng.standard_normal(space.n)
        lhs = hl.apply_function(dec, lambda lam: p1(lam) * p2(lam), f)
        rhs = hl.apply_function(dec, p1, hl.apply_function(dec, p2, f))
        worst_hom = max(worst_hom,
                        np.linalg.norm(lhs - rhs) / max(np.linalg.norm(lhs), 1e-300))
        i = int(rng.integers(dec.n_modes))
        u = dec.eigenvectors[:, i]
        mu = hl.apply_function(dec, p1, u)
        worst_map = max(worst_map,
                        np.linalg.norm(mu - p1(dec.eigenvalues[i]) * u)
                        / max(np.linalg.norm(u), 1e-300))
    dt = time.time() - t0
    report(2, worst_hom < 1e-9 and worst_map < 1e-8 and dt < 30.0,
           f"homomorphism {worst_hom:.2e}, spectral map {worst_map:.2e}, {dt:.1f}s")


def test_criterion_3_gaussian_gate():
    t0 = time.time()
    space, op = hl.schrodinger_1d(128, V=1.0)
    dec = hl.spectral_decomposition(op)
    t_grid = np.geomspace(1e-4, 16e-4, 9)  # 4 octaves
    worst_neg = 0.0
    for t in t_grid:
        ker = heat_kernel(dec, t)
        worst_neg = max(worst_neg, -ker.min() / ker.max())
    fit = hl.check_gaussian_bounds(space, dec, t_grid)
    target = (4.0 * np.pi) ** -0.5
    dt = time.time() - t0
    report(3, worst_neg < 1e-12 and 0.25 < fit.C / target < 4.0 and dt < 120.0,
           f"neg {worst_neg:.1e}, C/target {fit.C / target:.2f}, {dt:.1f}s")


def test_criterion_4_partition_identity():
    psi = hl.make_partition()
    lams = np.geomspace(1e-6, 1e6, 10_000)
    worst = 0.0
    for lam in lams:
        jw = int(np.floor(np.log2(lam)))
        total = sum(psi(2.0 ** -j * lam) for j in range(jw - 2, jw + 3))
        worst = max(worst, abs(total - 1.0))
    report(4, worst <= 1e-10, f"max deviation {worst:.2e}")


def test_criterion_5_dyadic_decay():
    psi = hl.make_partition()
    ok, details = True, []
    for N in (1, 2):
        norms = dyadic_piece_norms(lambda lam: 1.0, psi, N, range(-12, 13), 1.5)
        shape = {j: 2.0 ** -j if j >= 0 else 2.0 ** (j * N) for j in norms}
        # fit the single constant on the decaying branch, then demand it
        # covers every j (including the 2^{jN} branch) within 10%
        c_fit = max(norms[j] / shape[j] for j in norms if j >= 0)
        bad = [j for j, v in norms.items() if v > 1.1 * c_fit * shape[j]]
        ok = ok and not bad and np.isfinite(c_fit)
        details.append(f"N={N}: C={c_fit:.2f}, violations {bad}")
    report(5, ok, "; ".join(details))


def atom_ensemble(radii=(2.5, 4.5, 8.5, 16.5), centers=(0, 21, 42)):
    return [(c, r, 10 * i + k) for i, r in enumerate(radii)
            for k, c in enumerate(centers)]


def test_criterion_6_identity_path(cycle64):
    space, _, dec = cycle64
    m = hl.multiplier_from_spec({"name": "identity"})
    res = hl.theorem1_experiment(space, dec, m, 1.6, atom_ensemble())
    rows = [r for r in res["rows"] if r["status"] == "ok"]
    worst = max(abs(r["h1_out"] - r["h1_in"]) / r["h1_in"] for r in rows)
    report(6, len(rows) >= 12 and worst < 1e-12,
           f"{len(rows)} atoms, max rel dev {worst:.2e}")


def per_radius_max(space, dec, m, radii=(2.5, 4.5, 8.5, 16.5)):
    out = []
    for i, r in enumerate(radii):
        params = [(c, r, 10 * i + k) for k, c in enumerate((0, space.n // 3,
                                                            2 * space.n // 3))]
        res = hl.theorem1_experiment(space, dec, m, 1.6, params)
        out.append(res["ensemble_max"])
    return out


def test_criterion_7_contrast(cycle64):
    t0 = time.time()
    space, _, dec = cycle64
    m_imag = hl.multiplier_from_spec({"name": "imaginary_power"})
    m_osc = hl.multiplier_from_spec({"name": "oscillatory"})

    maxima_64 = per_radius_max(space, dec, m_imag)
    spread = max(maxima_64) / min(maxima_64)

    space2, op2 = hl.cycle_laplacian(128)
    dec2 = hl.spectral_decomposition(op2)
    maxima_128 = per_radius_max(space2, dec2, m_imag)
    stability = max(max(maxima_64) / max(maxima_128),
                    max(maxima_128) / max(maxima_64))

    osc = per_radius_max(space, dec, m_osc)
    increasing = all(a < b for a, b in zip(osc, osc[1:]))
    dt = time.time() - t0
    report(7, spread <= 4.0 and stability <= 2.0 and increasing and dt < 600.0,
           f"lambda^i spread {spread:.2f}, doubling stability {stability:.2f}, "
           f"e^(i lambda) per-radius maxima {np.round(osc, 3).tolist()} "
           f"(strictly increasing: {increasing}), {dt:.1f}s")


def test_criterion_8_molecule_gate(cycle64):
    t0 = time.time()
    space, _, dec = cycle64
    m = hl.multiplier_from_spec({"name": "imaginary_power"})
    res = hl.theorem2_experiment(space, dec, m, 1, 1.6,
                                 [(0, 2.5, 3), (21, 4.5, 5), (42, 6.5, 7),
                                  (11, 8.5, 9)])
    rows = [r for r in res["rows"] if r["status"] == "ok"]
    eps_min = min(r["best_epsilon"] for r in rows)
    margin_min = min(r["g_budget_margin"] for r in rows)
    dt = time.time() - t0
    report(8, rows and eps_min >= 0.1 and margin_min >= -1e-9 and dt < 300.0,
           f"{len(rows)} atoms, min eps {eps_min:.3f}, "
           f"min g-margin {margin_min:.2e}, {dt:.1f}s")


def test_criterion_9_offball_uniformity(cycle64, rng):
    t0 = time.time()
    space, _, dec = cycle64
    F = EvenSpectralFunction.from_callable(
        lambda x: float(abs(x) ** 0.7 * np.exp(-x * x)),
        half_width=64.0, samples=1 << 14, sobolev_gamma_beta=1.1)
    ens = []
    for r in (2.5, 4.5):
        for _ in range(3):
            y0 = int(rng.integers(space.n))
            inside = space.dist[y0] < r
            v = rng.standard_normal(int(inside.sum()))
            v -= np.average(v, weights=space.weights[inside])
            g = np.zeros(space.n)
            g[inside] = v
            ens.append((g, y0, r))
    res = hl.verify_lemma_dd1(space, dec, F, ens, range(-2, 5), beta=1.0,
                              gamma=0.6, assert_uniform=False)
    dt = time.time() - t0
    report(9, res["uniformity_factor"] <= 8.0 and dt < 180.0,
           f"uniformity factor {res['uniformity_factor']:.2f}, {dt:.1f}s")


def test_criterion_10_quadrature_convergence(cycle64):
    space, _, dec = cycle64
    q = hl.default_quadrature(dec)
    q8 = hl.ConeQuadrature.build(q.t_min, q.t_max, 8)
    q16 = hl.ConeQuadrature.build(q.t_min, q.t_max, 16)
    worst_h1 = 0.0
    for c, r, s in atom_ensemble(radii=(2.5, 4.5, 8.5)):
        a = hl.make_atom(space, dec, (c, r), 1, seed=s).a
        n8 = hl.h1_norm(space, dec, a, q8)
        n16 = hl.h1_norm(space, dec, a, q16)
        worst_h1 = max(worst_h1, abs(n16 - n8) / n16)
    worst_sob = 0.0
    for alpha in (1.0, 1.6):
        for p in (2, np.inf):
            vals = []
            for samples in (4096, 8192):
                grid = SobolevGrid(half_width=16.0, samples=samples,
                                   alpha=alpha, p=p)
                vals.append(hl.sobolev_norm(lambda x: np.exp(-x * x), grid))
            worst_sob = max(worst_sob, abs(vals[1] - vals[0]) / vals[1])
    report(10, worst_h1 < 0.005 and worst_sob < 0.001,
           f"H1 drift {worst_h1:.2e}, Sobolev drift {worst_sob:.2e}")


def test_criterion_11_determinism(tmp_path):
    cfg = {"model": {"builder": "cycle_laplacian", "params": {"n": 32}},
           "atoms": [[0, 2.5, 3], [9, 4.5, 5], [20, 6.5, 7]],
           "q": 1.0, "alpha": 1.6, "M": 1,
           "multiplier": {"name": "imaginary_power", "params": {"tau": 1.0}}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    payloads = []
    for i in (1, 2):
        out = tmp_path / f"run{i}"
        rc = cli_main(["multiplier-verify", "--config", str(path),
                       "--out", str(out), "--seed", "7"])
        assert rc == 0
        with open(os.path.join(out, "multiplier_verify.csv"), "rb") as fh:
            payloads.append(fh.read())
    report(11, payloads[0] == payloads[1],
           f"{len(payloads[0])} bytes, identical {payloads[0] == payloads[1]}")
