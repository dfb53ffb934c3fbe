"""Experiment orchestration: config validation, CSV/SVG emission, exit codes.

Usage: hardylab <experiment> --config <file.json> --out <dir> [--seed N] [--jobs K]
Exit codes: 0 ok, 2 config error, 3 numerical gate failure, 4 module error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .errors import (ConfigError, HardyLabError, QuadratureTooCoarse, SobolevGate,
                     UnboundedFit)
from .hardy import ConeQuadrature, default_quadrature, h1_norm, make_atom, validate_atom
from .models import build_model
from .multiplier import (Multiplier, default_t_grid, make_partition,
                         multiplier_from_spec, theorem1_experiment,
                         theorem2_experiment, verify_lemma3, verify_prop1)
from .space import check_lower_volume, doubling_profile
from .spectral import check_davies_gaffney, check_gaussian_bounds, spectral_decomposition
from .wave import EvenSpectralFunction, propagation_speed, verify_lemma_dd1

EXPERIMENTS = ("space-report", "heat-check", "dg-check", "atom-bench",
               "multiplier-verify", "molecule-check", "wave-check",
               "prop1-check", "lemma3-check")


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".12g")
    if isinstance(v, complex):
        return format(v.real, ".12g") + ("+" if v.imag >= 0 else "") + format(v.imag, ".12g") + "j"
    return "" if v is None else str(v)


def write_csv(path, fieldnames, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row.get(k) if isinstance(row, dict) else row[i])
                             for i, k in enumerate(fieldnames)])


def plot_table(rows, xcol, ycols, path, title=""):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [row[xcol] for row in rows if isinstance(row.get(xcol), (int, float))]
    plotted = False
    for ycol in ycols:
        ys = [row[ycol] for row in rows if isinstance(row.get(ycol), (int, float))]
        if len(ys) == len(xs) and xs:
            ax.plot(xs, ys, marker="o", label=ycol)
            plotted = True
    ax.set_xlabel(xcol)
    ax.set_title(title)
    if plotted:
        ax.legend()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _pmap(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _atom_params(config, seed):
    params = []
    for entry in config.get("atoms", []):
        center, radius, s = entry
        params.append((int(center), float(radius), int(s) + seed))
    return params


def _quad(config, decomp):
    qc = config.get("quadrature", {})
    spo = int(qc.get("steps_per_octave", 8))
    if "t_min" in qc:
        return ConeQuadrature.build(qc["t_min"], qc["t_max"], spo)
    return default_quadrature(decomp, spo)


def validate_config(experiment, config):
    q = config.get("q")
    alpha = config.get("alpha")
    if experiment == "multiplier-verify":
        if q is None or alpha is None or not alpha > q / 2.0:
            raise ConfigError(f"need alpha > q/2, got alpha={alpha}, q={q}")
    if experiment == "molecule-check":
        if q is None or alpha is None or not alpha > (q + 1.0) / 2.0:
            raise ConfigError(f"need alpha > (q+1)/2, got alpha={alpha}, q={q}")
        M = config.get("M", 1)
        if not M > q / 4.0:
            raise ConfigError(f"need M > q/4, got M={M}, q={q}")
    if experiment in ("multiplier-verify", "molecule-check", "prop1-check",
                      "lemma3-check") and "multiplier" not in config:
        raise ConfigError("missing multiplier spec")
    if "model" not in config:
        raise ConfigError("missing model spec")


def run_experiment(experiment, config, out_dir, seed=0, jobs=1):
    os.makedirs(out_dir, exist_ok=True)
    space, op = build_model(config["model"])

    if experiment == "space-report":
        q_grid = config.get("q_grid", [0.5, 1.0, 1.5, 2.0])
        profiles = doubling_profile(space, q_grid)
        rows = [{"q": p.q, "c0": p.c0,
                 "witness": ";".join(str(w) for w in p.samples)} for p in profiles]
        if space.n >= 2 and space.diameter > 1.0:
            c, kappa = check_lower_volume(space, int(config.get("y", 0)),
                                          (1.0, space.diameter))
            rows.append({"q": "lower_volume_kappa", "c0": kappa, "witness": f"c={c}"})
        write_csv(os.path.join(out_dir, "space_report.csv"),
                  ["q", "c0", "witness"], rows)
        plot_table(rows, "q", ["c0"], os.path.join(out_dir, "space_report.svg"),
                   "doubling constant vs growth exponent")
        return {"rows": rows}

    decomp = spectral_decomposition(op)

    if experiment == "heat-check":
        t_grid = np.asarray(config.get("t_grid") or np.geomspace(
            0.1 / decomp.eigenvalues[-1], 10.0 / decomp.eigenvalues[0], 13))
        ks = config.get("derivative_orders", [0])
        rows = []
        for k in ks:
            fit = check_gaussian_bounds(space, decomp, t_grid, k=int(k))
            rows.append({"k": int(k), "C": fit.C, "c": fit.c,
                         "witness": str(fit.worst_witness), "margin": fit.margin})
        write_csv(os.path.join(out_dir, "heat_check.csv"),
                  ["k", "C", "c", "witness", "margin"], rows)
        plot_table(rows, "k", ["C", "c"], os.path.join(out_dir, "heat_check.svg"),
                   "fitted Gaussian-bound constants")
        return {"rows": rows}

    if experiment == "dg-check":
        pairs = []
        for u1, u2 in config["ball_pairs"]:
            pairs.append((np.asarray(u1, dtype=int), np.asarray(u2, dtype=int)))
        t_grid = np.asarray(config.get("t_grid") or np.geomspace(0.05, 5.0, 13))
        fit = check_davies_gaffney(space, decomp, pairs, t_grid)
        rows = [{"C": fit.C, "c": fit.c, "witness": str(fit.worst_witness),
                 "margin": fit.margin}]
        write_csv(os.path.join(out_dir, "dg_check.csv"),
                  ["C", "c", "witness", "margin"], rows)
        return {"rows": rows}

    if experiment == "atom-bench":
        quad = _quad(config, decomp)
        M = int(config.get("M", 1))

        def bench(p):
            center, radius, s = p
            atom = make_atom(space, decomp, (center, radius), M, s)
            rep = validate_atom(space, decomp, atom)
            return {"center": center, "r": radius, "seed": s, "M": M,
                    "passed": rep.passed,
                    "worst_margin": min(mg for _, mg, _ in rep.margins),
                    "h1": h1_norm(space, decomp, atom.a, quad)}

        rows = _pmap(bench, _atom_params(config, seed), jobs)
        write_csv(os.path.join(out_dir, "atom_bench.csv"),
                  ["center", "r", "seed", "M", "passed", "worst_margin", "h1"], rows)
        plot_table(rows, "r", ["h1"], os.path.join(out_dir, "atom_bench.svg"),
                   "atom H1 norm vs radius")
        return {"rows": rows}

    if experiment == "multiplier-verify":
        m = multiplier_from_spec(config["multiplier"])
        quad = _quad(config, decomp)
        result = theorem1_experiment(space, decomp, m, config["alpha"],
                                     _atom_params(config, seed), quad)
        fields = ["atom_id", "r", "M", "h1_in", "h1_out", "nearfield",
                  "farfield", "best_epsilon", "hormander_const", "status"]
        write_csv(os.path.join(out_dir, "multiplier_verify.csv"), fields,
                  result["rows"])
        plot_table(result["rows"], "r", ["h1_out", "h1_in"],
                   os.path.join(out_dir, "multiplier_verify.svg"),
                   "H1 norm of m(L)a vs radius")
        return result

    if experiment == "molecule-check":
        m = multiplier_from_spec(config["multiplier"])
        result = theorem2_experiment(space, decomp, m, int(config.get("M", 1)),
                                     config["alpha"], _atom_params(config, seed))
        fields = ["atom_id", "r", "M", "best_epsilon", "multiple_constant",
                  "g_budget_margin", "fj_constant", "recon_err", "status"]
        write_csv(os.path.join(out_dir, "molecule_check.csv"), fields,
                  result["rows"])
        plot_table(result["rows"], "r", ["best_epsilon", "multiple_constant"],
                   os.path.join(out_dir, "molecule_check.svg"),
                   "molecule decay vs radius")
        return result

    if experiment == "wave-check":
        wc = config.get("wave", {})
        # "cusp" sits at the edge of the required Sobolev class, which keeps
        # the off-ball ratios comparable across dyadic scales; "gauss" is the
        # smooth reference whose ratios decay rapidly with j.
        kind = wc.get("F", "cusp")
        if kind == "cusp":
            f_eval = lambda x: float(abs(x) ** 0.7 * np.exp(-x * x))
        elif kind == "gauss":
            f_eval = lambda x: float(np.exp(-x * x))
        else:
            raise ConfigError(f"unknown wave F kind {kind!r}")
        F = EvenSpectralFunction.from_callable(
            f_eval,
            half_width=float(wc.get("half_width", 64.0)),
            sobolev_gamma_beta=float(wc.get("gamma", 0.6)) + float(wc.get("beta", 1.0)) / 2.0)
        rng = np.random.default_rng(seed)
        g_ensemble = []
        for center, radius, _ in _atom_params(config, seed):
            g = np.zeros(space.n)
            inside = space.dist[int(center)] < radius
            v = rng.standard_normal(int(inside.sum()))
            # mean-zero in L^2(mu) so deflated constant modes carry no mass
            v -= np.average(v, weights=space.weights[inside])
            g[inside] = v
            g_ensemble.append((g, int(center), float(radius)))
        j_range = range(int(wc.get("j_min", -2)), int(wc.get("j_max", 4)) + 1)
        result = verify_lemma_dd1(space, decomp, F, g_ensemble, j_range,
                                  beta=float(wc.get("beta", 1.0)),
                                  gamma=float(wc.get("gamma", 0.6)),
                                  assert_uniform=bool(wc.get("assert_uniform", True)))
        write_csv(os.path.join(out_dir, "wave_check.csv"),
                  ["g_id", "r", "j", "lhs", "budget", "ratio"], result["rows"])
        plot_table(result["rows"], "j", ["ratio"],
                   os.path.join(out_dir, "wave_check.svg"),
                   "off-ball energy ratio vs dyadic scale")
        if "speed" in config:
            sc = config["speed"]
            g, y0, r = g_ensemble[0]
            report = propagation_speed(space, decomp, g, y0, r,
                                       sc.get("s_grid", [0.5, 1.0, 2.0, 4.0]),
                                       float(sc.get("eps", 1e-6)))
            write_csv(os.path.join(out_dir, "speed_report.csv"),
                      ["s", "radius", "mass_outside"], report.table)
            result["speed"] = report
        return result

    if experiment == "prop1-check":
        m = multiplier_from_spec(config["multiplier"])
        t_grid = np.asarray(config.get("t_grid") or default_t_grid(decomp))
        beta = float(config.get("beta", 0.5))
        rows = []
        for N in config.get("N_values", [1, 2]):
            c = verify_prop1(space, decomp, m, beta, t_grid, int(N))
            rows.append({"N": int(N), "beta": beta, "C": c})
        write_csv(os.path.join(out_dir, "prop1_check.csv"), ["N", "beta", "C"], rows)
        return {"rows": rows}

    if experiment == "lemma3-check":
        m = multiplier_from_spec(config["multiplier"])
        beta = float(config.get("beta", 0.5))
        j_range = range(int(config.get("j_min", -3)), int(config.get("j_max", 3)) + 1)
        c = verify_lemma3(space, decomp, m, beta, j_range,
                          int(config.get("t_substeps", 8)))
        rows = [{"beta": beta, "C": c}]
        write_csv(os.path.join(out_dir, "lemma3_check.csv"), ["beta", "C"], rows)
        return {"rows": rows}

    raise ConfigError(f"unknown experiment {experiment!r}")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="hardylab")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=None)
    args = parser.parse_args(argv)

    jobs = args.jobs
    if jobs is None:
        jobs = int(os.environ.get("HARDYLAB_JOBS", "1"))

    start = time.time()
    try:
        with open(args.config) as fh:
            config = json.load(fh)
        validate_config(args.experiment, config)
    except (ConfigError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    try:
        run_experiment(args.experiment, config, args.out, seed=args.seed, jobs=jobs)
    except (SobolevGate, QuadratureTooCoarse, UnboundedFit) as exc:
        _emit_error(args.out, exc)
        return 3
    except HardyLabError as exc:
        _emit_error(args.out, exc)
        return 4
    manifest = {
        "experiment": args.experiment,
        "config_sha256": hashlib.sha256(
            json.dumps(config, sort_keys=True).encode()).hexdigest(),
        "version": __version__,
        "seed": args.seed,
        "jobs": jobs,
        "wall_time_s": time.time() - start,
    }
    with open(os.path.join(args.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
    return 0


def _emit_error(out_dir, exc):
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload), file=sys.stderr)
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "error.json"), "w") as fh:
            json.dump(payload, fh, indent=2)
    except OSError:
        pass


if __name__ == "__main__":
    sys.exit(main())
