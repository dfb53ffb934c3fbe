import json
import os
import subprocess
import sys

import numpy as np
import pytest

import hardylab as hl
from hardylab.cli import main as cli_main
from hardylab.errors import NegativePotential, UnknownBuilder


class TestBuilders:
    def test_cycle_eigenvalue_oracle(self):
        _, op = hl.cycle_laplacian(8)
        dec = hl.spectral_decomposition(op)
        k = np.arange(1, 8)
        lam = np.sort(2.0 - 2.0 * np.cos(2.0 * np.pi * k / 8.0))
        assert np.allclose(dec.eigenvalues, lam, atol=1e-12)
        assert dec.deflated_modes == 1

    def test_path_connectivity(self):
        space, op = hl.path_laplacian(5)
        assert space.dist[0, 4] == 4.0
        assert op.locality_radius == 1.0

    def test_schrodinger_continuum_limit(self):
        # discrete Dirichlet spectrum approaches 1 + (k pi)^2
        _, op = hl.schrodinger_1d(200, V=1.0)
        dec = hl.spectral_decomposition(op)
        k = np.arange(1, 6)
        assert np.allclose(dec.eigenvalues[:5], 1.0 + (k * np.pi) ** 2, rtol=1e-3)

    def test_negative_potential_rejected(self):
        with pytest.raises(NegativePotential):
            hl.schrodinger_1d(8, V=-1.0)

    def test_weighted_graph(self):
        doc = {"metric": {"edges": [[0, 1, 1.0], [1, 2, 2.0]]},
               "weights": [1.0, 2.0, 1.0]}
        space, op = hl.weighted_graph(doc)
        dec = hl.spectral_decomposition(op)
        assert dec.deflated_modes == 1
        assert np.all(dec.eigenvalues > 0)
        # constants are in the kernel of the mu-weighted Laplacian
        assert np.allclose(op.apply(np.ones(3)), 0.0, atol=1e-12)

    def test_build_model_dispatch(self):
        space, op = hl.build_model({"builder": "cycle_laplacian", "params": {"n": 6}})
        assert space.n == 6
        with pytest.raises(UnknownBuilder):
            hl.build_model({"builder": "mystery", "params": {}})

    def test_build_model_explicit_matrix(self):
        spec = {"space": {"metric": {"matrix": [[0, 1], [1, 0]]}, "weights": [1, 1]},
                "operator": {"matrix": [[2.0, -1.0], [-1.0, 2.0]]}}
        space, op = hl.build_model(spec)
        dec = hl.spectral_decomposition(op)
        assert np.allclose(dec.eigenvalues, [1.0, 3.0])


@pytest.fixture(scope="module")
def base_config(tmp_path_factory):
    d = tmp_path_factory.mktemp("cfg")
    cfg = {
        "model": {"builder": "cycle_laplacian", "params": {"n": 32}},
        "atoms": [[0, 2.5, 3], [9, 4.5, 5], [20, 6.5, 7]],
        "q": 1.0, "alpha": 1.6, "M": 1,
        "multiplier": {"name": "imaginary_power", "params": {"tau": 1.0}},
        "ball_pairs": [[[0, 1, 2], [14, 15, 16, 17]]],
    }
    path = d / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path), cfg, d


class TestCLI:
    def run(self, *argv):
        return cli_main(list(argv))

    @pytest.mark.parametrize("experiment,csv", [
        ("space-report", "space_report.csv"),
        ("heat-check", "heat_check.csv"),
        ("dg-check", "dg_check.csv"),
        ("atom-bench", "atom_bench.csv"),
        ("multiplier-verify", "multiplier_verify.csv"),
        ("molecule-check", "molecule_check.csv"),
        ("prop1-check", "prop1_check.csv"),
        ("lemma3-check", "lemma3_check.csv"),
    ])
    def test_experiments_run_clean(self, base_config, experiment, csv, tmp_path):
        path, _, _ = base_config
        out = str(tmp_path / experiment)
        assert self.run(experiment, "--config", path, "--out", out) == 0
        assert os.path.exists(os.path.join(out, csv))
        assert os.path.exists(os.path.join(out, "manifest.json"))

    def test_wave_check(self, base_config, tmp_path):
        path, cfg, d = base_config
        cfg = dict(cfg)
        cfg["wave"] = {"j_min": -2, "j_max": 4}
        p = d / "wave.json"
        p.write_text(json.dumps(cfg))
        out = str(tmp_path / "wave")
        assert self.run("wave-check", "--config", str(p), "--out", out) == 0
        assert os.path.exists(os.path.join(out, "wave_check.csv"))

    def test_identity_multiplier_columns_equal(self, base_config, tmp_path):
        import csv as csvmod
        path, cfg, d = base_config
        cfg = dict(cfg)
        cfg["multiplier"] = {"name": "identity"}
        p = d / "ident.json"
        p.write_text(json.dumps(cfg))
        out = str(tmp_path / "ident")
        assert self.run("multiplier-verify", "--config", str(p), "--out", out) == 0
        with open(os.path.join(out, "multiplier_verify.csv")) as fh:
            rows = list(csvmod.DictReader(fh))
        for row in rows:
            assert float(row["h1_out"]) == pytest.approx(float(row["h1_in"]),
                                                         rel=1e-11)

    def test_alpha_validation_exit_2(self, base_config, tmp_path):
        path, cfg, d = base_config
        cfg = dict(cfg)
        cfg["alpha"] = cfg["q"] / 2.0  # strict inequality enforced
        p = d / "badalpha.json"
        p.write_text(json.dumps(cfg))
        assert self.run("multiplier-verify", "--config", str(p),
                        "--out", str(tmp_path / "o")) == 2

    def test_missing_config_exit_2(self, tmp_path):
        assert self.run("space-report", "--config", str(tmp_path / "nope.json"),
                        "--out", str(tmp_path / "o")) == 2

    def test_numerical_gate_exit_3(self, base_config, tmp_path):
        # a cone quadrature that misses most of the time axis trips the
        # truncation gate
        path, cfg, d = base_config
        cfg = dict(cfg)
        cfg["quadrature"] = {"t_min": 5.0, "t_max": 10.0}
        p = d / "coarse.json"
        p.write_text(json.dumps(cfg))
        out = str(tmp_path / "gate")
        assert self.run("atom-bench", "--config", str(p), "--out", out) == 3
        assert os.path.exists(os.path.join(out, "error.json"))

    def test_module_error_exit_4(self, base_config, tmp_path):
        path, cfg, d = base_config
        cfg = dict(cfg)
        cfg["model"] = {"builder": "cycle_laplacian", "params": {"n": 64}}
        # gaussian F ratios crash across j: uniformity assertion -> exit 4
        cfg["wave"] = {"j_min": -2, "j_max": 4, "F": "gauss"}
        p = d / "gauss.json"
        p.write_text(json.dumps(cfg))
        assert self.run("wave-check", "--config", str(p),
                        "--out", str(tmp_path / "w4")) == 4

    def test_determinism_byte_identical(self, base_config, tmp_path):
        path, _, _ = base_config
        outs = []
        for i in (1, 2):
            out = str(tmp_path / f"det{i}")
            assert self.run("multiplier-verify", "--config", path, "--out", out,
                            "--seed", "5") == 0
            with open(os.path.join(out, "multiplier_verify.csv"), "rb") as fh:
                outs.append(fh.read())
        assert outs[0] == outs[1]

    def test_manifest_contents(self, base_config, tmp_path):
        path, _, _ = base_config
        out = str(tmp_path / "man")
        assert self.run("space-report", "--config", path, "--out", out) == 0
        man = json.load(open(os.path.join(out, "manifest.json")))
        assert man["experiment"] == "space-report"
        assert len(man["config_sha256"]) == 64
        assert man["version"] == hl.__version__

    def test_console_entry_point(self, base_config, tmp_path):
        path, _, _ = base_config
        r = subprocess.run([sys.executable, "-m", "hardylab.cli", "space-report",
                            "--config", path, "--out", str(tmp_path / "sub")],
                           capture_output=True)
        assert r.returncode == 0
