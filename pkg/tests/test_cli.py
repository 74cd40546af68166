import filecmp
import json
import subprocess
import sys

import numpy as np
import pytest

import hillscape as hs


def run_cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "hillscape", *args],
                          capture_output=True, text=True, cwd=cwd)


def read_csv(path):
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    return header, rows


@pytest.fixture(scope="module")
def small_landscape(tmp_path_factory):
    """A generated clique-power:5,3 uniform landscape (125 nodes)."""
    out = tmp_path_factory.mktemp("gen")
    res = run_cli("gen", "--topo", "clique-power:5,3", "--model", "uniform",
                  "--seed", "7", "--out", str(out))
    assert res.returncode == 0, res.stderr
    return out / "landscape.csv"


class TestGen:
    def test_uniform_row_count(self, small_landscape):
        header, rows = read_csv(small_landscape)
        assert header == ["id", "val_loss"]
        assert len(rows) == 125

    def test_meta_sidecar(self, small_landscape):
        meta = json.loads((small_landscape.parent / "landscape.meta.json").read_text())
        assert meta["topology"] == "clique-power:5,3"
        assert meta["meta"]["generator"] == "uniform"

    def test_markov_model(self, tmp_path):
        res = run_cli("gen", "--topo", "clique-power:3,3",
                      "--model", "markov-tn:0.35", "--seed", "3",
                      "--out", str(tmp_path))
        assert res.returncode == 0, res.stderr
        _, rows = read_csv(tmp_path / "landscape.csv")
        assert len(rows) == 27

    def test_deterministic(self, tmp_path):
        for sub in ("a", "b"):
            res = run_cli("gen", "--topo", "complete:40", "--model", "uniform",
                          "--seed", "5", "--out", str(tmp_path / sub))
            assert res.returncode == 0
        # manifests differ only in the recorded --out path; primary outputs
        # must be byte-identical
        for name in ("landscape.csv", "landscape.meta.json"):
            assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name,
                               shallow=False)

    def test_bad_topo_exits_3(self, tmp_path):
        res = run_cli("gen", "--topo", "torus:4", "--out", str(tmp_path))
        assert res.returncode == 3
        assert not (tmp_path / "landscape.csv").exists()


class TestSearch:
    def test_runs_and_summary(self, small_landscape, tmp_path):
        res = run_cli("search", "--landscape", str(small_landscape),
                      "--algo", "local", "--budget", "30", "--trials", "4",
                      "--seed", "1", "--out", str(tmp_path))
        assert res.returncode == 0, res.stderr
        header, rows = read_csv(tmp_path / "runs.csv")
        assert header == ["trial", "query", "node", "val_loss", "best_val", "best_test"]
        assert len(rows) == 4 * 30
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["queries"] == 30
        # self-consistency: summary equals recomputation from the CSV
        by_query = {}
        for r in rows:
            by_query.setdefault(int(r[1]), []).append(float(r[4]))
        for q in range(30):
            assert summary["mean_best_val"][q] == pytest.approx(
                np.mean(by_query[q + 1]), rel=1e-12)
        assert (np.diff(summary["mean_best_val"]) <= 1e-15).all()

    def test_each_algo(self, small_landscape, tmp_path):
        for algo in ("local", "local-qul", "local-cam", "random"):
            res = run_cli("search", "--landscape", str(small_landscape),
                          "--algo", algo, "--budget", "10", "--trials", "2",
                          "--seed", "2", "--out", str(tmp_path / algo))
            assert res.returncode == 0, res.stderr

    def test_trials_one_budget_one(self, small_landscape, tmp_path):
        res = run_cli("search", "--landscape", str(small_landscape),
                      "--algo", "random", "--budget", "1", "--trials", "1",
                      "--out", str(tmp_path))
        assert res.returncode == 0
        _, rows = read_csv(tmp_path / "runs.csv")
        assert len(rows) == 1

    def test_unknown_algo_usage_error(self, small_landscape, tmp_path):
        res = run_cli("search", "--landscape", str(small_landscape),
                      "--algo", "tabu", "--out", str(tmp_path))
        assert res.returncode == 2

    def test_budget_violation_exits_3(self, small_landscape, tmp_path):
        res = run_cli("search", "--landscape", str(small_landscape),
                      "--algo", "local", "--budget", "2", "--num-initial", "5",
                      "--out", str(tmp_path))
        assert res.returncode == 3
        assert not (tmp_path / "runs.csv").exists()

    def test_jobs_deterministic(self, small_landscape, tmp_path):
        for jobs, sub in (("1", "a"), ("2", "b")):
            res = run_cli("search", "--landscape", str(small_landscape),
                          "--algo", "local", "--budget", "25", "--trials", "6",
                          "--seed", "9", "--jobs", jobs, "--out", str(tmp_path / sub))
            assert res.returncode == 0, res.stderr
        assert filecmp.cmp(tmp_path / "a" / "runs.csv", tmp_path / "b" / "runs.csv",
                           shallow=False)

    def test_config_file_precedence(self, small_landscape, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"budget": 5, "trials": 2, "algo": "random",
                                   "landscape": str(small_landscape)}))
        res = run_cli("search", "--config", str(cfg), "--budget", "7",
                      "--out", str(tmp_path / "o"))
        assert res.returncode == 0, res.stderr
        manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert manifest["config"]["budget"] == 7   # flag beats config
        assert manifest["config"]["trials"] == 2   # config beats default
        _, rows = read_csv(tmp_path / "o" / "runs.csv")
        assert len(rows) == 2 * 7

    def test_unknown_config_key(self, small_landscape, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"bogus": 1}))
        res = run_cli("search", "--landscape", str(small_landscape),
                      "--config", str(cfg), "--out", str(tmp_path / "o"))
        assert res.returncode == 3


class TestAnalyze:
    def test_outputs(self, small_landscape, tmp_path):
        res = run_cli("analyze", "--landscape", str(small_landscape),
                      "--export-tree", "3", "--out", str(tmp_path))
        assert res.returncode == 0, res.stderr
        header, rows = read_csv(tmp_path / "stats.csv")
        stats = {r[0]: float(r[1]) for r in rows}
        assert stats["n"] == 125
        assert stats["num_local_minima"] >= 1
        assert 0 < stats["pct_global_basin"] <= 100
        _, eps_rows = read_csv(tmp_path / "within_eps.csv")
        assert len(eps_rows) == 101
        _, basin_rows = read_csv(tmp_path / "basin_sizes.csv")
        assert sum(int(r[2]) for r in basin_rows) == 125
        trees = sorted((tmp_path / "trees").glob("tree_*.json"))
        assert len(trees) == 3
        assert len(sorted((tmp_path / "trees").glob("tree_*.dot"))) == 3

    def test_uniform_replace_mode(self, tmp_path):
        # uniform-replace on any landscape behaves like the uniform model
        out = tmp_path / "g"
        run_cli("gen", "--topo", "clique-power:5,3", "--model", "markov-tn:0.2",
                "--seed", "3", "--out", str(out))
        res = run_cli("analyze", "--landscape", str(out / "landscape.csv"),
                      "--noise", "uniform-replace", "--seed", "11",
                      "--out", str(tmp_path / "a"))
        assert res.returncode == 0, res.stderr
        _, rows = read_csv(tmp_path / "a" / "stats.csv")
        stats = {r[0]: float(r[1]) for r in rows}
        # expected count n/(s+1) = 125/13 ~ 9.6; any single draw lands nearby
        assert 2 <= stats["num_local_minima"] <= 25

    def test_fresh_noise_rejected(self, small_landscape, tmp_path):
        res = run_cli("analyze", "--landscape", str(small_landscape),
                      "--noise", "gaussian-fresh:0.1", "--out", str(tmp_path))
        assert res.returncode == 3
        assert not (tmp_path / "stats.csv").exists()

    def test_bare_tabular_csv_with_explicit_topo(self, tmp_path):
        # real benchmark exports arrive without a sidecar; --topo supplies
        # the graph (the same path exercised by the gated table test)
        t = hs.make_clique_power(3, 2)
        rng = np.random.default_rng(0)
        rows = ["id,val_loss,test_loss"] + [
            f"{i},{rng.random()!r},{rng.random()!r}" for i in range(t.n)]
        csv = tmp_path / "bare.csv"
        csv.write_text("\n".join(rows) + "\n")
        res = run_cli("analyze", "--landscape", str(csv),
                      "--topo", "clique-power:3,2", "--out", str(tmp_path / "o"))
        assert res.returncode == 0, res.stderr
        _, stat_rows = read_csv(tmp_path / "o" / "stats.csv")
        stats = {r[0]: float(r[1]) for r in stat_rows}
        assert stats["n"] == 9
        # without --topo the sidecar is required
        res = run_cli("analyze", "--landscape", str(csv),
                      "--out", str(tmp_path / "o2"))
        assert res.returncode == 3


class TestRwaCommand:
    def test_rows_and_first_line(self, small_landscape, tmp_path):
        res = run_cli("rwa", "--landscape", str(small_landscape),
                      "--walk-len", "4000", "--max-lag", "12",
                      "--out", str(tmp_path))
        assert res.returncode == 0, res.stderr
        header, rows = read_csv(tmp_path / "rwa.csv")
        assert header == ["lag", "sqrt_lag", "rho"]
        assert len(rows) == 13
        assert rows[0] == ["0", "0.0", "1.0"]

    def test_default_walk_len_in_manifest(self, small_landscape, tmp_path):
        res = run_cli("rwa", "--landscape", str(small_landscape),
                      "--max-lag", "3", "--out", str(tmp_path))
        assert res.returncode == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["config"]["walk_len"] == 100_000


class TestTheoryCommand:
    def test_uniform_closed_form(self, tmp_path):
        res = run_cli("theory", "--pdf-n", "uniform", "--pdf-e", "uniform",
                      "--topo", "clique-power:5,6", "--closed-form", "uniform",
                      "--out", str(tmp_path))
        assert res.returncode == 0, res.stderr
        _, rows = read_csv(tmp_path / "theory_summary.csv")
        metrics = {r[0]: float(r[1]) for r in rows}
        assert metrics["expected_minima_count"] == pytest.approx(625.0)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["config"]["max_k"] == 5
        _, curve = read_csv(tmp_path / "theory_curve.csv")
        fr = [float(r[1]) for r in curve]
        assert (np.diff(fr) >= 0).all()
        assert (tmp_path / "theory_bounds.csv").exists()
        _, pre = read_csv(tmp_path / "theory_preimages.csv")
        assert len(pre) == 101 * 5

    def test_quadrature_path_with_chebyshev(self, tmp_path):
        res = run_cli("theory", "--pdf-n", "truncnorm:0.25,0.18",
                      "--pdf-e", "truncnorm-local:0.35",
                      "--topo", "clique-power:5,6",
                      "--noise-sigma", "0.05", "--grid-points", "513",
                      "--out", str(tmp_path))
        assert res.returncode == 0, res.stderr
        _, rows = read_csv(tmp_path / "theory_chebyshev.csv")
        assert float(rows[0][0]) == 0.05
        assert not (tmp_path / "theory_bounds.csv").exists()

    def test_n_s_flags(self, tmp_path):
        res = run_cli("theory", "--pdf-n", "uniform", "--pdf-e", "uniform",
                      "--n", "25", "--s", "24", "--closed-form", "uniform",
                      "--out", str(tmp_path))
        assert res.returncode == 0, res.stderr
        _, rows = read_csv(tmp_path / "theory_summary.csv")
        metrics = {r[0]: float(r[1]) for r in rows}
        assert metrics["expected_minima_count"] == pytest.approx(1.0)

    def test_missing_params(self, tmp_path):
        res = run_cli("theory", "--pdf-n", "uniform", "--pdf-e", "uniform",
                      "--out", str(tmp_path))
        assert res.returncode == 3


class TestFitCommand:
    def test_global_fit(self, tmp_path):
        t = hs.make_complete(2000)
        rng = np.random.default_rng(1)
        losses = hs.sample_truncnorm(0.25, 0.22, rng, size=2000)
        hs.save_landscape(hs.Landscape(t, losses), str(tmp_path / "l.csv"))
        res = run_cli("fit", "--mode", "global", "--landscape",
                      str(tmp_path / "l.csv"), "--out", str(tmp_path / "o"))
        assert res.returncode == 0, res.stderr
        fit = json.loads((tmp_path / "o" / "fit.json").read_text())
        assert abs(fit["sigma"] - 0.22) <= 0.03
        assert fit["objective"] >= 0

    def test_insufficient_data(self, tmp_path):
        t = hs.make_complete(10)
        hs.save_landscape(hs.Landscape(t, np.linspace(0.1, 0.9, 10)),
                          str(tmp_path / "l.csv"))
        res = run_cli("fit", "--mode", "global", "--landscape",
                      str(tmp_path / "l.csv"), "--out", str(tmp_path / "o"))
        assert res.returncode == 3
        assert "insufficient data" in res.stderr

    def test_rwa_fit_round_trip_small(self, tmp_path):
        gen = tmp_path / "gen"
        run_cli("gen", "--topo", "clique-power:4,4", "--model", "markov-tn:0.2",
                "--seed", "5", "--out", str(gen))
        run_cli("rwa", "--landscape", str(gen / "landscape.csv"),
                "--walk-len", "30000", "--max-lag", "12", "--seed", "3",
                "--out", str(tmp_path / "r"))
        res = run_cli("fit", "--mode", "local-rwa",
                      "--rwa", str(tmp_path / "r" / "rwa.csv"),
                      "--topo", "clique-power:4,4",
                      "--candidates", "0.2,0.6", "--walk-len", "30000",
                      "--seed", "8", "--out", str(tmp_path / "o"))
        assert res.returncode == 0, res.stderr
        fit = json.loads((tmp_path / "o" / "fit.json").read_text())
        assert fit["sigma_local"] == 0.2


class TestCompare:
    def test_identical_inputs_zero_gap(self, small_landscape, tmp_path):
        run_cli("analyze", "--landscape", str(small_landscape),
                "--out", str(tmp_path / "a"))
        sim = tmp_path / "a" / "within_eps.csv"
        theory_csv = tmp_path / "t.csv"
        text = sim.read_text().replace("fraction", "fraction_theory")
        theory_csv.write_text(text)
        res = run_cli("compare", "--sim", str(sim), "--theory", str(theory_csv),
                      "--out", str(tmp_path / "c"))
        assert res.returncode == 0, res.stderr
        summary = json.loads((tmp_path / "c" / "compare_summary.json").read_text())
        assert summary["max_abs_gap"] == 0.0

    def test_pipeline_analyze_theory_compare(self, small_landscape, tmp_path):
        run_cli("analyze", "--landscape", str(small_landscape),
                "--out", str(tmp_path / "a"))
        run_cli("theory", "--pdf-n", "uniform", "--pdf-e", "uniform",
                "--topo", "clique-power:5,3", "--closed-form", "uniform",
                "--out", str(tmp_path / "t"))
        res = run_cli("compare", "--sim", str(tmp_path / "a" / "within_eps.csv"),
                      "--theory", str(tmp_path / "t" / "theory_curve.csv"),
                      "--out", str(tmp_path / "c"))
        assert res.returncode == 0, res.stderr
        header, rows = read_csv(tmp_path / "c" / "compared.csv")
        assert header == ["epsilon", "fraction_sim", "fraction_theory", "gap"]
        assert len(rows) == 101

    def test_grid_mismatch_exits_3_no_output(self, small_landscape, tmp_path):
        run_cli("analyze", "--landscape", str(small_landscape),
                "--out", str(tmp_path / "a"))
        sim = tmp_path / "a" / "within_eps.csv"
        bad = tmp_path / "bad.csv"
        bad.write_text("epsilon,fraction_theory\n0.05,0.5\n")
        res = run_cli("compare", "--sim", str(sim), "--theory", str(bad),
                      "--out", str(tmp_path / "c"))
        assert res.returncode == 3
        assert "do not match" in res.stderr
        assert not (tmp_path / "c" / "compared.csv").exists()


def test_version_flag():
    res = run_cli("--version")
    assert res.returncode == 0
    assert "hillscape" in res.stdout


def test_no_command_usage_error():
    res = run_cli()
    assert res.returncode == 2
