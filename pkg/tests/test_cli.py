import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from mgpboot.cli import main
from mgpboot.io import read_dataset

DATA = Path(__file__).parent / "data" / "banks_weekly.csv"


def rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def tree(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(Path(d).rglob("*")) if p.is_file()}


@pytest.fixture
def generated(tmp_path):
    out = tmp_path / "gen"
    assert main(["generate", "--out", str(out), "--n", "600"]) == 0
    return out / "data.csv"


class TestGenerate:
    def test_default_shape(self, tmp_path):
        assert main(["generate", "--out", str(tmp_path)]) == 0
        ds = read_dataset(tmp_path / "data.csv")
        assert ds.names == ("X1", "X2", "X3")
        assert ds.values.shape == (1500, 3)
        raw = (tmp_path / "data.csv").read_bytes()
        assert b"\r" not in raw and raw.endswith(b"\n")

    def test_n_zero_is_config_error(self, tmp_path):
        assert main(["generate", "--out", str(tmp_path), "--n", "0"]) == 2

    def test_bad_config_reports_key_and_line(self, tmp_path, caplog):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[synthetic]\nn = 10\ntheta = abc\n", encoding="utf-8")
        assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
        assert "synthetic.theta" in caplog.text and "line 3" in caplog.text

    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[synthetic]\nsize = 10\n", encoding="utf-8")
        assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_config_values_used_and_flag_overrides(self, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[synthetic]\nn = 40\nnu = 2.0, 3.0\n[rand_core]\nseed = 5\n", encoding="utf-8")
        assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
        assert read_dataset(tmp_path / "a" / "data.csv").values.shape == (40, 2)
        assert main(["generate", "--config", str(cfg), "--n", "7", "--out", str(tmp_path / "b")]) == 0
        assert read_dataset(tmp_path / "b" / "data.csv").values.shape == (7, 2)
        man = json.loads((tmp_path / "b" / "manifest.json").read_text())
        assert man["seed"] == 5 and man["config"]["synthetic"]["n"] == 7


class TestBootstrap:
    def test_outputs_and_manifest(self, generated, tmp_path):
        out = tmp_path / "boot"
        assert main(["bootstrap", str(generated), "--out", str(out), "--m", "3000", "--keep-intermediate",
                     "--replicates", "2"]) == 0
        b = read_dataset(out / "bootstrap_001.csv")
        assert b.values.shape == (3000, 3)
        man = json.loads((out / "manifest.json").read_text())
        assert man["counters"]["k"] == read_dataset(out / "exceedances.csv").values.shape[0]
        assert len(man["counters"]["floored"]) == 2
        assert sorted(man["outputs"]) == man["outputs"]
        assert "bootstrap_std_000.csv" in man["outputs"]
        z = read_dataset(out / "bootstrap_std_000.csv").values
        assert np.all(z.max(axis=1) >= 0)

    def test_real_data_shape(self, tmp_path):
        assert main(["bootstrap", str(DATA), "--out", str(tmp_path)]) == 0
        b = read_dataset(tmp_path / "bootstrap_000.csv")
        assert b.values.shape == (10_000, 3)
        assert b.names == ("HSBC", "LL", "RBS")

    def test_empty_exceedances_exit_4(self, tmp_path, caplog):
        const = tmp_path / "const.csv"
        const.write_text("a,b\n" + "1,2\n" * 40, encoding="utf-8")
        assert main(["bootstrap", str(const), "--margins", "empirical", "--out", str(tmp_path / "o")]) == 4
        assert "lower the threshold" in caplog.text

    def test_high_level_on_470(self, tmp_path):
        code = main(["bootstrap", str(DATA), "--threshold-level", "0.999", "--m", "100", "--out", str(tmp_path)])
        assert code in (0, 4)

    def test_bad_csv_exit_3(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n3\n", encoding="utf-8")
        assert main(["bootstrap", str(bad), "--out", str(tmp_path / "o")]) == 3
        bad.write_text("1,2\n3,4\n", encoding="utf-8")
        assert main(["bootstrap", str(bad), "--out", str(tmp_path / "o")]) == 3
        assert main(["bootstrap", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "o")]) == 3

    def test_threshold_out_of_range(self, generated, tmp_path):
        assert main(["bootstrap", str(generated), "--threshold-level", "0.3", "--out", str(tmp_path)]) == 2

    def test_known_margins(self, generated, tmp_path):
        cfg = tmp_path / "k.ini"
        cfg.write_text("[margins]\nkind = known\nnu = 2, 3, 2.5\n", encoding="utf-8")
        assert main(["bootstrap", str(generated), "--config", str(cfg), "--m", "500", "--out", str(tmp_path / "o")]) == 0
        cfg.write_text("[margins]\nkind = known\nnu = 2, 3\n", encoding="utf-8")
        assert main(["bootstrap", str(generated), "--config", str(cfg), "--out", str(tmp_path / "p")]) == 2


class TestTrm:
    def test_d_only_rows(self, tmp_path):
        assert main(["trm", str(DATA), "--alpha", "0.0025", "--out", str(tmp_path)]) == 0
        r = rows(tmp_path / "trm.csv")
        assert len(r) == 9
        assert {x["kind"] for x in r} == {"D"}
        for x in r:
            assert (x["estimate"] == "NA") == (x["support_count"] == "0")

    def test_with_bootstrap_replicates(self, tmp_path):
        boot = tmp_path / "b"
        assert main(["bootstrap", str(DATA), "--out", str(boot), "--replicates", "3", "--m", "5000"]) == 0
        files = [str(boot / f"bootstrap_{r:03d}.csv") for r in range(3)]
        assert main(["trm", str(DATA), "--bootstrap", *files, "--alpha", "0.0025", "--out", str(tmp_path / "t")]) == 0
        r = rows(tmp_path / "t" / "trm.csv")
        star = [x for x in r if x["kind"] == "D*"]
        assert len(star) == 9 and all(x["replicates"] == "3" for x in star)
        es = [x for x in star if x["metric"] == "ES"]
        assert all(x["mean"] != "NA" and x["sd"] != "NA" for x in es)
        # weekly-return scale: tens of percent
        assert all(0.05 < float(x["mean"]) < 5 for x in es)

    def test_univariate(self, tmp_path):
        one = tmp_path / "one.csv"
        x = np.random.default_rng(0).standard_t(3, 200)
        one.write_text("X\n" + "".join(f"{float(v)!r}\n" for v in x), encoding="utf-8")
        assert main(["trm", str(one), "--out", str(tmp_path / "a")]) == 3
        assert main(["trm", str(one), "--metrics", "ES", "--out", str(tmp_path / "b")]) == 0
        assert {x["metric"] for x in rows(tmp_path / "b" / "trm.csv")} == {"ES"}

    def test_empirical_var(self, tmp_path):
        assert main(["trm", str(DATA), "--var-method", "empirical", "--alpha", "0.01", "--out", str(tmp_path)]) == 0

    def test_unknown_var_method_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["trm", str(DATA), "--var-method", "gp", "--out", str(tmp_path)])
        assert exc.value.code == 2
        cfg = tmp_path / "c.ini"
        cfg.write_text("[trm]\nvar_method = gp\n", encoding="utf-8")
        assert main(["trm", str(DATA), "--config", str(cfg), "--out", str(tmp_path)]) == 2

    def test_theoretical_needs_student(self, tmp_path):
        cfg = tmp_path / "c.ini"
        cfg.write_text("[margins]\nkind = empirical\n", encoding="utf-8")
        assert main(["trm", str(DATA), "--config", str(cfg), "--out", str(tmp_path)]) == 2

    def test_mismatched_bootstrap_columns(self, tmp_path, generated):
        assert main(["trm", str(DATA), "--bootstrap", str(generated), "--out", str(tmp_path)]) == 3


class TestExperimentAndDiagnose:
    def test_experiment_smoke(self, tmp_path):
        args = ["experiment", "--theta", "1.3", "--alpha", "0.0025", "--n-outer", "2", "--n-inner", "2",
                "--oracle-size", "50000", "--out", str(tmp_path)]
        assert main(args) == 0
        counts = rows(tmp_path / "counts.csv")
        assert {(x["metric"], x["kind"]) for x in counts} >= {("ES", "D"), ("DCTE", "D*")}
        assert len(rows(tmp_path / "oracle.csv")) == 3
        assert rows(tmp_path / "errors.csv")

    def test_diagnose_two_samples(self, tmp_path, generated):
        boot = tmp_path / "b"
        assert main(["bootstrap", str(generated), "--out", str(boot), "--keep-intermediate", "--m", "4000"]) == 0
        out = tmp_path / "d"
        assert main(["diagnose", str(boot / "exceedances.csv"), str(boot / "bootstrap_std_000.csv"),
                     "--out", str(out)]) == 0
        qq = rows(out / "qq.csv")
        assert len(qq) == 3 * 99
        chi = rows(out / "chi.csv")
        assert len(chi) == 2 * 3 * 20
        assert chi[0]["level"] == "0.90000000000000002"

    def test_diagnose_self_exact_diagonal(self, tmp_path):
        out = tmp_path / "d"
        assert main(["diagnose", str(DATA), str(DATA), "--out", str(out)]) == 0
        for x in rows(out / "qq.csv"):
            assert x["q_source"] == x["q_other"] and x["covered"] == "1"

    def test_diagnose_pairs_and_shape(self, tmp_path, generated):
        assert main(["diagnose", str(DATA), "--pairs", "1-2", "--out", str(tmp_path / "a")]) == 0
        assert len(rows(tmp_path / "a" / "chi.csv")) == 20
        assert main(["diagnose", str(DATA), "--pairs", "1-7", "--out", str(tmp_path / "b")]) == 2
        two = tmp_path / "two.csv"
        two.write_text("a,b\n1,2\n3,4\n", encoding="utf-8")
        assert main(["diagnose", str(DATA), str(two), "--out", str(tmp_path / "c")]) == 3

    def test_diagnose_independent_columns(self, tmp_path):
        x = np.random.default_rng(3).random((100_000, 2))
        p = tmp_path / "ind.csv"
        p.write_text("a,b\n" + "".join(f"{float(u)!r},{float(v)!r}\n" for u, v in x), encoding="utf-8")
        assert main(["diagnose", str(p), "--out", str(tmp_path / "o")]) == 0
        last = [r for r in rows(tmp_path / "o" / "chi.csv") if r["level"].startswith("0.98999")]
        assert abs(float(last[0]["chi"]) - 0.01) < 0.01


class TestReproducibility:
    def test_rerun_from_manifest(self, tmp_path, generated):
        a = tmp_path / "a"
        assert main(["bootstrap", str(generated), "--out", str(a), "--seed", "99", "--m", "2000"]) == 0
        b = tmp_path / "b"
        assert main(["bootstrap", str(generated), "--config", str(a / "manifest.json"), "--out", str(b)]) == 0
        assert tree(a) == tree(b)

    def test_module_entry_point_exit_code(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "mgpboot", "generate", "--n", "0", "--out", str(tmp_path)],
                              capture_output=True, text=True)
        assert proc.returncode == 2
        assert "synthetic.n" in proc.stderr
