import numpy as np
import pytest

from rankgarch.cli import main, read_returns
from rankgarch.errors import InputFormatError

REF_PARAMS = "6.5e-6,0.177,0.716"


@pytest.fixture(scope="module")
def sim_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "path.csv"
    rc = main(["simulate", "--params", REF_PARAMS, "--n", "400", "--seed", "42", "-o", str(path)])
    assert rc == 0
    return path


class TestReadReturns:
    def test_plain_values(self, tmp_path):
        f = tmp_path / "a.csv"
        f.write_text("0.01\n-0.02\n\n0.005\n")
        x, checksum = read_returns(str(f))
        np.testing.assert_array_equal(x, [0.01, -0.02, 0.005])
        assert len(checksum) == 64

    def test_header_and_date_column(self, tmp_path):
        f = tmp_path / "b.csv"
        f.write_text("date,return\n2020-01-01,0.01\n2020-01-02,-0.02\n")
        x, _ = read_returns(str(f))
        np.testing.assert_array_equal(x, [0.01, -0.02])

    def test_empty_file_names_problem(self, tmp_path):
        f = tmp_path / "c.csv"
        f.write_text("")
        with pytest.raises(InputFormatError, match="no usable data rows"):
            read_returns(str(f))

    def test_bad_line_is_named(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("0.01\nnot-a-number\n0.02\n")
        with pytest.raises(InputFormatError, match="line 2"):
            read_returns(str(f))


class TestExitCodes:
    def test_fit_roundtrip_success(self, sim_csv, tmp_path):
        out = tmp_path / "fit.txt"
        assert main(["fit", str(sim_csv), "--score", "vdw", "-o", str(out)]) == 0
        text = out.read_text()
        assert text.startswith("# rankgarch")
        assert '"record": "fit"' in text

    def test_malformed_input_exits_1(self, tmp_path):
        f = tmp_path / "bad.csv"
        f.write_text("")
        assert main(["fit", str(f), "-o", str(tmp_path / "o.txt")]) == 1

    def test_invalid_df_exits_1(self, tmp_path):
        rc = main(
            ["simulate", "--params", REF_PARAMS, "--n", "10", "--dist", "t", "--df", "2",
             "-o", str(tmp_path / "x.csv")]
        )
        assert rc == 1

    def test_nonconvergence_exits_2_and_writes(self, sim_csv, tmp_path):
        out = tmp_path / "fit2.txt"
        rc = main(["fit", str(sim_csv), "--score", "vdw", "--iters", "1", "-o", str(out)])
        assert rc == 2
        assert '"converged": false' in out.read_text()

    def test_numerical_failure_exits_3(self, tmp_path):
        f = tmp_path / "zeros.csv"
        f.write_text("".join("0.0\n" for _ in range(50)))
        rc = main(["fit", str(f), "--score", "sign", "--init", "moment", "-o", str(tmp_path / "o.txt")])
        assert rc in (1, 3)  # degenerate series is caught as input or numerics
        rc = main(["fit", str(f), "--score", "qmle", "-o", str(tmp_path / "o2.txt")])
        assert rc in (1, 3)


class TestDeterminism:
    def test_simulate_bytes_stable(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for p in (a, b):
            assert main(["simulate", "--params", REF_PARAMS, "--n", "50", "--seed", "7", "-o", str(p)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_bootstrap_bytes_stable(self, sim_csv, tmp_path):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        for p in (a, b):
            rc = main(
                ["bootstrap", str(sim_csv), "--score", "sign", "--B", "30", "--kstar", "2",
                 "--seed", "5", "-o", str(p)]
            )
            assert rc == 0
        assert a.read_bytes() == b.read_bytes()

    def test_header_carries_checksum_and_seed(self, sim_csv, tmp_path):
        out = tmp_path / "fit.txt"
        main(["fit", str(sim_csv), "--seed", "11", "-o", str(out)])
        text = out.read_text()
        assert "# seed: 11" in text
        assert "# input-sha256: " in text and "input-sha256: -" not in text


class TestBootstrapCommand:
    def test_single_replicate_file_valid(self, sim_csv, tmp_path):
        out = tmp_path / "boot.txt"
        reps = tmp_path / "reps.csv"
        rc = main(
            ["bootstrap", str(sim_csv), "--score", "sign", "--B", "1", "--kstar", "1",
             "-o", str(out), "--replicates-out", str(reps)]
        )
        assert rc == 0
        assert "intervals-skipped" in out.read_text()
        body = [ln for ln in reps.read_text().splitlines() if not ln.startswith("#")]
        assert body[0] == "omega,alpha1,beta1"
        assert len(body) == 2

    def test_intervals_table(self, sim_csv, tmp_path):
        out = tmp_path / "boot.txt"
        rc = main(
            ["bootstrap", str(sim_csv), "--score", "sign", "--B", "40", "--kstar", "2",
             "--levels", "0.9", "-o", str(out)]
        )
        assert rc == 0
        lines = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
        assert lines[0] == "parameter,level,estimate,lower,upper"
        data = [ln.split(",") for ln in lines[1:4]]
        for row in data:
            assert float(row[3]) < float(row[2]) < float(row[4])


class TestConfigFile:
    def test_config_supplies_defaults_and_flags_override(self, sim_csv, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("score = sign\niters = 40\n")
        out1 = tmp_path / "o1.txt"
        assert main(["fit", str(sim_csv), "--config", str(cfg), "-o", str(out1)]) == 0
        assert '"score": "sign"' in out1.read_text()
        out2 = tmp_path / "o2.txt"
        assert main(["fit", str(sim_csv), "--config", str(cfg), "--score", "wilcoxon", "-o", str(out2)]) == 0
        assert '"score": "wilcoxon"' in out2.read_text()

    def test_malformed_config(self, sim_csv, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("score sign\n")
        assert main(["fit", str(sim_csv), "--config", str(cfg), "-o", "-"]) == 1


class TestStudyCommands:
    def test_benchmark_design(self, tmp_path):
        design = tmp_path / "bench.cfg"
        design.write_text(
            "theta0 = 6.5e-6, 0.177, 0.716\ndist = normal\nn = 250\nreps = 4\n"
            "estimators = qmle, vdw\nseed = 3\n"
        )
        out = tmp_path / "bench.csv"
        assert main(["benchmark", "--design-file", str(design), "-o", str(out)]) == 0
        text = out.read_text()
        assert "estimator,parameter,bias,mse,are,are_se,n_used" in text
        assert '"record": "benchmark-cell"' in text

    def test_benchmark_low_r_flagged_but_valid(self, tmp_path):
        design = tmp_path / "tiny.cfg"
        design.write_text("theta0 = 6.5e-6, 0.177, 0.716\nn = 250\nreps = 2\nestimators = qmle\nseed = 3\n")
        out = tmp_path / "tiny.csv"
        assert main(["benchmark", "--design-file", str(design), "-o", str(out)]) == 0
        assert '"replications": 2' in out.read_text()

    def test_coverage_design_and_flags(self, tmp_path):
        design = tmp_path / "cov.cfg"
        design.write_text(
            "theta0 = 6.5e-6, 0.177, 0.716\nn = 250\nreps = 3\nboot = 25\nscheme = u\n"
            "score = sign\nkstar = 2\nseed = 4\n"
        )
        out = tmp_path / "cov.csv"
        assert main(["coverage", "--design-file", str(design), "-o", str(out)]) == 0
        text = out.read_text()
        assert "level,parameter,coverage_pct,se_pct" in text
        assert "low-B" in text and "low-R" in text

    def test_threads_do_not_change_output(self, tmp_path):
        design = tmp_path / "bench.cfg"
        design.write_text(
            "theta0 = 6.5e-6, 0.177, 0.716\nn = 250\nreps = 4\nestimators = qmle, sign\nseed = 9\n"
        )
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["benchmark", "--design-file", str(design), "--threads", "1", "-o", str(a)]) == 0
        assert main(["benchmark", "--design-file", str(design), "--threads", "2", "-o", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestQqCommand:
    def test_pairs_file(self, sim_csv, tmp_path):
        out = tmp_path / "qq.csv"
        assert main(["qq", str(sim_csv), "--df", "4.01,6.01", "-o", str(out)]) == 0
        lines = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
        assert lines[0] == "df,theoretical,empirical"
        assert len(lines) == 1 + 2 * 400
