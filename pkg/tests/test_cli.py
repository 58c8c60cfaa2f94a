import json
import os

import numpy as np
import pytest

from ropedist import LLAMA2, RopeConfig, base_theta, estimate_set
from ropedist.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, main
from ropedist.formats import plan_from_json


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def dprope_plan(tmp_path_factory):
    out = tmp_path_factory.mktemp("plan")
    assert main(["plan", "--method", "dprope", "--n-hat", "80", "--target-len", "8192", "--out", str(out)]) == 0
    return out


class TestEstimate:
    def test_trivial_config(self, tmp_path, capsys):
        code, _, _ = run(capsys, "estimate", "--head-dim", "2", "--pretrain-len", "1", "--out", str(tmp_path))
        assert code == EXIT_OK
        doc = json.loads((tmp_path / "histograms.json").read_text())
        (h,) = doc["histograms"]
        assert h["frequency"][0] == 1.0 and sum(h["frequency"]) == 1.0

    def test_dims_filter_csv(self, tmp_path, capsys):
        code, _, _ = run(capsys, "estimate", "--dims", "6,22", "--format", "csv", "--out", str(tmp_path))
        assert code == EXIT_OK
        lines = (tmp_path / "histograms.csv").read_text().splitlines()
        assert len(lines) == 1 + 2 * 360
        assert {l.split(",")[0] for l in lines[1:]} == {"6", "22"}

    def test_from_plan_file(self, tmp_path, capsys, dprope_plan):
        code, _, _ = run(capsys, "estimate", "--plan", str(dprope_plan / "plan.json"), "--out", str(tmp_path))
        assert code == EXIT_OK
        plan = plan_from_json((dprope_plan / "plan.json").read_text())
        ds = estimate_set(LLAMA2, plan.theta_hat, 8192, 360)
        doc = json.loads((tmp_path / "histograms.json").read_text())
        assert doc["length"] == 8192
        for h in doc["histograms"]:
            assert h["frequency"] == ds[h["dim_pair"]].freqs.tolist()

    def test_unwritable_output(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        code, _, err = run(capsys, "estimate", "--out", str(blocker / "sub"))
        assert code == EXIT_IO
        assert "I/O error" in err


class TestDisturbance:
    def test_headline_ours_lowest(self, tmp_path, capsys):
        code, out, _ = run(capsys, "disturbance", "--table3", "--out", str(tmp_path))
        assert code == EXIT_OK
        rows = {l.split()[0]: [float(v) for v in l.split()[1:]] for l in out.splitlines()[2:]}
        assert set(rows) == {"PI", "YaRN", "Ours"}
        for col in range(2):
            assert rows["Ours"][col] < min(rows["PI"][col], rows["YaRN"][col])
        doc = json.loads((tmp_path / "table3.json").read_text())
        assert len(doc["rows"]) == 6

    def test_plan_round_trip(self, tmp_path, capsys, dprope_plan):
        plan_doc = json.loads((dprope_plan / "plan.json").read_text())
        recorded = plan_doc["provenance"]["aggregate_disturbance"]
        code, out, _ = run(capsys, "disturbance", "--plan", str(dprope_plan / "plan.json"), "--out", str(tmp_path))
        assert code == EXIT_OK
        doc = json.loads((tmp_path / "disturbance.json").read_text())
        assert abs(doc["plan"]["aggregate_disturbance"] - recorded) <= 1e-12

    def test_csv_outputs(self, tmp_path, capsys):
        code, _, _ = run(capsys, "disturbance", "--method", "pi", "--target-len", "8192",
                         "--format", "csv", "--out", str(tmp_path))
        assert code == EXIT_OK
        assert len((tmp_path / "margins.csv").read_text().splitlines()) == 65
        assert (tmp_path / "plan_disturbance.csv").exists()

    def test_extrapolate_without_extension_rejected(self, tmp_path, capsys):
        code, _, err = run(capsys, "disturbance", "--method", "extrapolate", "--target-len", "4096",
                           "--out", str(tmp_path))
        assert code == EXIT_USAGE
        assert "target_len" in err

    def test_malformed_plan(self, tmp_path, capsys, dprope_plan):
        bad = tmp_path / "bad.json"
        bad.write_text((dprope_plan / "plan.json").read_text()[:-20])
        code, _, err = run(capsys, "disturbance", "--plan", str(bad), "--out", str(tmp_path))
        assert code == EXIT_USAGE
        assert "line" in err and "column" in err

    def test_plan_missing_field(self, tmp_path, capsys, dprope_plan):
        doc = json.loads((dprope_plan / "plan.json").read_text())
        del doc["per_pair"][3]["theta_hat"]
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        code, _, err = run(capsys, "disturbance", "--plan", str(bad), "--out", str(tmp_path))
        assert code == EXIT_USAGE
        assert "per_pair[3]" in err and "theta_hat" in err

    def test_missing_plan_file(self, tmp_path, capsys):
        code, _, _ = run(capsys, "disturbance", "--plan", str(tmp_path / "nope.json"))
        assert code == EXIT_IO


class TestPlan:
    def test_dprope_default_count(self, tmp_path, capsys):
        code, out, _ = run(capsys, "plan", "--method", "dprope", "--n-hat", "80", "--target-len", "8192",
                           "--out", str(tmp_path))
        assert code == EXIT_OK
        assert "interpolated_pairs=40" in out
        doc = json.loads((tmp_path / "plan.json").read_text())
        assert sum(p["strategy"] == "interpolate" for p in doc["per_pair"]) == 40
        flat = (tmp_path / "theta_hat.txt").read_text().splitlines()
        assert [float(v) for v in flat] == [p["theta_hat"] for p in doc["per_pair"]]

    def test_yarn_provenance(self, tmp_path, capsys):
        code, _, _ = run(capsys, "plan", "--method", "yarn", "--target-len", "8192", "--out", str(tmp_path))
        assert code == EXIT_OK
        prov = json.loads((tmp_path / "plan.json").read_text())["provenance"]
        assert prov["alpha"] == 1.0 and prov["beta"] == 32.0

    def test_pi_quarter(self, tmp_path, capsys):
        code, _, _ = run(capsys, "plan", "--method", "pi", "--target-len", "16384", "--out", str(tmp_path))
        assert code == EXIT_OK
        flat = np.array([float(v) for v in (tmp_path / "theta_hat.txt").read_text().split()])
        np.testing.assert_array_equal(flat, base_theta(LLAMA2).values / 4)

    def test_conflicting_t_and_n_hat(self, tmp_path, capsys):
        code, _, err = run(capsys, "plan", "--method", "dprope", "--t", "0", "--n-hat", "80",
                           "--target-len", "8192", "--out", str(tmp_path))
        assert code == EXIT_USAGE
        assert not (tmp_path / "plan.json").exists()

    def test_unknown_method(self, tmp_path, capsys):
        code, _, _ = run(capsys, "plan", "--method", "ntk", "--target-len", "8192", "--out", str(tmp_path))
        assert code == EXIT_USAGE

    def test_argparse_errors_exit_usage(self, capsys):
        assert run(capsys, "plan", "--target-len", "abc")[0] == EXIT_USAGE
        assert run(capsys, "nonsense")[0] == EXIT_USAGE

    def test_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"head_dim": 16, "pretrain_len": 256, "target_len": 1024,
                                   "method": "dprope", "t": 0.0, "bins": 90}))
        code, _, _ = run(capsys, "plan", "--config", str(cfg), "--out", str(tmp_path))
        assert code == EXIT_OK
        plan = plan_from_json((tmp_path / "plan.json").read_text())
        assert plan.config == RopeConfig(16, 10000.0, 256)
        assert plan.target_len == 1024 and plan.selection_params == {"t": 0.0}

    def test_config_file_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"head_dims": 16}))
        assert run(capsys, "plan", "--config", str(cfg))[0] == EXIT_USAGE

    def test_flag_overrides_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"method": "pi", "target_len": 8192}))
        code, out, _ = run(capsys, "plan", "--config", str(cfg), "--target-len", "16384", "--out", str(tmp_path))
        assert code == EXIT_OK
        assert json.loads((tmp_path / "plan.json").read_text())["target_len"] == 16384


class TestSweep:
    def test_b_axis(self, tmp_path, capsys):
        code, out, _ = run(capsys, "sweep", "--axis", "b", "--values", "90,180,360,720", "--n-hat", "80",
                           "--target-len", "8192", "--out", str(tmp_path))
        assert code == EXIT_OK
        lines = (tmp_path / "sweep_b.csv").read_text().splitlines()
        assert lines[0] == "b,aggregate_disturbance,n_interpolated_pairs"
        assert [l.split(",")[0] for l in lines[1:]] == ["90", "180", "360", "720"]
        assert out.splitlines() == lines

    def test_n_hat_axis(self, tmp_path, capsys):
        code, _, _ = run(capsys, "sweep", "--axis", "n_hat", "--values", "56,64,72,80,88,96",
                         "--target-len", "8192", "--out", str(tmp_path))
        assert code == EXIT_OK
        rows = [l.split(",") for l in (tmp_path / "sweep_n_hat.csv").read_text().splitlines()[1:]]
        assert len(rows) == 6
        assert [int(r[2]) for r in rows] == [28, 32, 36, 40, 44, 48]

    def test_t_zero_is_minimum(self, tmp_path, capsys):
        code, _, _ = run(capsys, "sweep", "--axis", "t", "--values", "0.5,0,0.05,1",
                         "--target-len", "8192", "--out", str(tmp_path))
        assert code == EXIT_OK
        rows = [l.split(",") for l in (tmp_path / "sweep_t.csv").read_text().splitlines()[1:]]
        aggs = {float(r[0]): float(r[1]) for r in rows}
        assert aggs[0.0] == min(aggs.values())

    def test_mixed_axes(self, tmp_path, capsys):
        code, _, err = run(capsys, "sweep", "--axis", "t", "--values", "0,1", "--n-hat", "80",
                           "--target-len", "8192", "--out", str(tmp_path))
        assert code == EXIT_USAGE
        assert not os.listdir(tmp_path)

    def test_empty_values(self, tmp_path, capsys):
        code, _, _ = run(capsys, "sweep", "--axis", "b", "--values", "", "--target-len", "8192",
                         "--out", str(tmp_path))
        assert code == EXIT_USAGE


class TestVerify:
    def test_base_passes(self, capsys):
        code, out, _ = run(capsys, "verify", "--trials", "200", "--seed", "1")
        assert code == EXIT_OK
        assert out.startswith("PASS base")

    def test_plan_passes(self, capsys, dprope_plan):
        code, out, _ = run(capsys, "verify", "--trials", "200", "--plan", str(dprope_plan / "plan.json"))
        assert code == EXIT_OK
        assert [l.split()[:2] for l in out.splitlines()] == [["PASS", "base:"], ["PASS", "dprope:"]]

    def test_dimension_mismatch(self, capsys, dprope_plan):
        code, _, err = run(capsys, "verify", "--head-dim", "64", "--plan", str(dprope_plan / "plan.json"))
        assert code == EXIT_USAGE
        assert "does not match" in err

    def test_trials_positive(self, capsys):
        assert run(capsys, "verify", "--trials", "0")[0] == EXIT_USAGE


class TestDeterminism:
    def test_plan_and_headline_byte_identical(self, tmp_path, capsys):
        outputs = []
        for k in range(2):
            d = tmp_path / str(k)
            d.mkdir()
            assert main(["plan", "--method", "dprope", "--target-len", "8192", "--out", str(d)]) == 0
            assert main(["disturbance", "--table3", "--out", str(d)]) == 0
            outputs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
        capsys.readouterr()
        assert set(outputs[0]) == {"plan.json", "theta_hat.txt", "table3.json"}
        assert outputs[0] == outputs[1]
