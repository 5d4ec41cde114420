import json

import numpy as np
import pytest

from ncdp.cli import main
from ncdp.geometry import make_etf
from ncdp.synth import ShiftModel, sample_dataset, save_features


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_etf_canonical(capsys):
    code, out, _ = run(capsys, "etf", "--p", "3", "--K", "2", "--canonical")
    assert code == 0
    doc = json.loads(out)
    assert np.asarray(doc["M"]).reshape(3, 2).tolist() == [[1, -1], [0, 0], [0, 0]]


def test_etf_random_needs_seed(capsys):
    assert run(capsys, "etf", "--p", "5", "--K", "3")[0] == 1
    assert run(capsys, "etf", "--p", "5", "--K", "3", "--seed", "4")[0] == 0


def test_etf_that_does_not_fit(capsys):
    code, _, err = run(capsys, "etf", "--p", "4", "--K", "5", "--canonical")
    assert code == 2 and "does not fit" in err


def test_bounds_perfect_nc(capsys):
    code, out, _ = run(capsys, "bounds", "--setting", "perfect-NC", "--gamma", "0.01", "--rho", "1")
    assert code == 0
    doc = json.loads(out)
    assert doc["sample_complexity"] == 5 and doc["order_level"]
    assert "\n" not in out.strip()


def test_bounds_epsilon_delta(capsys):
    code, out, _ = run(capsys, "bounds", "--setting", "noisygd", "--n", "100", "--p", "100",
                       "--beta", "0.1", "--epsilon", "7.786", "--delta", "1e-5")
    assert code == 0 and 0 < json.loads(out)["error_bound"] < 1e-3


def test_bounds_runtime_error_exit_code(capsys):
    code, _, err = run(capsys, "bounds", "--setting", "pca", "--p", "400", "--beta", "0.2",
                       "--beta0", "0.01", "--rho", "1", "--gamma", "0.01")
    assert code == 2 and "mitigation insufficient" in err


def test_simulate_without_seed(capsys):
    code, _, err = run(capsys, "simulate", "--p", "3", "--n", "4", "--rho", "1")
    assert code == 1 and "seed" in err


def test_simulate_json(capsys):
    code, out, _ = run(capsys, "simulate", "--p", "3", "--n", "4", "--rho", "0.125",
                       "--reparameterized", "--trials", "50", "--seed", "3")
    doc = json.loads(out)
    assert code == 0 and doc["trials"] == 50 and doc["scenario"]["n"] == 4


def test_unknown_flag_and_subcommand(capsys):
    assert run(capsys, "bounds", "--nope")[0] == 1
    assert run(capsys, "frobnicate")[0] == 1


def test_analyze_writes_report(tmp_path, capsys):
    d = sample_dataset(make_etf(6, 3, seed=0), 30, shift=ShiftModel.stochastic(0.1), seed=1)
    save_features(d, tmp_path / "x.csv")
    code, _, _ = run(capsys, "analyze", "--input", str(tmp_path / "x.csv"), "--out",
                     str(tmp_path / "r"), "--bins", "5")
    assert code == 0
    report = json.loads((tmp_path / "r" / "report.json").read_text())
    assert report["nc_flag"] and report["K"] == 3
    hist = (tmp_path / "r" / "beta_histogram.csv").read_text().splitlines()
    assert hist[0] == "bin_low,bin_high,count,class" and len(hist) == 1 + 4 * 5


def test_analyze_bad_file(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("label,f0\n0,nan\n")
    code, _, err = run(capsys, "analyze", "--input", str(tmp_path / "bad.csv"))
    assert code == 2 and ":2:" in err


def test_mitigate_pca_and_normalize(tmp_path, capsys):
    d = sample_dataset(make_etf(8, 2, canonical=True), 20, shift=ShiftModel.stochastic(0.1),
                       seed=2)
    save_features(d, tmp_path / "x.csv")
    code, out, _ = run(capsys, "mitigate", "--input", str(tmp_path / "x.csv"), "--method", "pca",
                       "--rank", "1", "--features-out", str(tmp_path / "z.csv"))
    assert code == 0 and json.loads(out)["r"] == 1
    assert (tmp_path / "z.csv").read_text().startswith("label,f0\n")
    code, out, _ = run(capsys, "mitigate", "--input", str(tmp_path / "x.csv"), "--method",
                       "normalize")
    assert code == 0 and json.loads(out)["sensitivity"] > 0
    assert run(capsys, "mitigate", "--input", str(tmp_path / "x.csv"), "--method", "pca",
               "--rank", "1", "--solver", "subspace")[0] == 1


def test_reproduce_requires_seed(capsys, tmp_path):
    assert run(capsys, "reproduce", "fig4a", "--out", str(tmp_path))[0] == 1


def test_reproduce_fig4a_csv(capsys, tmp_path):
    code, _, _ = run(capsys, "reproduce", "fig4a", "--trials", "3", "--seed", "7", "--out",
                     str(tmp_path), "--ps", "16")
    assert code == 0
    lines = (tmp_path / "fig4a.csv").read_text().splitlines()
    assert lines[0] == "curve,p,accuracy,stderr,trials"
    assert len(lines) == 6


def test_reproduce_is_bit_identical_across_workers(capsys, tmp_path):
    args = ["reproduce", "fig4a", "--trials", "20", "--seed", "3", "--ps", "16,64"]
    run(capsys, *args, "--out", str(tmp_path / "a"))
    run(capsys, *args, "--out", str(tmp_path / "b"), "--workers", "4")
    assert (tmp_path / "a" / "fig4a.csv").read_bytes() == (tmp_path / "b" / "fig4a.csv").read_bytes()
