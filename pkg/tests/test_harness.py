import csv
import io
import json
import math

import numpy as np
import pytest

from ncdp.bounds import norm_cdf
from ncdp.harness import (CSV_HEADER, Scenario, Variant, curves_csv, fig4a_scenarios,
                          matching_bound, mc_error, mc_error_variants, run_fig4a, run_fig5,
                          run_preset, run_table1_grid)
from ncdp.synth import ShiftModel
from ncdp.trainer import TrainConfig

REP = TrainConfig(reparameterized=True)


def test_perfect_binary_matches_closed_form():
    scn = Scenario(p=3, K=2, n=4, rho=0.125, trainer=REP, trials=200_000, seed=1)
    res = mc_error(scn)
    assert abs(res.error_mean - norm_cdf(-1.0)) <= 3 * res.error_stderr
    assert res.bound["exact"] and res.bound["error_bound"] == pytest.approx(norm_cdf(-1.0))


def test_nonprivate_multiclass_is_exact():
    res = mc_error(Scenario(p=16, K=10, n=100, nonprivate=True, trials=50, seed=0))
    assert res.error_mean == 0.0 and res.accuracy_mean == 1.0


@pytest.mark.parametrize("scn", [
    Scenario(p=8, K=3, n=30, rho=0.05, trials=500, seed=3),
    Scenario(p=8, K=2, n=20, rho=0.5, train_shift=ShiftModel.stochastic(0.2), trials=12, seed=3,
             mitigation="pca", rank=2),
])
def test_thread_count_does_not_change_results(scn):
    a, b = mc_error(scn, workers=1), mc_error(scn, workers=4)
    np.testing.assert_array_equal(a.errors, b.errors)
    assert a.to_dict() == b.to_dict()


def test_fast_path_blocks_are_thread_independent(monkeypatch):
    import ncdp.harness as h
    monkeypatch.setattr(h, "_BLOCK_CELLS", 64)
    scn = Scenario(p=4, K=4, n=40, rho=0.1, trials=50, seed=2)
    np.testing.assert_array_equal(mc_error(scn, 1).errors, mc_error(scn, 3).errors)


def test_stderr_shrinks_like_root_two():
    base = dict(p=3, K=2, n=4, rho=0.125, trainer=REP, seed=5)
    small = mc_error(Scenario(**base, trials=20_000))
    big = mc_error(Scenario(**base, trials=40_000))
    ratio = big.error_stderr / small.error_stderr
    assert 1 / math.sqrt(2) - 0.1 <= ratio <= 1 / math.sqrt(2) + 0.1


def test_heavy_path_normalized_binary():
    # normalization leaves +-e1 unchanged; only the sensitivity grows to n/(n-1)
    scn = Scenario(p=3, K=2, n=4, rho=0.125, trainer=REP, mitigation="normalize",
                   trials=4000, seed=8)
    res = mc_error(scn)
    sigma = (4 / 3) / math.sqrt(0.25)
    assert abs(res.error_mean - norm_cdf(-2 / sigma)) <= 3 * res.error_stderr
    assert res.bound is None


def test_shared_draws_across_variants():
    scn = Scenario(p=20, K=2, n=40, rho=1.0, train_shift=ShiftModel.stochastic(0.2),
                   trials=6, seed=0)
    res = mc_error_variants(scn, [Variant(), Variant("pca", 1), Variant("pca", 2)])
    assert set(res) == {"none", "pca-r1", "pca-r2"}
    alone = mc_error(scn)
    np.testing.assert_array_equal(alone.errors, res["none"].errors)


def test_infeasible_mitigation():
    with pytest.raises(ValueError, match="infeasible"):
        Scenario(p=4, K=2, n=10, rho=1.0, mitigation="pca", rank=5)


@pytest.mark.parametrize("kw", [{}, {"rho": 1.0, "nonprivate": True},
                                {"epsilon": 1.0}, {"rho": 1.0, "epsilon": 1.0, "delta": 1e-5}])
def test_privacy_must_be_given_once(kw):
    with pytest.raises(ValueError):
        Scenario(p=4, K=2, n=10, **kw)


def test_epsilon_delta_resolution():
    scn = Scenario(p=4, K=2, n=10, epsilon=1.0, delta=1e-4)
    assert scn.resolved_rho == pytest.approx(0.025763, rel=1e-4)


def test_result_embeds_scenario_and_bound():
    scn = Scenario(p=16, K=2, n=32, rho=1.0, trainer=TrainConfig(loss="squared",
                   reparameterized=True), train_shift=ShiftModel.stochastic(
                   0.05, orthogonal_to_prototype=True), trials=20, seed=0)
    doc = mc_error(scn).to_dict()
    assert doc["scenario"]["train_shift"]["beta"] == 0.05
    assert doc["bound"]["formula_id"] == "noisygd-stochastic-independent"
    json.dumps(doc)


def test_matching_bound_for_multiclass_uses_sqrt2():
    b = matching_bound(Scenario(p=16, K=4, n=40, rho=1.0))
    assert b["extras"]["spread"] == "sqrt2"


def test_fig4a_smoke():
    rows = run_fig4a(trials=4, seed=1, ps=(16,), n=100)
    names = [r.curve for r in rows]
    assert names == ["default", "imbalance", "offset+imbalance", "perturbed-test",
                     "perturbed-test-uniform"]
    text = curves_csv(rows)
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    assert len(list(csv.reader(io.StringIO(text)))) == 6


def test_fig4a_uniform_option_drops_extra_curve():
    assert "perturbed-test-uniform" not in fig4a_scenarios(16, 2, 0, perturbation="uniform")
    with pytest.raises(ValueError):
        fig4a_scenarios(16, 2, 0, perturbation="nope")


def test_fig5_skips_ranks_above_p():
    rows = run_fig5(trials=2, seed=0, ps=(16,), ranks=(9, 50), n=60)
    assert [r.curve for r in rows] == ["none", "pca-r9"]


def test_table1_grid_contains_reference_cell():
    rows = run_table1_grid()
    hit = [r for r in rows if r["setting"] == "perfect-NC" and r["private"]
           and r["gamma"] == 0.01 and r["rho"] == 1.0]
    assert hit and all(r["sample_complexity"] == 5 for r in hit)


def test_run_preset_writes_files(tmp_path):
    (path,) = run_preset("table1-grid", tmp_path, seed=0)
    assert path.name == "table1.csv" and path.read_text().startswith("setting,private")
    files = run_preset("bound-dominance", tmp_path, seed=0, trials=200, ns=(8,), betas=(0.0,),
                       ps=(16,), perfect_K=(2,))
    assert {f.name for f in files} == {"bound_dominance.csv", "bound_dominance_summary.json"}
    with pytest.raises(ValueError, match="unknown preset"):
        run_preset("fig9", tmp_path, seed=0)
