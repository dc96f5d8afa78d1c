import numpy as np
import pytest

from hyperembed.model import ModelConfig
from hyperembed.simgen import GenSpec
from hyperembed.studies import format_table, run_ego, run_replicate, run_study, summarize

QUICK = ModelConfig(r=3, beta=3.0).with_(max_iter=40)


def test_replicate_runs_every_method():
    rep = run_replicate(GenSpec(study=2, n=40, seed=1), config=QUICK, lambda_grid=(1e-3,),
                        delta_grid=(0.1,))
    assert set(rep.results) == {"PLE", "HLE", "JLE", "AugJLE"} and not rep.errors
    aug = rep.results["AugJLE"]
    assert aug.lam == rep.results["JLE"].lam and aug.delta == 0.1
    assert {"pair_test", "pair_A1", "pair_A2", "hyper_test"} <= set(aug.report.auc)


def test_replicate_records_failures():
    rep = run_replicate(GenSpec(study=1, n=40, seed=1), methods=("PLE",), config=QUICK,
                        lambda_grid=())
    assert "PLE" in rep.errors and not rep.results


def test_summary_and_table():
    reps = run_study(1, 40, [0, 1], methods=("PLE", "JLE"), config=QUICK, lambda_grid=(1e-3,))
    summary = summarize(reps, ["pair_test"])
    mean, sd, count = summary[("JLE", "pair_test")]
    values = [r.results["JLE"].report.auc["pair_test"] for r in reps]
    assert count == 2 and mean == pytest.approx(np.mean(values))
    assert sd == pytest.approx(np.std(values, ddof=1))
    table = format_table(summary, ("PLE", "JLE"), ["pair_test"])
    assert table.splitlines()[0].split() == ["set", "PLE", "JLE"]
    assert "(" in table
    assert "(" not in format_table(summary, ("PLE", "JLE"), ["pair_test"], show_sd=False)


def test_ego_pipeline_on_synthetic_files(tmp_path):
    rng = np.random.default_rng(0)
    n = 60
    groups = [np.arange(k * 12, (k + 1) * 12) for k in range(5)]
    lines = []
    for a in range(n):
        for b in range(a + 1, n):
            same = a // 12 == b // 12
            if rng.uniform() < (0.7 if same else 0.05):
                lines.append(f"{a + 1000} {b + 1000}")
    (tmp_path / "7.edges").write_text("\n".join(lines) + "\n")
    circles = [f"circle{k}\t" + " ".join(str(v + 1000) for v in g) for k, g in enumerate(groups)]
    circles.append("everyone\t" + " ".join(str(v + 1000) for v in range(n)))
    (tmp_path / "7.circles").write_text("\n".join(circles) + "\n")
    results, info = run_ego(tmp_path / "7.edges", tmp_path / "7.circles",
                            config=ModelConfig(r=3, beta=3.0).with_(max_iter=800),
                            lambda_grid=(1e-3,), delta_grid=(0.2,), hyper_train=80,
                            hyper_valid=40, test_size=100)
    assert info["circles"] == 5 and info["n"] == n
    assert set(results) == {"PLE", "HLE", "JLE", "AugJLE"}
    assert results["JLE"]["pair_test"] > 0.7
    assert set(results["JLE"]) == {"pair_test", "lambda", "hyper6_test", "hyper10_test"}
