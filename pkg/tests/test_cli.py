import json
import subprocess
import sys

import numpy as np
import pytest

from platelet_abc.abc import PosteriorSamples, Prior
from platelet_abc.cli import main, read_pilot
from platelet_abc.sim.io import read_trace
from platelet_abc.sim.model import PARAM_NAMES
from platelet_abc.summaries import SummaryTransform

THETA = dict(p_ad=0.05, p_ag=0.03, p_t=0.01, p_f=0.02, a_t=1.5, v_z_ap=2e-5, v_z_nap=2e-5)
SMALL = dict(lx=1e-4, ly=1e-4, lz=2e-4, dt=2.0, particle_scale=1.0, ap_density=50000.0)


@pytest.fixture
def files(tmp_path):
    (tmp_path / "sim.json").write_text(json.dumps(SMALL))
    base = np.array(list(THETA.values()))
    Prior(tuple(base / 4), tuple(base * 4), PARAM_NAMES, (True,) * 7).save(tmp_path / "prior.json")
    return tmp_path


def theta_args():
    out = []
    for k, v in THETA.items():
        out += ["--" + k.replace("_", "-"), str(v)]
    return out


def test_help_runs_as_module():
    out = subprocess.run([sys.executable, "-m", "platelet_abc.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("simulate", "infer", "learn-summary", "map", "analyze", "pathology-test",
                "generate-cohort", "run-pipeline"):
        assert cmd in out.stdout


def test_simulate_infer_map_chain(files):
    trace = files / "obs.csv"
    assert main(["simulate", *theta_args(), "--config", str(files / "sim.json"), "--seed", "4",
                 "--out", str(trace)]) == 0
    assert read_trace(trace).vector().shape == (9,)
    post = files / "post.csv"
    assert main(["infer", "--observed", str(trace), "--prior", str(files / "prior.json"),
                 "--n-samples", "12", "--n-iterations", "2", "--seed", "1", "--out", str(post)]) == 0
    samples = PosteriorSamples.load(post)
    assert len(samples) == 12 and samples.provenance["algorithm"] == "sabc"
    out = files / "map.json"
    code = main(["map", "--posterior", str(post), "--prior", str(files / "prior.json"), "--out", str(out)])
    est = json.loads(out.read_text())
    assert code == (0 if est["converged"] else 1)
    assert len(est["theta"]) == 7


def test_infer_rejection_budget_exhausted(files):
    trace = files / "obs.csv"
    main(["simulate", *theta_args(), "--config", str(files / "sim.json"), "--out", str(trace)])
    args = ["infer", "--observed", str(trace), "--prior", str(files / "prior.json"), "--algorithm",
            "rejection", "--n-samples", "5", "--budget", "5", "--out", str(files / "p.csv")]
    assert main(args + ["--epsilon", "1e-9"]) == 1
    assert main(args) == 2  # rejection needs an explicit epsilon


def test_learn_summary_pilot_and_dssl(files):
    pilot = files / "pilot.csv"
    out = files / "sasl.json"
    assert main(["learn-summary", "--method", "sasl", "--prior", str(files / "prior.json"),
                 "--config", str(files / "sim.json"), "--n-pilot", "24", "--epochs", "2",
                 "--save-pilot", str(pilot), "--out", str(out)]) == 0
    thetas, xs = read_pilot(pilot)
    assert thetas.shape == (24, 7) and xs.shape == (24, 9)
    tr = SummaryTransform.load(out)
    assert tr.apply(xs).shape == (24, 7)
    assert main(["learn-summary", "--method", "tlsl", "--input", str(pilot), "--epochs", "1",
                 "--out", str(files / "tlsl.json")]) == 0

    cfg = files / "run.ini"
    cfg.write_text("[run]\nseed = 2\n[cohort]\nn_per_group = 4\nbase = " + ", ".join(map(str, THETA.values()))
                   + "\nfactor.copd = p_ag:3\n[sim]\n" + "".join(f"{k} = {v}\n" for k, v in SMALL.items())
                   + "[prior]\nlower = " + ", ".join(str(v / 4) for v in THETA.values())
                   + "\nupper = " + ", ".join(str(v * 4) for v in THETA.values())
                   + "\nlog_scale = " + ", ".join(PARAM_NAMES) + "\n")
    cohort = files / "cohort.csv"
    assert main(["generate-cohort", "--config", str(cfg), "--out", str(cohort)]) == 0
    assert (files / "cohort.truth.json").exists()
    assert len(cohort.read_text().splitlines()) == 13
    assert main(["learn-summary", "--method", "dssl", "--input", str(cohort), "--k", "2", "--max-iter", "20",
                 "--out", str(files / "dssl.json")]) == 0
    assert SummaryTransform.load(files / "dssl.json").provenance["method"] == "dssl"


def test_analyze_and_pathology(files, capsys):
    table = files / "maps.csv"
    rows = ["id,group,a,b"]
    vals = [(1, 5), (2, 6), (3, 7), (10, 5.5), (11, 6.5), (12, 7.5), (1.5, 5.2), (2.5, 6.2), (3.5, 7.1)]
    groups = ["healthy"] * 3 + ["copd"] * 3 + ["dialysis"] * 3
    rows += [f"s{i},{g},{a},{b}" for i, (g, (a, b)) in enumerate(zip(groups, vals))]
    table.write_text("\n".join(rows) + "\n")
    assert main(["analyze", "--table", str(table), "--groups", "healthy,dialysis,copd",
                 "--out-dir", str(files / "an")]) == 0
    rep = json.loads((files / "an" / "test_report.json").read_text())
    assert set(rep["comparisons"]) == {"omnibus", "healthy_vs_dialysis", "healthy_vs_copd", "dialysis_vs_copd"}
    assert (files / "an" / "boxplot_stats.json").exists()
    capsys.readouterr()
    assert main(["pathology-test", "--table", str(table), "--parameter", "a"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["sensitivity"] == 1.0 and res["specificity"] == 1.0
    assert main(["pathology-test", "--table", str(table), "--parameter", "zz"]) == 2


def test_bad_inputs_exit_two(files):
    (files / "empty.csv").write_text("id,group,a\n")
    assert main(["analyze", "--table", str(files / "empty.csv"), "--out-dir", str(files / "x")]) == 2
    assert main(["map", "--posterior", str(files / "missing.csv")]) == 2


def test_run_pipeline_cli(files):
    cfg = files / "run.ini"
    cfg.write_text("[run]\nseed = 1\n[cohort]\nn_per_group = 2\nbase = " + ", ".join(map(str, THETA.values()))
                   + "\n[sim]\n" + "".join(f"{k} = {v}\n" for k, v in SMALL.items())
                   + "[abc]\nn_samples = 8\nn_iterations = 1\n"
                   + "[prior]\nlower = " + ", ".join(str(v / 4) for v in THETA.values())
                   + "\nupper = " + ", ".join(str(v * 4) for v in THETA.values())
                   + "\nlog_scale = " + ", ".join(PARAM_NAMES) + "\n"
                   + "[summary]\nmethod = scaled\n[analysis]\nn_predictive = 4\n")
    assert main(["run-pipeline", "--config", str(cfg), "--out-dir", str(files / "run")]) == 0
    assert (files / "run" / "report.json").exists()
