"""End-to-end workflow: cohort, summaries, per-subject inference, analysis, report."""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import rng as crng
from ..abc.engine import run_simulations
from ..analysis.clustering import hierarchical_cluster, rand_index
from ..analysis.groups import boxplot_table, group_tests, pathology_test
from ..sim.simulator import DepositionSimulator
from ..summaries.lmnn import train_dssl
from ..summaries.neural import train_sasl, train_tlsl
from ..summaries.transform import SummaryTransform
from .cohort import CohortSpec, attach_truth, generate_synthetic_cohort, load_cohort, save_cohort, save_truth
from .inference import content_hash, run_inference_all, subject_config, subject_seed
from .predictive import PredictiveBands, posterior_predictive
from .report import PipelineReport, emit_report
from .runconfig import RunConfig

PILOT_STREAM = 7_000_001


@dataclass
class PipelineResult:
    report: PipelineReport
    records: list
    results: list
    transform: SummaryTransform
    new_simulations: int = 0
    timing: dict = field(default_factory=dict)


def _pool_map(fn, items, workers: int):
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


# cohort ------------------------------------------------------------------

def cohort_spec(cfg: RunConfig) -> CohortSpec:
    return CohortSpec(centers={g: cfg.centers[g] for g in cfg.groups}, config=cfg.sim, prior=cfg.prior,
                      n_per_group=cfg.n_per_group, jitter_sd=cfg.jitter_sd, seed=cfg.seed)


def prepare_cohort(cfg: RunConfig, out: Path | None) -> tuple[list, int]:
    """Load the configured cohort or synthesize one (reusing a stored copy with the same recipe)."""
    if cfg.cohort_path:
        return load_cohort(cfg.cohort_path, labels=cfg.groups), 0
    spec = cohort_spec(cfg)
    key = content_hash(spec.to_dict())
    if out is not None:
        meta = out / "cohort.json"
        if meta.exists() and json.loads(meta.read_text()).get("key") == key:
            records = load_cohort(out / "cohort.csv", labels=cfg.groups)
            attach_truth(records, out / "truth.json")
            return records, 0
    records = generate_synthetic_cohort(spec)
    if out is not None:
        save_cohort(records, out / "cohort.csv")
        save_truth(records, out / "truth.json")
        (out / "cohort.json").write_text(json.dumps({"key": key, "spec": spec.to_dict()}, indent=1) + "\n")
        # reload so that in-memory values match the persisted ones exactly
        records = load_cohort(out / "cohort.csv", labels=cfg.groups)
        attach_truth(records, out / "truth.json")
    return records, len(records)


# summaries ---------------------------------------------------------------

def pilot_set(cfg: RunConfig, n: int, workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Prior draws and their simulated traces under the run's simulator settings."""
    idx = np.arange(n)
    seed = crng.derive_seed(cfg.seed, PILOT_STREAM)
    thetas = cfg.prior.sample_streams(seed, idx, 0)
    seeds = crng.derive_seeds(seed, idx, 0, 1)
    sim = DepositionSimulator(cfg.sim)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            xs = run_simulations(sim, thetas, seeds, pool)
    else:
        xs = run_simulations(sim, thetas, seeds)
    return thetas, xs


def learn_summary(cfg: RunConfig, records, out: Path | None) -> tuple[SummaryTransform, int]:
    h = cfg.summary
    labels = [r.group for r in records]
    X = np.array([r.x for r in records])
    key = content_hash({"method": cfg.summary_method, "hyper": h, "sim": cfg.sim.to_dict(),
                        "prior": cfg.prior.to_dict(), "seed": cfg.seed,
                        "cohort": [r.content() for r in records] if cfg.summary_method in ("dssl", "scaled") else None})
    path = out / "transform.json" if out is not None else None
    if path is not None and path.exists():
        tr = SummaryTransform.load(path)
        if tr.provenance.get("key") == key:
            return tr, 0
    n_sim = 0
    seed = int(crng.derive_seed(cfg.seed, PILOT_STREAM, 1) % (2**31))
    if cfg.summary_method in ("sasl", "tlsl"):
        n_pilot = int(h.get("n_pilot", 2000))
        thetas, xs = pilot_set(cfg, n_pilot, cfg.workers)
        n_sim = n_pilot
        if cfg.summary_method == "sasl":
            tr = train_sasl(thetas, xs, epochs=int(h.get("epochs", 1000)), lr=float(h.get("lr", 1e-3)),
                            batch_size=int(h.get("batch_size", 16)), log_mask=cfg.prior.mask, seed=seed)
        else:
            tr = train_tlsl(thetas, xs, epochs=int(h.get("epochs", 2000)), lr=float(h.get("lr", 1e-3)),
                            batch_size=int(h.get("batch_size", 16)), log_mask=cfg.prior.mask, seed=seed)
    elif cfg.summary_method == "dssl":
        tr = train_dssl(X, labels, k=int(h.get("k", 3)), step=float(h.get("step", 1e-3)))
    elif cfg.summary_method == "identity":
        tr = SummaryTransform.identity(X.shape[1])
    else:
        sd = X.std(axis=0)
        tr = SummaryTransform.linear(np.diag(1.0 / np.where(sd > 0, sd, 1.0)),
                                     provenance={"method": "scaled"})
    tr.provenance["key"] = key
    if path is not None:
        tr.save(path)
        tr = SummaryTransform.load(path)
    return tr, n_sim


# predictive checks ---------------------------------------------------------

def _predictive_job(args):
    rec_content, post, sim_dict, n_draws, level, seed, cache = args
    times = sim_dict["obs_times"]
    from ..sim.model import SimConfig

    key = content_hash({"x": rec_content, "samples": post.samples, "weights": post.weights, "sim": sim_dict,
                        "n": n_draws, "level": level, "seed": seed})
    if cache is not None and Path(cache).exists():
        stored = json.loads(Path(cache).read_text())
        if stored.get("key") == key:
            draws = np.asarray(stored["draws"], dtype=float)
            return _bands_from_draws(draws, level, times), 0
    sim = DepositionSimulator(SimConfig.from_dict(sim_dict))
    bands = posterior_predictive(post, sim, n_draws, level, seed, times=times)
    if cache is not None:
        Path(cache).write_text(json.dumps({"key": key, "draws": bands.draws.tolist()}) + "\n")
    return bands, n_draws


def _bands_from_draws(draws, level, times) -> PredictiveBands:
    from ..analysis.stats import quantile

    Xr = draws.reshape(draws.shape[0], len(times), -1)
    a = (1 - level) / 2
    q = np.array([[quantile(Xr[:, i, k], [a, 0.5, 1 - a]) for k in range(Xr.shape[2])] for i in range(3)])
    return PredictiveBands(np.asarray(times, dtype=float), q[..., 0], q[..., 1], q[..., 2], level, draws)


# analysis ------------------------------------------------------------------

def most_separated_parameter(values, labels, names, healthy: str, disease: str) -> str:
    rep = group_tests(values, labels, names, group_order=(healthy, disease))
    return names[int(np.argmax(rep.H[:, 0]))]


def analyze(cfg: RunConfig, records, results, transform: SummaryTransform) -> PipelineReport:
    ok = [(r, res) for r, res in zip(records, results) if res.ok]
    failed = [res.id for res in results if not res.ok]
    names = cfg.prior.names
    ids = [r.id for r, _ in ok]
    groups = [r.group for r, _ in ok]
    table = np.array([res.map_estimate.theta for _, res in ok]).reshape(len(ok), len(names))
    report = PipelineReport(ids=ids, groups=groups, parameters=tuple(names), map_table=table, failed=failed)
    present = [g for g in cfg.groups if g in groups]
    if len(present) >= 2 and len(ok) >= 3:
        report.tests = group_tests(table, groups, names, group_order=present)
        report.boxplots = boxplot_table(table, groups, names, group_order=present)
    if cfg.healthy_group in groups and cfg.disease_group in groups:
        param = cfg.pathology_parameter or most_separated_parameter(
            table, groups, names, cfg.healthy_group, cfg.disease_group)
        j = list(names).index(param)
        report.pathology = pathology_test(table[:, j], groups, cfg.healthy_group, cfg.disease_group,
                                          parameter=param, ids=ids)
    if len(present) >= 2:
        k = len(present)
        X = np.array([r.x for r in records])
        all_groups = [r.group for r in records]
        report.rand_indices["summary"] = rand_index(all_groups, hierarchical_cluster(transform.apply(X), k))
        if len(ok) >= k:
            logt = np.log(np.maximum(table, 1e-300))
            z = (logt - logt.mean(0)) / np.where(logt.std(0) > 0, logt.std(0), 1.0)
            report.rand_indices["map"] = rand_index(groups, hierarchical_cluster(z, k))
    return report


# orchestration ---------------------------------------------------------------

def run_pipeline(cfg: RunConfig, out_dir=None, predictive: bool = True) -> PipelineResult:
    """Run every stage; intermediate results in ``out_dir`` are reused when still valid."""
    timing = {}
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "run.ini").write_text(cfg.to_ini())
    new_sims = 0

    t = time.perf_counter()
    records, n = prepare_cohort(cfg, out)
    new_sims += n
    timing["cohort"] = time.perf_counter() - t

    t = time.perf_counter()
    transform, n = learn_summary(cfg, records, out)
    new_sims += n
    timing["summary"] = time.perf_counter() - t

    t = time.perf_counter()
    results = run_inference_all(records, transform, cfg.prior, cfg.abc, cfg.sim, out_dir=out,
                                workers=cfg.workers, master_seed=cfg.seed, bandwidth=cfg.bandwidth)
    new_sims += sum(r.n_simulations for r in results)
    timing["inference"] = time.perf_counter() - t

    t = time.perf_counter()
    report = analyze(cfg, records, results, transform)
    if predictive and cfg.n_predictive > 0:
        jobs, which = [], []
        for rec, res in zip(records, results):
            if not res.ok:
                continue
            cache = str(out / "subjects" / rec.id / "predictive.json") if out is not None else None
            jobs.append((rec.content(), res.posterior, subject_config(cfg.sim, rec).to_dict(), cfg.n_predictive,
                         cfg.level, subject_seed(cfg.seed, rec.id + "/predictive"), cache))
            which.append(rec)
        for rec, (bands, n) in zip(which, _pool_map(_predictive_job, jobs, cfg.workers)):
            new_sims += n
            report.bands[rec.id] = (bands, rec.x)
            report.energy[rec.id] = bands.energy_scores(rec.x)
    timing["analysis"] = time.perf_counter() - t

    report.provenance = {
        # worker count is left out so that reports do not depend on it
        "run_config": cfg.to_ini(execution=False),
        "config_hash": content_hash(cfg.to_ini(execution=False)),
        "summary": {k: v for k, v in transform.provenance.items()
                    if k in ("method", "key", "final_loss", "loo_knn_accuracy", "epochs", "k")},
        "subjects": {
            res.id: {"final_epsilon": res.posterior.provenance.get("final_epsilon"),
                     "n_simulations": res.posterior.provenance.get("n_simulations"),
                     "map_converged": res.map_estimate.converged}
            for res in results if res.ok
        },
        "errors": {res.id: res.error.splitlines()[0] for res in results if not res.ok},
    }
    if out is not None:
        emit_report(report, out)
        (out / "timing.json").write_text(json.dumps({"seconds": timing, "new_simulations": new_sims,
                                                     "workers": cfg.workers},
                                                    indent=1) + "\n")
    return PipelineResult(report, records, results, transform, new_sims, timing)
