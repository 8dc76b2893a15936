"""Per-subject inference with resumable on-disk results."""

from __future__ import annotations

import hashlib
import json
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import rng as crng
from ..abc.engine import sabc
from ..abc.prior import Prior
from ..abc.samples import AbcConfig, PosteriorSamples
from ..analysis.kde import DEFAULT_BANDWIDTH, MapEstimate, map_estimate
from ..sim.model import SimConfig
from ..sim.simulator import DepositionSimulator
from ..summaries.transform import SummaryTransform


def content_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=_default).encode()
    return hashlib.sha256(blob).hexdigest()


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(type(obj).__name__)


def subject_seed(master_seed: int, subject_id: str) -> int:
    """Seed of one subject's inference, independent of cohort order and worker count."""
    key = int.from_bytes(hashlib.sha256(subject_id.encode()).digest()[:7], "big")
    return crng.derive_seed(master_seed, key)


def subject_config(base: SimConfig, record) -> SimConfig:
    """Simulator configuration with the subject's own initial platelet densities."""
    return base.with_initial_densities(record.n_platelet_0, record.n_act_platelet_0)


@dataclass
class SubjectResult:
    id: str
    group: str
    posterior: PosteriorSamples | None
    map_estimate: MapEstimate | None
    n_simulations: int = 0
    resumed: bool = False
    error: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class InferenceJob:
    """Everything one worker needs for one subject (picklable)."""

    record_content: dict
    transform: dict
    prior: dict
    abc: dict
    sim: dict
    seed: int
    bandwidth: float = DEFAULT_BANDWIDTH

    def key(self) -> str:
        return content_hash({
            "record": self.record_content, "transform": self.transform, "prior": self.prior,
            "abc": self.abc, "sim": self.sim, "seed": self.seed, "bandwidth": self.bandwidth,
        })


def infer_subject(job: InferenceJob) -> tuple[PosteriorSamples, MapEstimate]:
    transform = SummaryTransform.from_dict(job.transform)
    prior = Prior.from_dict(job.prior)
    config = AbcConfig.from_dict({**job.abc, "seed": job.seed})
    simulator = DepositionSimulator(SimConfig.from_dict(job.sim))
    x_obs = np.asarray(job.record_content["x"], dtype=float)
    post = sabc(simulator, prior, transform, x_obs, config, observed_id=job.record_content["id"])
    est = map_estimate(post.samples, job.bandwidth, bounds=(prior.lo, prior.hi),
                       log_scale=prior.mask, names=prior.names)
    return post, est


def _subject_dir(out_dir, subject_id: str) -> Path:
    return Path(out_dir) / "subjects" / subject_id


def _load_done(path: Path, key: str):
    manifest = path / "manifest.json"
    if not manifest.exists():
        return None
    meta = json.loads(manifest.read_text())
    if meta.get("key") != key or meta.get("status") != "done":
        return None
    post = PosteriorSamples.load(path / "posterior.csv")
    est = MapEstimate.from_dict(json.loads((path / "map.json").read_text()))
    return post, est


def _save_done(path: Path, key: str, post: PosteriorSamples, est: MapEstimate) -> None:
    path.mkdir(parents=True, exist_ok=True)
    post.save(path / "posterior.csv")
    (path / "map.json").write_text(json.dumps(est.to_dict(), indent=1, sort_keys=True) + "\n")
    # written last: its presence marks a complete subject
    (path / "manifest.json").write_text(json.dumps({"key": key, "status": "done"}, indent=1) + "\n")


def _run_job(args):
    job, out_path = args
    try:
        post, est = infer_subject(job)
    except Exception as exc:  # isolate per-subject failures
        return None, None, f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}"
    if out_path is not None:
        _save_done(Path(out_path), job.key(), post, est)
    return post, est, None


def run_inference_all(records, transform: SummaryTransform, prior: Prior, abc_config: AbcConfig,
                      sim_config: SimConfig, out_dir=None, workers: int = 1, master_seed: int = 0,
                      bandwidth: float = DEFAULT_BANDWIDTH) -> list:
    """SABC posterior and MAP estimate for every record.

    Subjects whose results already sit in ``out_dir`` under the same content key
    are loaded instead of recomputed. Failures are reported per subject and do not
    stop the others. Results are attached to the records and returned in cohort
    order.
    """
    jobs = []
    for rec in records:
        jobs.append(InferenceJob(
            record_content=rec.content(), transform=transform.to_dict(), prior=prior.to_dict(),
            abc={k: v for k, v in abc_config.to_dict().items() if k != "seed"},
            sim=subject_config(sim_config, rec).to_dict(), seed=subject_seed(master_seed, rec.id),
            bandwidth=bandwidth,
        ))
    results: list = [None] * len(records)
    todo = []
    for i, (rec, job) in enumerate(zip(records, jobs)):
        path = _subject_dir(out_dir, rec.id) if out_dir is not None else None
        done = _load_done(path, job.key()) if path is not None else None
        if done is not None:
            results[i] = SubjectResult(rec.id, rec.group, done[0], done[1], 0, resumed=True)
        else:
            todo.append((i, job, str(path) if path is not None else None))

    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(_run_job, [(job, p) for _, job, p in todo]))
    else:
        outs = [_run_job((job, p)) for _, job, p in todo]

    for (i, _, _), (post, est, err) in zip(todo, outs):
        rec = records[i]
        n_sim = int(post.provenance.get("n_simulations", 0)) if post is not None else 0
        results[i] = SubjectResult(rec.id, rec.group, post, est, n_sim, error=err)

    for rec, res in zip(records, results):
        rec.posterior, rec.map_estimate = res.posterior, res.map_estimate
    return results
