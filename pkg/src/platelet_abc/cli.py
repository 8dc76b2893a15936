"""Command-line entry point: ``platelet-abc <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import rng as crng
from .abc.engine import AbcBudgetExhausted, rejection_abc, run_simulations, sabc
from .abc.prior import Prior
from .abc.samples import AbcConfig, PosteriorSamples
from .analysis.groups import boxplot_table, group_tests, pathology_test
from .analysis.kde import DEFAULT_BANDWIDTH, map_estimate
from .pipeline.cohort import generate_synthetic_cohort, load_cohort, save_cohort, save_truth
from .pipeline.run import cohort_spec, run_pipeline
from .pipeline.runconfig import RunConfig
from .sim.io import read_trace, write_trace
from .sim.model import PARAM_NAMES, ModelParams, SimConfig
from .sim.simulator import DepositionSimulator, simulate
from .summaries.lmnn import train_dssl
from .summaries.neural import train_sasl, train_tlsl
from .summaries.transform import SummaryTransform

log = logging.getLogger("platelet_abc")

TRACE_COLUMNS = ("n_agg_20", "s_agg_20", "n_plt_20", "n_agg_120", "s_agg_120", "n_plt_120",
                 "n_agg_300", "s_agg_300", "n_plt_300")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def load_sim_config(path, preset: str = "desk") -> SimConfig:
    """JSON file of simulator settings; keys left out take the preset's values."""
    base = SimConfig.desk() if preset == "desk" else SimConfig()
    if not path:
        return base
    d = json.loads(Path(path).read_text())
    return SimConfig.from_dict({**base.to_dict(), **d}) if preset == "full" else SimConfig.desk(**d)


def _pool(workers: int):
    return ProcessPoolExecutor(max_workers=workers) if workers > 1 else nullcontext(None)


def _write_json(path, obj) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def read_map_table(path) -> tuple[list, list, tuple, np.ndarray]:
    """``id,group,<param>...`` CSV (as written by the pipeline)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["id", "group"]:
            raise ValueError(f"{path}: header must start with 'id,group'")
        ids, groups, rows = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            ids.append(row[0])
            groups.append(row[1])
            rows.append([float(v) for v in row[2:]])
    if not rows:
        raise ValueError(f"{path}: no records")
    return ids, groups, tuple(header[2:]), np.array(rows)


def read_pilot(path) -> tuple[np.ndarray, np.ndarray]:
    """Pilot CSV: seven parameter columns followed by the nine trace columns."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != PARAM_NAMES + TRACE_COLUMNS:
            raise ValueError(f"{path}: expected columns {','.join(PARAM_NAMES + TRACE_COLUMNS)}")
        arr = np.array([[float(v) for v in r] for r in reader if r])
    return arr[:, :7], arr[:, 7:]


def write_pilot(path, thetas, xs) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PARAM_NAMES + TRACE_COLUMNS)
        for t, x in zip(thetas, xs):
            w.writerow([repr(float(v)) for v in (*t, *x)])


# subcommands ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    params = ModelParams(**{n: getattr(args, n) for n in PARAM_NAMES})
    config = load_sim_config(args.config, args.preset)
    trace = simulate(params, config, args.seed)
    write_trace(args.out, trace, params, config, args.seed)
    log.info("wrote %s", args.out)
    return 0


def cmd_infer(args) -> int:
    trace = read_trace(args.observed)
    sidecar = Path(args.observed).with_suffix(".json")
    if args.config:
        config = load_sim_config(args.config, args.preset)
    elif sidecar.exists() and "config" in json.loads(sidecar.read_text()):
        config = SimConfig.from_dict(json.loads(sidecar.read_text())["config"])
    else:
        config = load_sim_config(None, args.preset)
    if np.isfinite(trace.n_act_platelet_0):
        config = config.with_initial_densities(trace.n_platelet_0, trace.n_act_platelet_0)
    prior = Prior.load(args.prior) if args.prior else Prior.default()
    transform = SummaryTransform.load(args.transform) if args.transform else SummaryTransform.identity(9)
    sim = DepositionSimulator(config)
    x_obs = trace.vector()
    with _pool(args.workers) as pool:
        if args.algorithm == "rejection":
            if args.epsilon is None:
                raise ValueError("--epsilon is required for rejection ABC")
            budget = args.budget or 1000 * args.n_samples
            post = rejection_abc(sim, prior, transform, x_obs, args.epsilon, args.n_samples, budget,
                                 args.seed, pool=pool, observed_id=str(args.observed))
        else:
            cfg = AbcConfig(n_samples=args.n_samples, n_iterations=args.n_iterations, epsilon0=args.epsilon,
                            budget=args.budget, seed=args.seed)
            post = sabc(sim, prior, transform, x_obs, cfg, pool=pool, observed_id=str(args.observed))
    post.save(args.out)
    log.info("wrote %d samples to %s", len(post), args.out)
    return 0 if not post.provenance.get("budget_exhausted") else 1


def cmd_learn_summary(args) -> int:
    if args.method == "dssl":
        if not args.input:
            raise ValueError("--input cohort file is required for dssl")
        records = load_cohort(args.input)
        X = np.array([r.x for r in records])
        tr = train_dssl(X, [r.group for r in records], k=args.k, step=args.step, max_iter=args.max_iter,
                        margin=args.margin, printed_sign=args.printed_sign)
    else:
        prior = Prior.load(args.prior) if args.prior else Prior.default()
        if args.input:
            thetas, xs = read_pilot(args.input)
        else:
            config = load_sim_config(args.config, args.preset)
            idx = np.arange(args.n_pilot)
            thetas = prior.sample_streams(args.seed, idx, 0)
            with _pool(args.workers) as pool:
                xs = run_simulations(DepositionSimulator(config), thetas, crng.derive_seeds(args.seed, idx, 0, 1),
                                     pool)
            if args.save_pilot:
                write_pilot(args.save_pilot, thetas, xs)
        train = train_sasl if args.method == "sasl" else train_tlsl
        kw = dict(lr=args.lr, batch_size=args.batch_size, log_mask=prior.mask, seed=args.seed)
        if args.epochs is not None:
            kw["epochs"] = args.epochs
        if args.method == "tlsl":
            kw["margin"] = args.margin
        tr = train(thetas, xs, **kw)
    tr.save(args.out)
    log.info("wrote %s transform to %s", args.method, args.out)
    return 0


def cmd_map(args) -> int:
    post = PosteriorSamples.load(args.posterior)
    prior = Prior.load(args.prior) if args.prior else None
    est = map_estimate(post.samples, args.bandwidth,
                       bounds=(prior.lo, prior.hi) if prior is not None else None,
                       log_scale=prior.mask if prior is not None else None, names=post.names)
    _write_json(args.out, est.to_dict())
    return 0 if est.converged else 1


def cmd_analyze(args) -> int:
    ids, groups, names, table = read_map_table(args.table)
    order = tuple(g.strip() for g in args.groups.split(",")) if args.groups else None
    rep = group_tests(table, groups, names, group_order=order)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "test_report.csv").write_text(rep.to_csv())
    _write_json(out / "test_report.json", rep.to_dict())
    _write_json(out / "boxplot_stats.json", boxplot_table(table, groups, names, group_order=order))
    for comp in rep.comparisons:
        log.info("%s: flagged %s", comp, ", ".join(rep.flagged(comp)) or "none")
    return 0


def cmd_pathology(args) -> int:
    ids, groups, names, table = read_map_table(args.table)
    if args.parameter not in names:
        raise ValueError(f"unknown parameter {args.parameter!r}; table has {', '.join(names)}")
    j = names.index(args.parameter)
    res = pathology_test(table[:, j], groups, args.healthy, args.disease, parameter=args.parameter, ids=ids)
    _write_json(args.out, res.to_dict())
    return 0


def _run_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    return cfg.replace(**changes) if changes else cfg


def cmd_generate_cohort(args) -> int:
    cfg = _run_config(args)
    records = generate_synthetic_cohort(cohort_spec(cfg))
    save_cohort(records, args.out)
    save_truth(records, Path(args.out).with_suffix(".truth.json"))
    log.info("wrote %d subjects to %s", len(records), args.out)
    return 0


def cmd_run_pipeline(args) -> int:
    cfg = _run_config(args)
    res = run_pipeline(cfg, args.out_dir, predictive=not args.no_predictive)
    rep = res.report
    for sid in rep.failed:
        log.error("subject %s failed: %s", sid, rep.provenance["errors"].get(sid, ""))
    if rep.tests is not None:
        log.info("omnibus flags: %s", ", ".join(rep.tests.flagged("omnibus")) or "none")
    if rep.pathology is not None:
        log.info("pathology test on %s: sensitivity %.3f, specificity %.3f", rep.pathology.parameter,
                 rep.pathology.sensitivity, rep.pathology.specificity)
    return 0 if rep.complete else 1


# parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="platelet-abc", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def sim_opts(sp):
        sp.add_argument("--config", help="JSON file of simulator settings")
        sp.add_argument("--preset", choices=("desk", "full"), default="desk",
                        help="defaults for keys missing from --config")

    s = sub.add_parser("simulate", help="simulate one deposition trace")
    for n in PARAM_NAMES:
        s.add_argument(_flag(n), dest=n, type=float, required=True)
    sim_opts(s)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="trace CSV (a JSON sidecar is written next to it)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("infer", help="ABC posterior for one observed trace")
    s.add_argument("--observed", required=True)
    s.add_argument("--prior", help="prior JSON (default: the built-in box)")
    s.add_argument("--transform", help="summary transform JSON (default: identity)")
    s.add_argument("--algorithm", choices=("rejection", "sabc"), default="sabc")
    s.add_argument("--n-samples", type=int, default=510)
    s.add_argument("--n-iterations", type=int, default=20)
    s.add_argument("--epsilon", type=float,
                   help="rejection distance threshold, or initial SABC tolerance on the 0-1 energy scale")
    s.add_argument("--budget", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    sim_opts(s)
    s.add_argument("--out", required=True, help="posterior CSV")
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("learn-summary", help="train a summary transform")
    s.add_argument("--method", choices=("dssl", "sasl", "tlsl"), required=True)
    s.add_argument("--input", help="cohort CSV (dssl) or pilot CSV (sasl/tlsl)")
    s.add_argument("--prior", help="prior JSON used to draw a pilot set")
    s.add_argument("--n-pilot", type=int, default=255)
    s.add_argument("--save-pilot", help="write the simulated pilot set here")
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--step", type=float, default=1e-3)
    s.add_argument("--max-iter", type=int, default=500)
    s.add_argument("--margin", type=float, default=1.0)
    s.add_argument("--printed-sign", action="store_true", help="use the plus-signed impostor term")
    s.add_argument("--epochs", type=int)
    s.add_argument("--lr", type=float, default=1e-3)
    s.add_argument("--batch-size", type=int, default=16)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    sim_opts(s)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_learn_summary)

    s = sub.add_parser("map", help="MAP estimate from posterior samples")
    s.add_argument("--posterior", required=True)
    s.add_argument("--prior", help="prior JSON (box constraint and log-scaled coordinates)")
    s.add_argument("--bandwidth", type=float, default=DEFAULT_BANDWIDTH)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_map)

    s = sub.add_parser("analyze", help="group tests and boxplot statistics on a MAP table")
    s.add_argument("--table", required=True, help="CSV with id,group,<parameters>")
    s.add_argument("--groups", help="comma-separated group order")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("pathology-test", help="median-distance classifier on one parameter")
    s.add_argument("--table", required=True)
    s.add_argument("--parameter", required=True)
    s.add_argument("--healthy", default="healthy")
    s.add_argument("--disease", default="copd")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_pathology)

    s = sub.add_parser("generate-cohort", help="simulate a synthetic labelled cohort")
    s.add_argument("--config", help="run configuration (INI)")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_generate_cohort)

    s = sub.add_parser("run-pipeline", help="cohort, summaries, inference and report")
    s.add_argument("--config", help="run configuration (INI)")
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--no-predictive", action="store_true", help="skip posterior predictive checks")
    s.set_defaults(func=cmd_run_pipeline)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except AbcBudgetExhausted as exc:
        log.error("%s (smallest distance %.6g after %d simulations)", exc, exc.min_distance, exc.n_simulations)
        return 1
    except (ValueError, OSError, KeyError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
