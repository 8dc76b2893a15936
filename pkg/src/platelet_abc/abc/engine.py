"""Rejection ABC and simulated-annealing ABC.

Randomness is counter-based. Candidate ``i`` of a run with master seed ``s``
draws its prior sample from stream ``i`` at counter 0; in generation ``g`` of
SABC it uses counter ``g``. Within a (stream, counter) pair the lanes are:

* ``k`` (``k < dim``)            prior component ``k``
* ``2 (a * dim + k)``            normal for component ``k`` in proposal attempt ``a``
* ``SIM_LANE``                   seed handed to the simulator
* ``ACCEPT_LANE``                Metropolis acceptance uniform

so results never depend on evaluation order, batching or worker count.
"""

from __future__ import annotations

import numpy as np

from .. import rng as crng
from ..summaries.transform import SummaryTransform
from .prior import Prior
from .samples import AbcConfig, PosteriorSamples

SIM_LANE = 1 << 20
ACCEPT_LANE = SIM_LANE + 1


class AbcBudgetExhausted(RuntimeError):
    """No candidate was accepted within the simulation budget."""

    def __init__(self, message: str, min_distance: float, n_simulations: int):
        super().__init__(message)
        self.min_distance = min_distance
        self.n_simulations = n_simulations


class AbcSimulationError(RuntimeError):
    """A simulation failed; ``partial`` holds the population reached so far."""

    def __init__(self, message: str, partial: PosteriorSamples | None):
        super().__init__(message)
        self.partial = partial


# kernels ---------------------------------------------------------------

def exponential_kernel(d, epsilon):
    return np.exp(-np.asarray(d, dtype=float) / epsilon)


def indicator_kernel(d, epsilon):
    return (np.asarray(d, dtype=float) < epsilon).astype(float)


# distances -------------------------------------------------------------

def summary_distance(transform: SummaryTransform, x1, x2):
    """Euclidean distance between summaries; batches of ``x1`` give one distance per row."""
    s1 = transform.apply(x1)
    s2 = transform.apply(x2)
    return np.sqrt(((np.asarray(s1) - np.asarray(s2)) ** 2).sum(axis=-1))


def run_simulations(simulate, thetas, seeds, pool=None) -> np.ndarray:
    """Evaluate ``simulate(theta, seed)`` for every row.

    A simulator exposing ``batch(thetas, seeds)`` is called once for the whole
    set; otherwise calls go through ``pool.map`` when a pool is given.
    """
    thetas = np.atleast_2d(thetas)
    seeds = [int(s) for s in seeds]
    if len(seeds) == 0:
        return np.zeros((0, 0))
    batch = getattr(simulate, "batch", None)
    if batch is not None:
        return np.atleast_2d(np.asarray(batch(thetas, np.asarray(seeds, dtype=np.int64)), dtype=float))
    if pool is not None:
        chunk = max(1, len(seeds) // (4 * (getattr(pool, "_max_workers", None) or 1)))
        out = list(pool.map(simulate, list(thetas), seeds, chunksize=chunk))
    else:
        out = [simulate(t, s) for t, s in zip(thetas, seeds)]
    return np.array([np.atleast_1d(np.asarray(o, dtype=float)) for o in out])


def candidate_seeds(seed: int, indices, counter: int = 0) -> np.ndarray:
    return crng.derive_seeds(seed, np.asarray(indices), counter, SIM_LANE)


def evaluate_candidates(simulate, prior: Prior, transform: SummaryTransform, x_obs, seed: int,
                        indices, pool=None) -> tuple[np.ndarray, np.ndarray]:
    """Prior draws and distances for the given candidate indices (any order)."""
    indices = np.asarray(indices)
    thetas = prior.sample_streams(seed, indices, 0)
    X = run_simulations(simulate, thetas, candidate_seeds(seed, indices), pool)
    return thetas, summary_distance(transform, X, x_obs)


# rejection ABC -----------------------------------------------------------

def rejection_abc(simulate, prior: Prior, transform: SummaryTransform, x_obs, epsilon: float,
                  n_target: int, budget: int, seed: int, pool=None, batch_size: int = 1000,
                  observed_id: str | None = None) -> PosteriorSamples:
    """Accept prior draws whose simulated summaries fall within ``epsilon`` of the observation.

    Candidates are examined in index order in batches; the first ``n_target``
    accepted indices are kept. If the budget runs out first the result is flagged
    ``budget_exhausted``; with no acceptance at all ``AbcBudgetExhausted`` is
    raised carrying the smallest distance seen.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if n_target < 1 or budget < 1:
        raise ValueError("n_target and budget must be positive")
    acc_theta, acc_d = [], []
    n_acc, n_sim, dmin = 0, 0, np.inf
    while n_acc < n_target and n_sim < budget:
        idx = np.arange(n_sim, min(n_sim + batch_size, budget))
        thetas, d = evaluate_candidates(simulate, prior, transform, x_obs, seed, idx, pool)
        n_sim += idx.size
        dmin = min(dmin, float(d.min()))
        keep = d < epsilon
        acc_theta.append(thetas[keep])
        acc_d.append(d[keep])
        n_acc += int(keep.sum())
    if n_acc == 0:
        raise AbcBudgetExhausted(
            f"no acceptance in {n_sim} simulations (smallest distance {dmin:.6g})", dmin, n_sim)
    thetas = np.vstack(acc_theta)[:n_target]
    d = np.concatenate(acc_d)[:n_target]
    provenance = {
        "algorithm": "rejection",
        "epsilon": float(epsilon),
        "epsilon_schedule": [float(epsilon)],
        "seed": int(seed),
        "observed_id": observed_id,
        "n_simulations": int(n_sim),
        "acceptance_rate": n_acc / n_sim,
        "budget": int(budget),
        "budget_exhausted": bool(n_acc < n_target),
        "min_distance": dmin,
    }
    return PosteriorSamples(thetas, d, prior.names, provenance=provenance)


# simulated-annealing ABC -------------------------------------------------

def _proposal_chol(u: np.ndarray, weights: np.ndarray, factor: float) -> np.ndarray:
    dim = u.shape[1]
    if u.shape[0] < 2:
        cov = np.eye(dim) * 1e-6
    else:
        cov = factor * np.atleast_2d(np.cov(u, rowvar=False, aweights=weights))
    scale = np.maximum(np.diag(cov), 0.0)
    jitter = 1e-12 * max(scale.max(), 1e-300)
    for _ in range(40):
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(dim))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    return np.diag(np.sqrt(scale + jitter))


def propose(prior: Prior, u: np.ndarray, chol: np.ndarray, seed: int, generation: int,
            max_redraws: int = 1000) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian moves in inference coordinates, re-drawn until inside the prior box.

    Returns the proposals and a mask of particles that never produced an inside
    proposal (those keep their position).
    """
    n, dim = u.shape
    lo, hi = prior.inference_bounds()
    out = u.copy()
    pending = np.arange(n)
    for attempt in range(max_redraws):
        if pending.size == 0:
            break
        z = np.column_stack([
            crng.normals(seed, pending, generation, 2 * (attempt * dim + k)) for k in range(dim)
        ])
        cand = u[pending] + z @ chol.T
        # membership is judged in original units so that accepted points sit inside the box
        inside = prior.contains(prior.from_inference(cand)) & np.all((cand >= lo) & (cand <= hi), axis=1)
        out[pending[inside]] = cand[inside]
        pending = pending[~inside]
    stuck = np.zeros(n, dtype=bool)
    stuck[pending] = True
    return out, stuck


class DistanceEnergy:
    """Empirical prior CDF of the distance, used as the annealing energy.

    Distances are ranked against those of the prior population (linear
    interpolation between order statistics). Below the smallest prior distance
    the CDF is continued as ``(d / d_min) ** k`` with ``k`` the summary
    dimension, the small-distance behaviour of a ``k``-dimensional distance.
    Under the prior the energy is close to uniform whatever the dimension, so a
    quantile-based tolerance schedule shrinks geometrically.
    """

    def __init__(self, prior_distances, dim: int):
        d = np.sort(np.asarray(prior_distances, dtype=float))
        self.d = d
        self.u = np.arange(1, d.size + 1) / (d.size + 1)
        self.dim = max(int(dim), 1)

    def __call__(self, dist) -> np.ndarray:
        dist = np.asarray(dist, dtype=float)
        out = np.interp(dist, self.d, self.u, right=1.0)
        d0 = self.d[0]
        low = dist < d0
        if d0 > 0:
            out[low] = self.u[0] * (dist[low] / d0) ** self.dim
        else:
            out[low] = 0.0
        return out


def sabc(simulate, prior: Prior, transform: SummaryTransform, x_obs, config: AbcConfig,
         pool=None, observed_id: str | None = None) -> PosteriorSamples:
    """Annealed population ABC with an exponential (or indicator) kernel.

    The kernel acts on the energy ``u = F(d)``, the empirical CDF of the
    distance over the initial prior population (see ``DistanceEnergy``), so
    ``eps`` is a tolerance on the probability scale. Each generation every
    particle proposes a Gaussian move (covariance ``cov_factor`` times the
    population covariance, in inference coordinates), simulates it, and accepts
    with probability ``min(1, exp((u_old - u_new) / eps) * J)`` where ``J`` is
    the Jacobian of the log-scaled components. ``eps`` then shrinks to the
    ``quantile`` of the population energies. Once a generation has run at
    ``epsilon_min`` the run stops early.
    """
    config.validate()
    seed = int(config.seed)
    n = config.n_samples
    idx = np.arange(n)
    theta = prior.sample_streams(seed, idx, 0)
    weights = np.full(n, 1.0 / n)
    history: list = []

    def partial(d_now):
        prov = {"algorithm": "sabc", "seed": seed, "observed_id": observed_id, "history": history,
                "config": config.to_dict(), "complete": False}
        return PosteriorSamples(theta.copy(), d_now, prior.names, weights.copy(), prov)

    try:
        X = run_simulations(simulate, theta, candidate_seeds(seed, idx, 0), pool)
    except Exception as exc:
        raise AbcSimulationError(f"simulation failed in the initial population: {exc}", None) from exc
    d = summary_distance(transform, X, x_obs)
    n_sim = n
    energy = DistanceEnergy(d, np.size(transform.apply(np.asarray(x_obs, dtype=float))))
    e = energy(d)
    eps = float(config.epsilon0) if config.epsilon0 is not None else float(np.median(e))
    eps = max(eps, config.epsilon_min)
    schedule = [eps]
    history.append({"generation": 0, "epsilon": eps, "mean_distance": float(d.mean()),
                    "mean_energy": float(e.mean()), "acceptance_rate": None, "stuck": 0})

    stopped = None
    for g in range(1, config.n_iterations + 1):
        if g > 1 and eps <= config.epsilon_min:
            # the tolerance floor has been reached and the population moved at it: done
            stopped = g - 1
            break
        u = prior.to_inference(theta)
        chol = _proposal_chol(u, weights, config.cov_factor)
        prop_u, stuck = propose(prior, u, chol, seed, g, config.max_redraws)
        moving = np.flatnonzero(~stuck)
        prop = theta.copy()
        prop[moving] = prior.from_inference(prop_u[moving])
        d_new, e_new = d.copy(), e.copy()
        if moving.size:
            try:
                Xn = run_simulations(simulate, prop[moving], candidate_seeds(seed, moving, g), pool)
            except Exception as exc:
                raise AbcSimulationError(f"simulation failed in generation {g}: {exc}", partial(d)) from exc
            d_new[moving] = summary_distance(transform, Xn, x_obs)
            e_new[moving] = energy(d_new[moving])
            n_sim += moving.size
        log_j = prior.log_jacobian(prop_u) - prior.log_jacobian(u)
        if config.kernel == "exponential":
            log_a = (e - e_new) / eps + log_j
        else:
            log_a = np.where(e_new < eps, log_j, -np.inf)
        uacc = crng.uniforms(seed, idx, g, ACCEPT_LANE)
        accept = (np.log(np.maximum(uacc, 1e-300)) < log_a) & ~stuck
        theta[accept] = prop[accept]
        d[accept] = d_new[accept]
        e[accept] = e_new[accept]
        eps = min(eps, max(float(np.quantile(e, config.quantile)), config.epsilon_min))
        schedule.append(eps)
        history.append({"generation": g, "epsilon": eps, "mean_distance": float(d.mean()),
                        "mean_energy": float(e.mean()), "acceptance_rate": float(accept.mean()),
                        "stuck": int(stuck.sum())})

    provenance = {
        "algorithm": "sabc",
        "kernel": config.kernel,
        "seed": seed,
        "observed_id": observed_id,
        "epsilon_schedule": schedule,
        "final_epsilon": schedule[-1],
        "stopped_at_floor": stopped,
        "history": history,
        "n_simulations": int(n_sim),
        "config": config.to_dict(),
        "complete": True,
    }
    return PosteriorSamples(theta, d, prior.names, weights, provenance)
