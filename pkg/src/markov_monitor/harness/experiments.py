"""Experiment sweeps: cost sweep, uniform-interval sweep, random-chain study,
learning trace and the absorbing-chain (greedy pathology) replication.

Each episode draws its own state path from ``(seed, episode)`` (plus the
trial index in the random study).  All policies and all grid points of a
sweep replay the same paths, so comparisons use common random numbers.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..chain import ChainSpec, absorbing_chain, random_chain, sample_path, stationary_distribution
from ..errors import ConfigError, NoConvergence
from ..learning import PSGDGreedyPolicy, learn_from_periodic_queries
from ..planner import policy_iteration
from ..policies import (HOLD_LAST, OPTIMAL, GreedyPolicy, Policy, PolicyConfig, StationaryPolicy,
                        ThresholdPolicy, UniformPolicy)
from .config import ExperimentConfig
from .simulate import episode_rng, simulate_path

log = logging.getLogger(__name__)

COST_SWEEP_COLUMNS = ("c", "policy", "gamma", "stderr", "queries_per_slot")
UNIFORM_SWEEP_COLUMNS = ("delta", "variant", "gamma", "stderr")
RANDOM_STUDY_COLUMNS = ("trial", "policy", "gamma")
LEARN_COLUMNS = ("update", "frobenius_dist", "eta")
THM1_COLUMNS = ("policy", "horizon", "gamma", "stderr")


@dataclass
class Estimate:
    """Across-episode summary of realized average costs."""

    gammas: np.ndarray
    queries_per_slot: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.gammas))

    @property
    def stderr(self) -> float:
        n = len(self.gammas)
        if n < 2:
            return float("nan")
        return float(np.std(self.gammas, ddof=1) / np.sqrt(n))

    @property
    def qps(self) -> float:
        return float(np.mean(self.queries_per_slot))


def build_policies(names, chain: ChainSpec, c: float, N: int, interval: int = 2,
                   thresholds=None, plan=None) -> dict[str, Policy]:
    """Instantiate the named policies for one chain and query cost.

    ``stationary`` is skipped (with a warning) when the chain has no unique
    stationary distribution.
    """
    K = chain.num_states
    horizon = max(N, max(thresholds) if thresholds else 1)
    table = chain.table(horizon)
    cfg = PolicyConfig(c, N, interval)
    out: dict[str, Policy] = {}
    for name in names:
        if name == "optimal":
            sol = plan or policy_iteration(table, chain.loss, c, N)
            out[name] = ThresholdPolicy(sol.thresholds, table, chain.loss, name="optimal")
        elif name == "greedy":
            out[name] = GreedyPolicy(table, chain.loss, cfg)
        elif name == "stationary":
            try:
                pi = stationary_distribution(chain)
            except NoConvergence as exc:
                log.warning("skipping stationary policy: %s", exc)
                continue
            out[name] = StationaryPolicy(pi, chain.loss, cfg)
        elif name == "psgd-greedy":
            out[name] = PSGDGreedyPolicy(K, chain.loss, cfg)
        elif name == "uniform":
            out[name] = UniformPolicy(cfg, OPTIMAL, table, chain.loss)
        elif name == "uniform-np":
            out[name] = UniformPolicy(cfg, HOLD_LAST)
        elif name == "threshold":
            if thresholds is None:
                raise ConfigError("policy 'threshold' needs a thresholds list")
            out[name] = ThresholdPolicy(thresholds, table, chain.loss)
        else:
            raise ConfigError(f"unknown policy {name!r}")
    return out


def _episode_task(args):
    """Run every (grid key, policy) pair on one episode's path."""
    chain, grid, N, horizon, start, key = args
    path = sample_path(chain, start, horizon, episode_rng(*key))
    out = {}
    for gkey, (c, policies) in grid.items():
        for name, pol in policies.items():
            ledger, _ = simulate_path(path, chain.loss, pol, c, N)
            out[(gkey, name)] = (ledger.average, ledger.queries_per_slot)
    return out


def _map(fn, items, workers: int):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def run_grid(chain: ChainSpec, grid: dict, N: int, horizon: int, episodes: int, seed: int,
             start: int = 0, key_prefix: tuple = (), workers: int = 1) -> dict:
    """Evaluate ``grid = {gkey: (c, {name: policy})}`` over common episode paths.

    Returns ``{(gkey, name): Estimate}``.
    """
    tasks = [(chain, grid, N, horizon, start, (seed, *key_prefix, e)) for e in range(episodes)]
    results = _map(_episode_task, tasks, workers)
    out = {}
    for gkey, (_, policies) in grid.items():
        for name in policies:
            vals = np.array([r[(gkey, name)] for r in results])
            out[(gkey, name)] = Estimate(vals[:, 0], vals[:, 1])
    return out


def evaluate_policies(chain: ChainSpec, policies: dict, c: float, N: int, horizon: int, episodes: int,
                      seed: int, start: int = 0, workers: int = 1, key_prefix: tuple = ()) -> dict[str, Estimate]:
    res = run_grid(chain, {0: (c, policies)}, N, horizon, episodes, seed, start, key_prefix, workers)
    return {name: est for (_, name), est in res.items()}


def _require_chain(cfg: ExperimentConfig) -> ChainSpec:
    if cfg.transition is None:
        raise ConfigError("this experiment needs an inline or preset chain, not random chains")
    return cfg.chain()


def run_cost_sweep(cfg: ExperimentConfig) -> list[dict]:
    chain = _require_chain(cfg)
    N = cfg.max_inter_query
    grid = {c: (c, build_policies(cfg.policies, chain, c, N, cfg.interval, cfg.thresholds)) for c in cfg.costs()}
    res = run_grid(chain, grid, N, cfg.horizon, cfg.episodes, cfg.seed, cfg.initial_state, workers=cfg.workers)
    rows = []
    for c, (_, policies) in grid.items():
        for name in policies:
            est = res[(c, name)]
            rows.append({"c": c, "policy": name, "gamma": est.mean, "stderr": est.stderr,
                         "queries_per_slot": est.qps})
    return rows


def run_uniform_sweep(cfg: ExperimentConfig, references=("optimal", "greedy", "stationary")) -> list[dict]:
    """Uniform sampling at every interval in ``cfg.deltas()`` for both predictors.

    Reference policies (which do not depend on the interval) are reported
    with an empty ``delta``.
    """
    chain = _require_chain(cfg)
    N, c = cfg.max_inter_query, cfg.query_cost
    grid = {}
    for d in cfg.deltas():
        if not 1 <= d <= N:
            raise ConfigError(f"interval {d} outside 1..{N}")
        grid[d] = (c, build_policies(("uniform", "uniform-np"), chain, c, N, interval=d))
    grid["ref"] = (c, build_policies(references, chain, c, N))
    res = run_grid(chain, grid, N, cfg.horizon, cfg.episodes, cfg.seed, cfg.initial_state, workers=cfg.workers)
    rows = []
    for d in cfg.deltas():
        for name in ("uniform", "uniform-np"):
            est = res[(d, name)]
            rows.append({"delta": d, "variant": name, "gamma": est.mean, "stderr": est.stderr})
    for name in grid["ref"][1]:
        est = res[("ref", name)]
        rows.append({"delta": "", "variant": name, "gamma": est.mean, "stderr": est.stderr})
    return rows


def random_study_chain(cfg: ExperimentConfig, trial: int) -> ChainSpec:
    r = cfg.random
    return cfg.chain(random_chain(r.states, episode_rng(r.seed, trial)))


def run_random_chain_study(cfg: ExperimentConfig) -> list[dict]:
    """Plan and simulate every configured policy on freshly drawn random chains.

    Rows carry ``stderr`` as well; the CSV writer keeps the documented columns.
    """
    if cfg.random is None:
        raise ConfigError("random-study needs a 'random' chain source")
    N, c = cfg.max_inter_query, cfg.query_cost
    rows = []
    for trial in range(cfg.random.count):
        chain = random_study_chain(cfg, trial)
        policies = build_policies(cfg.policies, chain, c, N, cfg.interval, cfg.thresholds)
        res = evaluate_policies(chain, policies, c, N, cfg.horizon, cfg.episodes, cfg.seed,
                                cfg.initial_state, workers=cfg.workers, key_prefix=(trial,))
        for name, est in res.items():
            rows.append({"trial": trial, "policy": name, "gamma": est.mean, "stderr": est.stderr})
    return rows


def run_learning(cfg: ExperimentConfig, gap: int, updates: int, every: int = 1000) -> list[dict]:
    """PSGD trace under queries forced every ``gap`` slots."""
    if cfg.transition is not None:
        P = cfg.chain().transition
    else:
        P = random_chain(cfg.random.states, episode_rng(cfg.random.seed, 0))
    _, trace = learn_from_periodic_queries(P, gap, updates, episode_rng(cfg.seed), every=every)
    return [{"update": m, "frobenius_dist": d, "eta": eta} for m, d, eta in trace]


def run_absorbing_replication(episodes: int = 1000, horizon: int = 100, long_horizon: int = 1000,
                              c: float = 1.0, seed: int = 0) -> list[dict]:
    """Greedy without a cap versus thresholds (1, H, H) on the absorbing chain.

    Greedy is run ``episodes`` times over ``horizon`` slots; the threshold
    policy over one run of ``long_horizon`` slots (it queries twice).
    """
    chain = absorbing_chain()
    g = build_policies(("greedy",), chain, c, N=horizon)
    greedy = evaluate_policies(chain, g, c, horizon, horizon, episodes, seed)["greedy"]
    H = long_horizon
    thr = {"threshold": ThresholdPolicy((1, H, H), chain.table(H), chain.loss)}
    t = evaluate_policies(chain, thr, c, H, H, 1, seed)["threshold"]
    return [
        {"policy": "greedy", "horizon": horizon, "gamma": greedy.mean, "stderr": greedy.stderr},
        {"policy": "threshold", "horizon": H, "gamma": t.mean, "stderr": t.stderr},
    ]
