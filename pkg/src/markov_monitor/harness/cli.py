"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 numeric failure
(singular gain/bias system or non-convergence).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys

from ..errors import ConfigError, HorizonExceeded, NumericFailure, TooLarge
from ..planner import policy_iteration
from . import experiments as ex
from .config import ExperimentConfig, load_config
from .simulate import TrajectoryRecord, episode_rng, simulate

log = logging.getLogger("markov_monitor")

PLAN_COLUMNS = ("state", "threshold", "bias", "gain")
SIMULATE_COLUMNS = ("policy", "c", "gamma", "stderr", "queries_per_slot")


def write_csv(rows, columns, out=None) -> str:
    """Write ``rows`` (dicts or tuples) with a fixed header; return the text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([r[c] for c in columns] if isinstance(r, dict) else list(r))
    text = buf.getvalue()
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return text


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--horizon", type=int, help="slots per episode (overrides config)")
    common.add_argument("--episodes", type=int, help="episodes per estimate (overrides config)")
    common.add_argument("--out", help="CSV output path (default: stdout)")
    common.add_argument("--trace", action="store_true", help="emit the per-slot trajectory (simulate only)")
    common.add_argument("-c", "--query-cost", type=float, dest="query_cost", help="query cost (overrides config)")
    common.add_argument("-N", "--max-inter-query", type=int, dest="max_inter_query", help="cap N (overrides config)")
    common.add_argument("--workers", type=int, help="worker processes for episodes")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="markov-monitor", description="Query-or-predict monitoring of a Markov source.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("plan", parents=[common], help="optimal thresholds, gain and bias")
    sp = sub.add_parser("simulate", parents=[common], help="simulate one policy")
    sp.add_argument("--policy", default="greedy")
    sub.add_parser("sweep-cost", parents=[common], help="average cost vs query cost for every policy")
    sub.add_parser("sweep-uniform", parents=[common], help="uniform sampling vs interval")
    sub.add_parser("random-study", parents=[common], help="greedy vs optimal on random chains")
    lp = sub.add_parser("learn", parents=[common], help="PSGD convergence trace")
    lp.add_argument("--gap", type=int, default=5, help="slots between forced queries")
    lp.add_argument("--updates", type=int, default=100_000)
    lp.add_argument("--every", type=int, default=1000, help="trace sampling period")
    sub.add_parser("thm1", parents=[common], help="greedy pathology on the absorbing chain")
    return p


def _config(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigError("--config is required for this command")
    cfg = load_config(args.config)
    return cfg.with_overrides(seed=args.seed, horizon=args.horizon, episodes=args.episodes,
                              query_cost=args.query_cost, max_inter_query=args.max_inter_query,
                              workers=args.workers)


def _cmd_plan(args) -> None:
    cfg = _config(args)
    chain = ex._require_chain(cfg)
    N = cfg.max_inter_query
    sol = policy_iteration(chain.table(N), chain.loss, cfg.query_cost, N)
    print(f"thresholds {tuple(sol.thresholds)} gain {sol.gain:.12g} bias {[round(float(b), 12) for b in sol.bias]}")
    if args.out:
        rows = [(i, m, float(h), sol.gain) for i, (m, h) in enumerate(zip(sol.thresholds, sol.bias))]
        write_csv(rows, PLAN_COLUMNS, args.out)


def _cmd_simulate(args) -> None:
    cfg = _config(args)
    chain = ex._require_chain(cfg)
    N, c = cfg.max_inter_query, cfg.query_cost
    policies = ex.build_policies((args.policy,), chain, c, N, cfg.interval, cfg.thresholds)
    if args.policy not in policies:
        raise ConfigError(f"policy {args.policy!r} is unavailable for this chain")
    if args.trace:
        ledger, rec = simulate(chain, policies[args.policy], c, N, cfg.horizon, episode_rng(cfg.seed, 0),
                               cfg.initial_state, trace=True)
        print(f"{args.policy}: average {ledger.average:.6g} over {ledger.slots} slots, {ledger.queries} queries",
              file=sys.stderr)
        write_csv(rec.rows, TrajectoryRecord.COLUMNS, args.out)
        return
    est = ex.evaluate_policies(chain, policies, c, N, cfg.horizon, cfg.episodes, cfg.seed, cfg.initial_state,
                               cfg.workers)[args.policy]
    write_csv([(args.policy, c, est.mean, est.stderr, est.qps)], SIMULATE_COLUMNS, args.out)


def _cmd_learn(args) -> None:
    cfg = _config(args)
    rows = ex.run_learning(cfg, args.gap, args.updates, args.every)
    write_csv(rows, ex.LEARN_COLUMNS, args.out)


def _cmd_thm1(args) -> None:
    rows = ex.run_absorbing_replication(
        episodes=args.episodes or 1000,
        horizon=args.horizon or 100,
        c=args.query_cost if args.query_cost is not None else 1.0,
        seed=args.seed or 0,
    )
    g, t = rows
    print(f"greedy {g['gamma']:.4f} +- {g['stderr']:.4f}; thresholds (1,H,H) at H={t['horizon']}: {t['gamma']:.4g}",
          file=sys.stderr)
    write_csv(rows, ex.THM1_COLUMNS, args.out)


def _sweep(runner, columns):
    def cmd(args):
        write_csv(runner(_config(args)), columns, args.out)
    return cmd


COMMANDS = {
    "plan": _cmd_plan,
    "simulate": _cmd_simulate,
    "sweep-cost": _sweep(ex.run_cost_sweep, ex.COST_SWEEP_COLUMNS),
    "sweep-uniform": _sweep(ex.run_uniform_sweep, ex.UNIFORM_SWEEP_COLUMNS),
    "random-study": _sweep(ex.run_random_chain_study, ex.RANDOM_STUDY_COLUMNS),
    "learn": _cmd_learn,
    "thm1": _cmd_thm1,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (ConfigError, TooLarge, HorizonExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
