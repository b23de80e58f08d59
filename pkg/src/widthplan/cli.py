"""Command-line harness: run benchmarks, classify environments, build reports,
and dump lookahead trees for debugging."""

from __future__ import annotations

import argparse
import statistics
import sys
from pathlib import Path

import numpy as np

from . import harness, report
from .agents import AgentVariant, PlanningAgent, TrainRunConfig, run_episode
from .envs import make_env, registered_envs
from .errors import WidthplanError
from .mdp import BudgetedSimulator
from .taxonomy import classify_branching, classify_smrf

SUBSETS = ("all", "smrf", "non-smrf", "high-branching", "low-branching")


def _cmd_run(args) -> int:
    out = harness.run_benchmark(args.config, workers=args.workers)
    print(f"results written to {out}")
    return 0


def _classify_rows(env_names, seed: int, two_sided: bool):
    rows = []
    for name in env_names:
        env = make_env(name)
        verdict = classify_smrf(env, seed=seed, two_sided=two_sided)
        branch = classify_branching(env)
        rows.append((name, verdict, branch))
    return rows


def _cmd_classify(args) -> int:
    env_names = args.envs if args.envs else registered_envs()
    rows = _classify_rows(env_names, args.seed, args.two_sided)
    lines = [
        "env,rtdp_mean,rtdp_std,random_mean,random_std,p_value,smrf,action_count,high_branching"
    ]
    for name, verdict, branch in rows:
        rtdp_m = statistics.mean(verdict.rtdp_returns)
        rtdp_s = statistics.pstdev(verdict.rtdp_returns)
        rand_m = statistics.mean(verdict.random_returns)
        rand_s = statistics.pstdev(verdict.random_returns)
        p = "" if verdict.p_value is None else repr(verdict.p_value)
        lines.append(
            f"{name},{rtdp_m!r},{rtdp_s!r},{rand_m!r},{rand_s!r},{p},"
            f"{int(verdict.is_smrf)},{branch.action_count},{int(branch.high_branching)}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"labels written to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _load_labels(path: Path) -> dict[str, dict[str, bool]]:
    labels: dict[str, dict[str, bool]] = {}
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    for line in lines[1:]:
        cells = dict(zip(header, line.split(",")))
        labels[cells["env"]] = {
            "smrf": cells["smrf"] == "1",
            "high_branching": cells["high_branching"] == "1",
        }
    return labels


def _cmd_report(args) -> int:
    results = harness.load_results(args.results)
    env_names = sorted({r.env_name for r in results})
    subset_envs = env_names
    if args.subset != "all":
        if args.labels:
            labels = _load_labels(Path(args.labels))
        else:
            labels = {
                name: {"smrf": verdict.is_smrf, "high_branching": branch.high_branching}
                for name, verdict, branch in _classify_rows(env_names, args.seed, False)
            }
        key, want = {
            "smrf": ("smrf", True),
            "non-smrf": ("smrf", False),
            "high-branching": ("high_branching", True),
            "low-branching": ("high_branching", False),
        }[args.subset]
        subset_envs = [e for e in env_names if labels.get(e, {}).get(key) == want]
        if not subset_envs:
            print(f"no envs in subset {args.subset!r}", file=sys.stderr)
            return 1

    subset_results = [r for r in results if r.env_name in set(subset_envs)]
    table = report.build_win_table(subset_results, subset_envs)
    rows = report.summarize(subset_results)

    out_dir = Path(args.results)
    report.write_win_table_csv(out_dir / f"win_table_{args.subset}.csv", table)
    report.write_summary_csv(out_dir / f"summary_{args.subset}.csv", rows)
    print(f"envs in subset {args.subset!r}: {', '.join(subset_envs)}")
    print()
    print(report.render_win_table(table))
    print()
    print(report.render_summary(rows))
    return 0


def _cmd_dump_tree(args) -> int:
    env = make_env(args.env)
    cfg = TrainRunConfig(plan_budget=args.budget, horizon=args.horizon)
    agent = PlanningAgent(AgentVariant(args.variant), env, cfg, seed=args.seed)
    sim = BudgetedSimulator(env)
    rng = np.random.default_rng(args.seed)

    # Re-run the episode driver for the requested number of decisions, then
    # print the tree left standing after the final planning call.
    from .lookahead import LookaheadTree, select_root_action
    from .novelty import NoveltyTable
    from .planner import riw_plan

    state = env.initial_state()
    obs = env.observe(state)
    tree = LookaheadTree.initialise(state, obs, cfg.horizon, env.is_terminal(state))
    table = NoveltyTable(agent.plan_cfg.novelty)
    vt, vt_batch = agent.termination_cost()
    for step in range(args.steps):
        riw_plan(tree, sim, agent.base_policy(), agent.plan_cfg, table, agent.extractor, rng)
        if step == args.steps - 1:
            break
        action = select_root_action(tree, vt, rng, vt_batch)
        child = tree.root.children[action]
        if child.terminal:
            break
        tree.advance_root(action)
    print(tree.dump())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="widthplan",
        description="Width-based lookahead planning and learning benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a benchmark config")
    p_run.add_argument("config", help="path to the run config file")
    p_run.add_argument("--workers", type=int, default=None, help="parallel trial workers")
    p_run.set_defaults(fn=_cmd_run)

    p_cls = sub.add_parser("classify", help="taxonomy over registered environments")
    p_cls.add_argument("--envs", nargs="*", default=None)
    p_cls.add_argument("--seed", type=int, default=0)
    p_cls.add_argument("--two-sided", action="store_true", help="two-sided SMRF test")
    p_cls.add_argument("--out", default=None, help="write labels CSV here")
    p_cls.set_defaults(fn=_cmd_classify)

    p_rep = sub.add_parser("report", help="tables from a results directory")
    p_rep.add_argument("results", help="results directory produced by run")
    p_rep.add_argument("--subset", choices=SUBSETS, default="all")
    p_rep.add_argument("--labels", default=None, help="labels CSV from classify")
    p_rep.add_argument("--seed", type=int, default=0, help="seed for on-the-fly labels")
    p_rep.set_defaults(fn=_cmd_report)

    p_dump = sub.add_parser("dump-tree", help="print a lookahead tree for debugging")
    p_dump.add_argument("--env", required=True, choices=registered_envs())
    p_dump.add_argument("--variant", default="riw-c", choices=[v.value for v in AgentVariant])
    p_dump.add_argument("--steps", type=int, default=1, help="decision steps to simulate")
    p_dump.add_argument("--seed", type=int, default=0)
    p_dump.add_argument("--budget", type=int, default=100)
    p_dump.add_argument("--horizon", type=int, default=100)
    p_dump.set_defaults(fn=_cmd_dump_tree)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except WidthplanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
