"""Benchmark harness: config parsing, seeded trial orchestration, and
deterministic result persistence.

Configs are flat key-value text with sections. A run executes the full
variant x env x trial matrix; every trial derives its seed from the master
seed and its cell coordinates (never from execution order), writes one
comma-separated result file plus an interval log, and checkpoints parameters
at accepted intervals. Reruns with the same config are byte-identical;
interrupted runs resume, skipping completed cells recorded in the manifest.
"""

from __future__ import annotations

import configparser
import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .agents import (
    AgentVariant,
    IntervalLogRow,
    PlanningAgent,
    TrainRunConfig,
    desk_run_config,
    evaluate,
    full_run_config,
    run_training,
)
from .envs import make_env, registered_envs
from .errors import ConfigError
from .mdp import BudgetedSimulator
from .nets import save_params

_RUN_KEYS = {
    "preset",
    "variants",
    "envs",
    "trials",
    "master_seed",
    "workers",
    "out_dir",
    "total_budget",
    "interval_budget",
    "plan_budget",
    "horizon",
    "eval_episodes",
    "episode_cap",
    "gamma",
    "batch_size",
    "epochs",
    "policy_learning_rate",
    "value_learning_rate",
    "target_refresh_steps",
    "feature_mode",
    "reward_clip",
    "novelty_reset_per_step",
    "novelty",
}

_INT_KEYS = {
    "total_budget",
    "interval_budget",
    "plan_budget",
    "horizon",
    "eval_episodes",
    "episode_cap",
    "batch_size",
    "epochs",
    "target_refresh_steps",
}


@dataclass(frozen=True)
class TrialCell:
    variant: str
    env_name: str
    trial: int
    seed: int
    env_overrides: tuple[tuple[str, object], ...] = ()


@dataclass
class RunPlan:
    out_dir: Path
    workers: int
    run_cfg: TrainRunConfig
    cells: list[TrialCell]
    master_seed: int
    variant_cfgs: dict[str, TrainRunConfig] = field(default_factory=dict)

    def cfg_for(self, variant: str) -> TrainRunConfig:
        return self.variant_cfgs.get(variant, self.run_cfg)


@dataclass
class TrialResult:
    variant: str
    env_name: str
    trial: int
    seed: int
    eval_returns: list[float]
    train_sim_calls: int
    eval_sim_calls: int
    train_episodes: int
    intervals: int
    accepted_intervals: int
    log_rows: list[IntervalLogRow] = field(default_factory=list)


def derive_seed(master_seed: int, variant: str, env_name: str, trial: int) -> int:
    """Counter-style seed split: stable under any trial execution order."""
    key = f"{master_seed}:{variant}:{env_name}:{trial}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little") % (2**63)


def _coerce(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    return value


# Keys that orchestrate the run rather than parameterize training; these are
# only legal in [run], not in [variant:...] sections.
_ORCHESTRATION_KEYS = {"preset", "variants", "envs", "trials", "master_seed", "workers", "out_dir"}


def _apply_hyper_overrides(cfg, section, path, label: str):
    """Overlay a config section's hyperparameter keys onto a TrainRunConfig."""
    overrides = {}
    for key in _INT_KEYS:
        if key in section:
            try:
                overrides[key] = int(section[key])
            except ValueError as exc:
                raise ConfigError(f"{path}: {label} {key} must be an integer") from exc
    if "gamma" in section:
        overrides["gamma"] = float(section["gamma"])
    if "feature_mode" in section:
        overrides["feature_mode"] = section["feature_mode"]
    if "reward_clip" in section:
        overrides["reward_clip"] = float(section["reward_clip"])
    if "novelty_reset_per_step" in section:
        try:
            overrides["novelty_reset_per_step"] = section.getboolean("novelty_reset_per_step")
        except ValueError as exc:
            raise ConfigError(f"{path}: {label} novelty_reset_per_step must be boolean") from exc
    if "novelty" in section:
        value = section["novelty"]
        if value not in ("classic", "depth", "none"):
            raise ConfigError(f"{path}: {label} novelty must be classic, depth, or none")
        overrides["novelty_override"] = value

    pol_fit, val_fit = cfg.policy_fit, cfg.value_fit
    if "batch_size" in overrides:
        pol_fit = replace(pol_fit, batch_size=overrides["batch_size"])
        val_fit = replace(val_fit, batch_size=overrides.pop("batch_size"))
    if "epochs" in overrides:
        pol_fit = replace(pol_fit, epochs=overrides["epochs"])
        val_fit = replace(val_fit, epochs=overrides.pop("epochs"))
    if "policy_learning_rate" in section:
        pol_fit = replace(pol_fit, learning_rate=float(section["policy_learning_rate"]))
    if "value_learning_rate" in section:
        val_fit = replace(val_fit, learning_rate=float(section["value_learning_rate"]))
    return replace(cfg, policy_fit=pol_fit, value_fit=val_fit, **overrides)


def parse_config(path: str | Path) -> RunPlan:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if "run" not in parser:
        raise ConfigError(f"{path}: missing [run] section")
    run = parser["run"]

    unknown = set(run) - _RUN_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown [run] keys: {sorted(unknown)}")

    preset = run.get("preset", "desk")
    if preset == "desk":
        cfg = desk_run_config()
    elif preset == "full":
        cfg = full_run_config()
    else:
        raise ConfigError(f"{path}: preset must be desk or full, got {preset!r}")

    cfg = _apply_hyper_overrides(cfg, run, path, "[run]")

    try:
        variants = [
            AgentVariant(v.strip()).value
            for v in run.get("variants", "ncpl, riw-c").split(",")
            if v.strip()
        ]
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    env_names = [e.strip() for e in run.get("envs", "gridnav-sparse").split(",") if e.strip()]
    known = set(registered_envs())
    for name in env_names:
        if name not in known:
            raise ConfigError(f"{path}: unknown env {name!r}; known: {sorted(known)}")

    trials = run.getint("trials", 5)
    master_seed = run.getint("master_seed", 0)
    workers = run.getint("workers", 1)
    out_dir = Path(run.get("out_dir", "results"))
    if not out_dir.is_absolute():
        out_dir = path.parent / out_dir

    env_overrides: dict[str, tuple[tuple[str, object], ...]] = {}
    variant_cfgs: dict[str, TrainRunConfig] = {}
    for section in parser.sections():
        if section.startswith("env:"):
            name = section[4:]
            if name not in known:
                raise ConfigError(f"{path}: [{section}] names an unknown env")
            env_overrides[name] = tuple(
                sorted((k, _coerce(v)) for k, v in parser[section].items())
            )
        elif section.startswith("variant:"):
            name = section[8:]
            try:
                name = AgentVariant(name).value
            except ValueError as exc:
                raise ConfigError(f"{path}: [{section}] names an unknown variant") from exc
            bad = set(parser[section]) - (_RUN_KEYS - _ORCHESTRATION_KEYS)
            if bad:
                raise ConfigError(f"{path}: [{section}] has non-hyperparameter keys: {sorted(bad)}")
            variant_cfgs[name] = _apply_hyper_overrides(
                cfg, parser[section], path, f"[{section}]"
            )

    cells = [
        TrialCell(
            variant=v,
            env_name=e,
            trial=t,
            seed=derive_seed(master_seed, v, e, t),
            env_overrides=env_overrides.get(e, ()),
        )
        for v in variants
        for e in env_names
        for t in range(trials)
    ]
    cells.sort(key=lambda c: (c.variant, c.env_name, c.trial))
    return RunPlan(out_dir=out_dir, workers=workers, run_cfg=cfg, cells=cells,
                   master_seed=master_seed, variant_cfgs=variant_cfgs)


# -- trial execution ---------------------------------------------------------


def cell_stem(cell: TrialCell) -> str:
    return f"{cell.variant}__{cell.env_name}__t{cell.trial}"


def run_trial(cell: TrialCell, cfg: TrainRunConfig, out_dir: Path | None = None) -> TrialResult:
    env = make_env(cell.env_name, **dict(cell.env_overrides))
    variant = AgentVariant(cell.variant)
    log_rows: list[IntervalLogRow] = []
    if variant.learns:
        def checkpoint(interval: int, params) -> None:
            if out_dir is None:
                return
            stem = out_dir / "trials" / f"{cell_stem(cell)}__i{interval}"
            save_params(f"{stem}__policy.ckpt", params.policy.shape, params.policy.params)
            save_params(f"{stem}__value.ckpt", params.value.shape, params.value.params)

        agent, log_rows, train_sim = run_training(
            variant, env, cfg, cell.seed, checkpoint_cb=checkpoint
        )
        train_calls = train_sim.total_used
    else:
        agent = PlanningAgent(variant, env, cfg, cell.seed)
        train_calls = 0
    eval_sim = BudgetedSimulator(env)
    returns = evaluate(agent, cfg.eval_episodes, cell.seed, sim=eval_sim)
    return TrialResult(
        variant=cell.variant,
        env_name=cell.env_name,
        trial=cell.trial,
        seed=cell.seed,
        eval_returns=returns,
        train_sim_calls=train_calls,
        eval_sim_calls=eval_sim.total_used,
        train_episodes=sum(r.episodes for r in log_rows),
        intervals=len(log_rows),
        accepted_intervals=sum(1 for r in log_rows if r.accepted),
        log_rows=log_rows,
    )


def write_trial_result(out_dir: Path, result: TrialResult) -> Path:
    trials_dir = out_dir / "trials"
    trials_dir.mkdir(parents=True, exist_ok=True)
    stem = trials_dir / f"{result.variant}__{result.env_name}__t{result.trial}"
    lines = [
        f"variant,{result.variant}",
        f"env,{result.env_name}",
        f"trial,{result.trial}",
        f"seed,{result.seed}",
        f"train_sim_calls,{result.train_sim_calls}",
        f"eval_sim_calls,{result.eval_sim_calls}",
        f"train_episodes,{result.train_episodes}",
        f"intervals,{result.intervals}",
        f"accepted_intervals,{result.accepted_intervals}",
    ]
    lines += [f"eval_return,{i},{r!r}" for i, r in enumerate(result.eval_returns)]
    path = Path(f"{stem}.csv")
    path.write_text("\n".join(lines) + "\n")

    log_lines = ["interval,sim_used,episodes,mean_return,p_value,accepted"]
    for row in result.log_rows:
        p = "" if row.p_value is None else repr(row.p_value)
        log_lines.append(
            f"{row.interval},{row.sim_used},{row.episodes},{row.mean_return!r},{p},{int(row.accepted)}"
        )
    Path(f"{stem}__log.csv").write_text("\n".join(log_lines) + "\n")
    return path


def read_trial_result(path: Path) -> TrialResult:
    meta: dict[str, str] = {}
    returns: list[tuple[int, float]] = []
    for line in Path(path).read_text().splitlines():
        parts = line.split(",")
        if parts[0] == "eval_return":
            returns.append((int(parts[1]), float(parts[2])))
        else:
            meta[parts[0]] = parts[1]
    returns.sort()
    return TrialResult(
        variant=meta["variant"],
        env_name=meta["env"],
        trial=int(meta["trial"]),
        seed=int(meta["seed"]),
        eval_returns=[r for _, r in returns],
        train_sim_calls=int(meta["train_sim_calls"]),
        eval_sim_calls=int(meta["eval_sim_calls"]),
        train_episodes=int(meta["train_episodes"]),
        intervals=int(meta["intervals"]),
        accepted_intervals=int(meta["accepted_intervals"]),
    )


def _execute_cell(args: tuple[TrialCell, TrainRunConfig, str]) -> tuple[TrialCell, str]:
    cell, cfg, out_dir = args
    result = run_trial(cell, cfg, Path(out_dir))
    path = write_trial_result(Path(out_dir), result)
    return cell, str(path.relative_to(out_dir))


def run_benchmark(config_path: str | Path, workers: int | None = None) -> Path:
    """Execute the config's full trial matrix; returns the results directory."""
    plan = parse_config(config_path)
    out_dir = plan.out_dir
    (out_dir / "trials").mkdir(parents=True, exist_ok=True)
    n_workers = workers if workers is not None else plan.workers

    manifest = out_dir / "manifest.csv"
    done: set[str] = set()
    if manifest.exists():
        for line in manifest.read_text().splitlines()[1:]:
            cell_id = line.split(",")[0]
            done.add(cell_id)

    pending = []
    completed: dict[str, str] = {}
    for cell in plan.cells:
        stem = cell_stem(cell)
        path = out_dir / "trials" / f"{stem}.csv"
        if stem in done and path.exists():
            completed[stem] = str(path.relative_to(out_dir))
        else:
            pending.append(cell)

    if n_workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            jobs = [(c, plan.cfg_for(c.variant), str(out_dir)) for c in pending]
            for cell, rel in pool.map(_execute_cell, jobs):
                completed[cell_stem(cell)] = rel
    else:
        for cell in pending:
            _, rel = _execute_cell((cell, plan.cfg_for(cell.variant), str(out_dir)))
            completed[cell_stem(cell)] = rel

    lines = ["cell,file"]
    lines += [f"{stem},{completed[stem]}" for stem in sorted(completed)]
    manifest.write_text("\n".join(lines) + "\n")
    return out_dir


def load_results(out_dir: str | Path) -> list[TrialResult]:
    out_dir = Path(out_dir)
    manifest = out_dir / "manifest.csv"
    if not manifest.exists():
        raise ConfigError(f"no manifest in {out_dir}")
    results = []
    for line in manifest.read_text().splitlines()[1:]:
        _, rel = line.split(",", 1)
        results.append(read_trial_result(out_dir / rel))
    return results
