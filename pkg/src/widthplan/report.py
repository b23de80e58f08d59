"""Pairwise win tables and per-cell summaries over persisted trial results."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DegenerateSamples, IncompleteMatrix
from .harness import TrialResult
from .stats import mean_confidence_interval, welch_t_test

BEST_P_THRESHOLD = 0.1


@dataclass
class WinTable:
    variants: list[str]
    envs: list[str]
    counts: dict[tuple[str, str], int]  # (a, b) -> envs where mean(a) > mean(b)

    def total_wins(self, variant: str) -> int:
        return sum(self.counts[(variant, b)] for b in self.variants if b != variant)

    def win_percent(self, variant: str) -> float:
        comparisons = len(self.envs) * (len(self.variants) - 1)
        return 100.0 * self.total_wins(variant) / comparisons if comparisons else 0.0


@dataclass
class SummaryRow:
    variant: str
    env_name: str
    trials: int
    mean: float
    ci_halfwidth: float
    best: bool


def _group(results: Iterable[TrialResult]) -> dict[tuple[str, str], list[TrialResult]]:
    grouped: dict[tuple[str, str], list[TrialResult]] = {}
    for r in results:
        grouped.setdefault((r.variant, r.env_name), []).append(r)
    return grouped


def _pooled_returns(trials: Sequence[TrialResult]) -> list[float]:
    return [x for t in sorted(trials, key=lambda t: t.trial) for x in t.eval_returns]


def _env_mean(trials: Sequence[TrialResult]) -> float:
    pooled = _pooled_returns(trials)
    return sum(pooled) / len(pooled)


def build_win_table(
    results: Iterable[TrialResult], env_subset: Sequence[str] | None = None
) -> WinTable:
    """Entry (A, B) counts envs where A's mean evaluation score beats B's.

    Exact mean ties count for neither side. Requires the full matrix over the
    selected envs.
    """
    grouped = _group(results)
    variants = sorted({v for v, _ in grouped})
    envs = sorted({e for _, e in grouped})
    if env_subset is not None:
        envs = [e for e in envs if e in set(env_subset)]
    missing = [(v, e) for v in variants for e in envs if (v, e) not in grouped]
    if missing:
        raise IncompleteMatrix(f"missing results for cells: {missing}")

    means = {(v, e): _env_mean(grouped[(v, e)]) for v in variants for e in envs}
    counts = {
        (a, b): sum(1 for e in envs if means[(a, e)] > means[(b, e)])
        for a in variants
        for b in variants
        if a != b
    }
    return WinTable(variants=variants, envs=envs, counts=counts)


def summarize(results: Iterable[TrialResult]) -> list[SummaryRow]:
    """Per (variant, env): pooled mean, 90% confidence interval, best flag.

    A variant is flagged best for an env when no other variant's pooled
    returns test better (one-sided Welch, p < 0.1); overlapping variants can
    all be flagged.
    """
    grouped = _group(results)
    envs = sorted({e for _, e in grouped})
    rows: list[SummaryRow] = []
    for env_name in envs:
        variants = sorted(v for v, e in grouped if e == env_name)
        pooled = {v: _pooled_returns(grouped[(v, env_name)]) for v in variants}
        for v in variants:
            best = True
            for other in variants:
                if other == v:
                    continue
                try:
                    p = welch_t_test(pooled[other], pooled[v])
                except DegenerateSamples:
                    continue  # indistinguishable: no evidence other is better
                if p < BEST_P_THRESHOLD:
                    best = False
                    break
            mean, half = mean_confidence_interval(pooled[v], 0.90)
            rows.append(
                SummaryRow(
                    variant=v,
                    env_name=env_name,
                    trials=len(grouped[(v, env_name)]),
                    mean=mean,
                    ci_halfwidth=half,
                    best=best,
                )
            )
    return rows


# -- rendering ---------------------------------------------------------------


def render_win_table(table: WinTable) -> str:
    header = ["vs"] + table.variants + ["total", "win%"]
    body = []
    for a in table.variants:
        row = [a]
        for b in table.variants:
            row.append("-" if a == b else str(table.counts[(a, b)]))
        row.append(str(table.total_wins(a)))
        row.append(f"{table.win_percent(a):.1f}")
        body.append(row)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in [header] + body]
    return "\n".join(lines)


def render_summary(rows: list[SummaryRow]) -> str:
    header = ["env", "variant", "trials", "mean", "ci90", "best"]
    body = [
        [
            r.env_name,
            r.variant,
            str(r.trials),
            f"{r.mean:.2f}",
            f"+/-{r.ci_halfwidth:.2f}",
            "*" if r.best else "",
        ]
        for r in rows
    ]
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in [header] + body]
    return "\n".join(lines)


def write_win_table_csv(path: Path, table: WinTable) -> None:
    lines = ["variant," + ",".join(table.variants) + ",total,win_percent"]
    for a in table.variants:
        cells = ["" if a == b else str(table.counts[(a, b)]) for b in table.variants]
        lines.append(
            f"{a}," + ",".join(cells) + f",{table.total_wins(a)},{table.win_percent(a)!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_summary_csv(path: Path, rows: list[SummaryRow]) -> None:
    lines = ["env,variant,trials,mean,ci90_halfwidth,best"]
    for r in rows:
        lines.append(
            f"{r.env_name},{r.variant},{r.trials},{r.mean!r},{r.ci_halfwidth!r},{int(r.best)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")
