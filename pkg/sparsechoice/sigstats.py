"""Repeated-run significance testing of library coefficients.

Each run executes the full pipeline graph from its own derived seed.  Per base
function and alternative the coefficients across successful runs give a mean, a
sample standard deviation and a two-sided Student t test with ``n - 1`` degrees of
freedom; terms that fail the test are pruned from the recovered specification.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable

import numpy as np
import pandas as pd
from scipy.special import betainc

from sparsechoice.config import ExperimentConfig
from sparsechoice.errors import EnsembleError, StatisticsError
from sparsechoice.observability import log_event
from sparsechoice.pipeline_app import build_graph, run_pipeline
from sparsechoice.rng import derive_seed
from sparsechoice.sparsesolve import CoefficientMatrix

logger = logging.getLogger(__name__)

__all__ = [
    "RunEnsemble",
    "StatRow",
    "StatTable",
    "PrunedModel",
    "run_repeated",
    "t_statistics",
    "student_t_sf",
    "prune_by_pvalue",
    "render_markdown",
    "stats_frame",
    "SolverSummary",
    "solver_summary",
]

MAX_FAILURE_FRACTION = 0.2
STATS_COLUMNS = ["alternative", "base_function", "mean_coeff", "sd", "t_value", "p_value", "label"]


@dataclass(frozen=True)
class RunEnsemble:
    n_runs: int
    master_seed: int
    run_seeds: tuple[int, ...]
    names: tuple[str, ...]
    labels: tuple[str, ...]
    solutions: Dict[int, CoefficientMatrix]  # run index -> solution, successful runs only
    failures: Dict[int, str] = field(default_factory=dict)
    reference_state: Dict[str, Any] | None = None  # final state of run 0

    @property
    def ok_runs(self) -> tuple[int, ...]:
        return tuple(sorted(self.solutions))

    @property
    def alternatives(self) -> tuple[int, ...]:
        first = self.solutions[self.ok_runs[0]] if self.solutions else None
        return first.alternatives if first is not None else ()

    @property
    def coefficients(self) -> Dict[int, np.ndarray]:
        """Alternative -> (successful runs x k) coefficient array, in run order."""
        return {
            a: np.vstack([self.solutions[i].column(a) for i in self.ok_runs])
            for a in self.alternatives
        }

    def long_records(self) -> Iterable[tuple[int, int, int, str, float]]:
        """``(run, seed, alternative, base_function, coefficient)`` rows."""
        for i in self.ok_runs:
            solution = self.solutions[i]
            for a in solution.alternatives:
                column = solution.column(a)
                for name, value in zip(self.names, column):
                    yield i, self.run_seeds[i], a, name, float(value)


@dataclass(frozen=True)
class StatRow:
    index: int
    name: str
    label: str
    alternative: int
    mean: float
    sd: float
    t: float
    p: float


@dataclass(frozen=True)
class StatTable:
    rows: tuple[StatRow, ...]
    n_runs: int

    @property
    def alternatives(self) -> tuple[int, ...]:
        return tuple(sorted({r.alternative for r in self.rows}))

    def for_alternative(self, alternative: int) -> tuple[StatRow, ...]:
        return tuple(r for r in self.rows if r.alternative == alternative)

    def sorted_by_t(self, alternative: int | None = None) -> list[StatRow]:
        """Rows by |t| descending; ties keep library order."""
        rows = self.rows if alternative is None else self.for_alternative(alternative)
        return sorted(rows, key=lambda r: (-abs(r.t), r.alternative, r.index))


@dataclass(frozen=True)
class PrunedModel:
    alpha: float
    survivors: Dict[int, tuple[StatRow, ...]]
    negligible: Dict[int, tuple[StatRow, ...]]
    expressions: Dict[int, str]

    @property
    def red_flags(self) -> Dict[int, bool]:
        return {a: not rows for a, rows in self.survivors.items()}

    @property
    def red_flag(self) -> bool:
        return any(self.red_flags.values())

    def render(self) -> str:
        lines = [self.expressions[a] for a in sorted(self.expressions)]
        for a in sorted(self.survivors):
            if self.red_flags[a]:
                lines.append(
                    f"red flag: no significant base function for alternative {a} at alpha={self.alpha:g}"
                )
            if self.negligible[a]:
                names = ", ".join(r.name for r in self.negligible[a])
                lines.append(f"negligible (near-zero mean) for alternative {a}: {names}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SolverSummary:
    """How the radius was honoured for one alternative across the successful runs."""

    alternative: int
    runs: int
    converged: int
    relaxed: int
    pi: float
    pi_effective_min: float
    pi_effective_max: float
    residual_max: float


def solver_summary(ensemble: RunEnsemble) -> tuple[SolverSummary, ...]:
    per_alternative: Dict[int, list] = {}
    for i in ensemble.ok_runs:
        solution = ensemble.solutions[i]
        for a, result in zip(solution.alternatives, solution.results):
            per_alternative.setdefault(a, []).append(result)
    return tuple(
        SolverSummary(
            alternative=a,
            runs=len(results),
            converged=sum(r.converged for r in results),
            relaxed=sum(r.relaxed for r in results),
            pi=results[0].pi,
            pi_effective_min=min(r.pi_effective for r in results),
            pi_effective_max=max(r.pi_effective for r in results),
            residual_max=max(r.residual_norm for r in results),
        )
        for a, results in sorted(per_alternative.items())
    )


def student_t_sf(t: float, df: float) -> float:
    """Two-sided p-value ``2 Pr(T_df > |t|) = I_x(df/2, 1/2)`` with ``x = df / (df + t^2)``."""

    if not df >= 1:
        raise StatisticsError(f"degrees of freedom must be >= 1, got {df}")
    t2 = float(t) * float(t)
    x = 0.0 if math.isinf(t2) else df / (df + t2)
    return float(betainc(df / 2.0, 0.5, x))


def run_repeated(
    config: ExperimentConfig,
    n_runs: int | None = None,
    master_seed: int | None = None,
    jobs: int | None = None,
) -> RunEnsemble:
    n_runs = config.n_runs if n_runs is None else n_runs
    master_seed = config.seed if master_seed is None else master_seed
    jobs = config.jobs if jobs is None else jobs
    if n_runs < 1:
        raise EnsembleError(f"n_runs must be >= 1, got {n_runs}")

    seeds = tuple(derive_seed(master_seed, i) for i in range(n_runs))
    graph = build_graph()

    def one(i: int) -> Dict[str, Any]:
        covariate_seed = master_seed if config.redraw == "choices_only" else seeds[i]
        logger.info("run %d/%d (seed %d)", i + 1, n_runs, seeds[i])
        return run_pipeline(config, seeds[i], i, covariate_seed, graph=graph)

    # map() yields in submission order whatever the completion order
    with ThreadPoolExecutor(max_workers=max(1, min(jobs, n_runs))) as pool:
        states = list(pool.map(one, range(n_runs)))

    failures = {
        i: f"[{s['error_module']}] {s['error']}" for i, s in enumerate(states) if s.get("error")
    }
    log_event("sigstats.ensemble", {"n_runs": n_runs, "master_seed": master_seed, "failed": len(failures)})
    if len(failures) > MAX_FAILURE_FRACTION * n_runs:
        first = min(failures)
        raise EnsembleError(
            f"{len(failures)} of {n_runs} runs failed (more than {MAX_FAILURE_FRACTION:.0%}); "
            f"run {first}: {failures[first]}"
        )

    solutions = {i: s["solution"] for i, s in enumerate(states) if not s.get("error")}
    library = states[min(solutions)]["library"]
    return RunEnsemble(
        n_runs=n_runs,
        master_seed=master_seed,
        run_seeds=seeds,
        names=library.names,
        labels=library.labels,
        solutions=solutions,
        failures=failures,
        reference_state=states[0],
    )


def _row_statistics(values: np.ndarray) -> tuple[float, float, float, float]:
    n = values.size
    mean = float(values.mean())
    sd = float(values.std(ddof=1))
    if sd > 0:
        t = mean / (sd / math.sqrt(n))
        return mean, sd, t, student_t_sf(t, n - 1)
    if mean == 0:
        return mean, sd, 0.0, 1.0
    return mean, sd, math.copysign(math.inf, mean), 0.0


def t_statistics(ensemble: RunEnsemble) -> StatTable:
    n = len(ensemble.ok_runs)
    if n < 2:
        raise StatisticsError(f"t statistics need at least 2 successful runs, got {n}")
    rows = []
    for a, coefficients in ensemble.coefficients.items():
        for j, (name, label) in enumerate(zip(ensemble.names, ensemble.labels)):
            mean, sd, t, p = _row_statistics(coefficients[:, j])
            rows.append(StatRow(j, name, label, a, mean, sd, t, p))
    return StatTable(tuple(rows), n)


def _format_term(coefficient: float, label: str, first: bool) -> str:
    magnitude = f"{abs(coefficient):.10g} * ({label})"
    if first:
        return magnitude if coefficient >= 0 else f"-{magnitude}"
    return f" + {magnitude}" if coefficient >= 0 else f" - {magnitude}"


def prune_by_pvalue(stats: StatTable, alpha: float, min_abs_coeff: float = 0.0) -> PrunedModel:
    """Keep terms with ``p < alpha`` (library order) and write the closed form."""

    if not 0 < alpha < 1:
        raise StatisticsError(f"alpha must lie in (0, 1), got {alpha}")
    survivors: Dict[int, tuple[StatRow, ...]] = {}
    negligible: Dict[int, tuple[StatRow, ...]] = {}
    expressions: Dict[int, str] = {}
    for a in stats.alternatives:
        significant = [r for r in stats.for_alternative(a) if r.p < alpha]
        kept = tuple(r for r in significant if abs(r.mean) > min_abs_coeff)
        survivors[a] = kept
        negligible[a] = tuple(r for r in significant if abs(r.mean) <= min_abs_coeff)
        body = "".join(_format_term(r.mean, r.label, i == 0) for i, r in enumerate(kept)) or "0"
        expressions[a] = f"P{a} = {body}"
    model = PrunedModel(alpha, survivors, negligible, expressions)
    if model.red_flag:
        flagged = [a for a, flag in model.red_flags.items() if flag]
        logger.warning("red flag: empty survivor set for alternative(s) %s", flagged)
        log_event("sigstats.red_flag", {"alternatives": flagged, "alpha": alpha})
    return model


def stats_frame(stats: StatTable) -> pd.DataFrame:
    return pd.DataFrame(
        [(r.alternative, r.name, r.mean, r.sd, r.t, r.p, r.label) for r in stats.rows],
        columns=STATS_COLUMNS,
    )


def _markdown_table(header: list[str], body: list[list[str]]) -> list[str]:
    widths = [max(len(row[c]) for row in [header, *body]) for c in range(len(header))]

    def line(cells: list[str]) -> str:
        return "| " + " | ".join(cell.ljust(w) for cell, w in zip(cells, widths)) + " |"

    return [line(header), "|" + "|".join("-" * (w + 2) for w in widths) + "|", *map(line, body)]


def render_markdown(stats: StatTable, solver: Iterable[SolverSummary] = ()) -> str:
    """Aligned Markdown table per alternative, rows in library order.

    ``solver`` adds a section with the radius each alternative was actually
    solved at; relaxed runs widen it to just above the least-squares residual.
    """

    header = ["Base function", "Mean-Coeff.", "SD", "t-value", "P-value", "Expression"]
    out = []
    for a in stats.alternatives:
        body = [
            [r.name, f"{r.mean:.9g}", f"{r.sd:.6g}", f"{r.t:.6f}", f"{r.p:.6g}", f"`{r.label}`"]
            for r in stats.for_alternative(a)
        ]
        out.append(f"### Alternative {a} ({stats.n_runs} runs)")
        out.append("")
        out.extend(_markdown_table(header, body))
        out.append("")
    solver = tuple(solver)
    if solver:
        header = ["Alternative", "Runs", "Converged", "Relaxed", "pi", "pi effective", "Max residual"]
        body = [
            [
                str(s.alternative), str(s.runs), str(s.converged), str(s.relaxed), f"{s.pi:.6g}",
                f"{s.pi_effective_min:.6g}" if s.pi_effective_min == s.pi_effective_max
                else f"{s.pi_effective_min:.6g} .. {s.pi_effective_max:.6g}",
                f"{s.residual_max:.6g}",
            ]
            for s in solver
        ]
        out.append("### Solver")
        out.append("")
        out.extend(_markdown_table(header, body))
        out.append("")
    return "\n".join(out)
