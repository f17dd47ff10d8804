from __future__ import annotations
import argparse, logging, sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from sparsechoice import featlib, store
from sparsechoice.config import ExperimentConfig, load_config
from sparsechoice.diagnostics import compute_library_stats
from sparsechoice.errors import RunFailedError, SparseChoiceError
from sparsechoice.observability import configure_event_log, log_event
from sparsechoice.pipeline_app import run_pipeline
from sparsechoice.rng import check_seed
from sparsechoice.sigstats import (
    PrunedModel,
    StatTable,
    prune_by_pvalue,
    SolverSummary,
    render_markdown,
    run_repeated,
    solver_summary,
    stats_frame,
    t_statistics,
)
from sparsechoice.synthgen import GeneratedData, draw_and_aggregate, generate

logger = logging.getLogger("sparsechoice")

EXIT_OK, EXIT_ERROR, EXIT_RED_FLAG = 0, 1, 2
COMMANDS = ["gen", "build-library", "solve", "stats", "experiment"]

console = Console()


def _with_overrides(config: ExperimentConfig, **overrides: Any) -> ExperimentConfig:
    updates = {k: v for k, v in overrides.items() if v is not None}
    if "seed" in updates:
        check_seed(updates["seed"])
    # re-validate so overrides obey the same constraints as the file
    return ExperimentConfig.model_validate({**config.model_dump(), **updates})


def _out_dir(config: ExperimentConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dataset_path(args: argparse.Namespace, out: Path) -> Path:
    return Path(args.dataset) if args.dataset else out / "dataset.csv"


def _print_table(
    stats: StatTable,
    fmt: str | None,
    solver: tuple[SolverSummary, ...] = (),
    pruned: PrunedModel | None = None,
) -> None:
    if fmt == "md":
        sys.stdout.write(render_markdown(stats, solver))
        return
    if fmt == "csv":
        sys.stdout.write(stats_frame(stats).to_csv(index=False, lineterminator="\n"))
        return
    for a in stats.alternatives:
        table = Table(title=f"Alternative {a} ({stats.n_runs} runs, sorted by |t|)")
        for col in ("Base function", "Mean coeff.", "SD", "t-value", "P-value"):
            table.add_column(col, justify="right" if col != "Base function" else "left")
        kept = {r.name for r in pruned.survivors.get(a, ())} if pruned else set()
        for r in stats.sorted_by_t(a):
            style = "bold green" if r.name in kept else None
            table.add_row(r.name, f"{r.mean:.6g}", f"{r.sd:.4g}", f"{r.t:.4f}", f"{r.p:.4g}", style=style)
        console.print(table)
    _print_radius(solver)


def _print_radius(solver: tuple[SolverSummary, ...]) -> None:
    if not solver:
        return
    table = Table(title="Radius per alternative")
    for col in ("Alternative", "Runs", "Converged", "Relaxed", "pi", "pi (effective)", "Max residual"):
        table.add_column(col)
    for s in solver:
        table.add_row(
            str(s.alternative), str(s.runs), str(s.converged), str(s.relaxed), f"{s.pi:.6g}",
            f"{s.pi_effective_min:.6g} .. {s.pi_effective_max:.6g}", f"{s.residual_max:.6g}",
        )
    console.print(table)


def _print_solution(solution) -> None:
    table = Table(title="Solver diagnostics")
    for col in ("Alternative", "Converged", "Iterations", "Residual", "pi (effective)", "Min pi", "Active", "L1"):
        table.add_column(col)
    for a, r in zip(solution.alternatives, solution.results):
        table.add_row(
            str(a), str(r.converged), str(r.iterations), f"{r.residual_norm:.6g}",
            f"{r.pi_effective:.6g}", f"{r.min_feasible_pi:.6g}", str(len(r.active_set)), f"{r.objective:.6g}",
        )
    console.print(table)


def cmd_gen(config: ExperimentConfig, args: argparse.Namespace) -> int:
    out = _out_dir(config)
    data = generate(config.generator(config.seed))
    observed = draw_and_aggregate(data.true_probs, config.replicates, config.seed)
    path = store.write_dataset(out / "dataset.csv", data.covariates, observed)
    logger.info("wrote %s (%d rows, %d regenerated)", path, data.covariates.rows, data.regenerated_rows)
    return EXIT_OK


def _library_from_dataset(config: ExperimentConfig, dataset: Path):
    covariates, observed = store.read_dataset(dataset)
    spec = featlib.LibrarySpec.from_config(config.library)
    return covariates, observed, featlib.build_library(spec, covariates, config.solver.scaling)


def cmd_build_library(config: ExperimentConfig, args: argparse.Namespace) -> int:
    out = _out_dir(config)
    _, _, library = _library_from_dataset(config, _dataset_path(args, out))
    path = store.write_library(out / "library.csv", library)
    summary = compute_library_stats(library)
    table = Table(title=f"Library {path}")
    table.add_column("Metric")
    table.add_column("Value")
    for key, value in summary.items():
        shown = value if not isinstance(value, list) else (", ".join(map(str, value)) or "-")
        table.add_row(key, str(shown))
    console.print(table)
    return EXIT_OK


def cmd_solve(config: ExperimentConfig, args: argparse.Namespace) -> int:
    out = _out_dir(config)
    covariates, observed = store.read_dataset(_dataset_path(args, out))
    data = GeneratedData(covariates, np.asarray(observed.shares))
    state = run_pipeline(config, config.seed, args.run, data=data, observed=observed)
    if state.get("error"):
        raise RunFailedError(state["error"], state.get("error_module") or "cli")
    solution = state["solution"]
    _print_solution(solution)
    records = (
        (args.run, config.seed, a, name, float(value))
        for a in solution.alternatives
        for name, value in zip(state["library"].names, solution.column(a))
    )
    path = store.write_coefficient_records(out / "coefficients.csv", records)
    logger.info("wrote %s", path)
    return EXIT_OK


def _write_stats(out: Path, stats: StatTable, solver: tuple[SolverSummary, ...]) -> None:
    store.write_stats(out / "stats.csv", stats_frame(stats))
    store.write_text(out / "stats.md", render_markdown(stats, solver))
    for s in solver:
        if s.relaxed:
            logger.warning(
                "alternative %d: pi=%g relaxed in %d of %d runs (effective %.6g .. %.6g)",
                s.alternative, s.pi, s.relaxed, s.runs, s.pi_effective_min, s.pi_effective_max,
            )


def cmd_stats(config: ExperimentConfig, args: argparse.Namespace) -> int:
    out = _out_dir(config)
    ensemble = run_repeated(config)
    stats = t_statistics(ensemble)
    solver = solver_summary(ensemble)
    _write_stats(out, stats, solver)
    _print_table(stats, args.format, solver)
    return EXIT_OK


def cmd_experiment(config: ExperimentConfig, args: argparse.Namespace) -> int:
    out = _out_dir(config)
    ensemble = run_repeated(config)
    reference = ensemble.reference_state or {}
    if reference.get("observed") is not None:
        store.write_dataset(out / "dataset.csv", reference["data"].covariates, reference["observed"])
    if config.dump_library and reference.get("library") is not None:
        store.write_library(out / "library.csv", reference["library"])
    store.write_coefficients(out / "coefficients.csv", ensemble)

    stats = t_statistics(ensemble)
    solver = solver_summary(ensemble)
    _write_stats(out, stats, solver)
    pruned = prune_by_pvalue(stats, config.alpha, config.near_zero)
    store.write_text(out / "pruned_model.txt", pruned.render())
    _print_table(stats, args.format, solver, pruned)
    sys.stdout.write(pruned.render())
    for i, message in sorted(ensemble.failures.items()):
        logger.warning("run %d excluded: %s", i, message)
    return EXIT_RED_FLAG if pruned.red_flag else EXIT_OK


HANDLERS = {
    "gen": cmd_gen,
    "build-library": cmd_build_library,
    "solve": cmd_solve,
    "stats": cmd_stats,
    "experiment": cmd_experiment,
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsechoice-cli", description="Sparse identification of choice probabilities")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", default="config/exp1.json")
    parser.add_argument("--seed", type=int, default=None, help="Master seed (overrides config)")
    parser.add_argument("--out", default=None, help="Output directory (overrides config)")
    parser.add_argument("--format", choices=["csv", "md"], default=None, help="Console table format")
    parser.add_argument("--runs", type=int, default=None, help="Repeated runs (overrides config n_runs)")
    parser.add_argument("--jobs", type=int, default=None, help="Concurrent runs")
    parser.add_argument("--dump-library", action="store_true", default=None, help="Write library.csv in experiment")
    parser.add_argument("--dataset", default=None, help="Dataset CSV for build-library/solve (default <out>/dataset.csv)")
    parser.add_argument("--run", type=int, default=0, help="Run index recorded by solve")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if not logging.getLogger().handlers:
        logging.basicConfig(level=logging.INFO, format="%(levelname)-8s | %(message)s")
    try:
        config = _with_overrides(
            load_config(args.config),
            seed=args.seed,
            output_dir=args.out,
            n_runs=args.runs,
            jobs=args.jobs,
            dump_library=args.dump_library,
        )
    except ValidationError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, yaml.YAMLError, SparseChoiceError) as exc:
        print(f"error [{getattr(exc, 'module', 'config')}]: {exc}", file=sys.stderr)
        return EXIT_ERROR

    out = _out_dir(config)
    if args.command == "experiment":
        (out / "run.log").unlink(missing_ok=True)
    configure_event_log(out / "run.log")
    log_event("cli.start", {"command": args.command, "seed": config.seed, "config": str(args.config)})
    try:
        status = HANDLERS[args.command](config, args)
        log_event("cli.done", {"command": args.command, "status": status})
        return status
    except SparseChoiceError as exc:
        print(f"error [{exc.module}]: {exc}", file=sys.stderr)
        log_event("cli.error", {"command": args.command, "module": exc.module, "error": str(exc)})
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        print(f"error [cli]: {exc}", file=sys.stderr)
        log_event("cli.error", {"command": args.command, "module": "cli", "error": str(exc)})
        return EXIT_ERROR
    finally:
        configure_event_log(None)


def run_experiment(config_path: str | Path, **overrides: Any) -> int:
    """Programmatic ``experiment``; keyword overrides mirror the CLI flags."""

    argv = ["experiment", "--config", str(config_path)]
    for flag in ("seed", "out", "runs", "jobs"):
        if overrides.get(flag) is not None:
            argv += [f"--{flag}", str(overrides[flag])]
    if overrides.get("dump_library"):
        argv.append("--dump-library")
    return main(argv)


def cli():
    sys.exit(main())


if __name__ == "__main__":
    cli()
