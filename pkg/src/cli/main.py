"""
Command-line harness for NN-LIFT experiments.

Subcommands: gen (write a synthetic dataset), train (fit a network to a
dataset), eval (score a saved network) and sweep (regenerate and train over a
grid of n or k values and seeds).
"""
import argparse
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from src.nnlift.config import EXIT_CODES, HISTORY_DB_NAME, LOG_FORMAT, LOG_LEVEL, OUTPUT_DIR
from src.nnlift.converters import params_from_json, params_to_json, report_to_json, report_to_row, write_rows
from src.nnlift.errors import ConfigurationError, NNLiftError, StageError
from src.nnlift.models import ExperimentConfig, ExperimentReport, Mode
from src.nnlift.pipeline import NetworkParams, build_report, generate_dataset, train
from src.nnlift.repositories import RunRepository

from .dataset_io import atomic_write, export_csv, read_dataset, write_dataset
from .settings import load_config

logger = logging.getLogger(__name__)

DATASET_FILE = "dataset.nnl"
MODEL_FILE = "model.json"
REPORT_FILE = "report.json"
SUMMARY_FILE = "summary.csv"
EVAL_FILE = "eval.json"
SWEEP_FILE = "sweep.csv"


def _output_dir(config: ExperimentConfig) -> Path:
    out = Path(config.paths.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _record_history(out: Path, reports: Sequence[ExperimentReport]) -> None:
    repo = RunRepository(str(out / HISTORY_DB_NAME))
    try:
        for report in reports:
            doc_id = repo.insert_report(report)
            logger.info(f"Report stored with ID: {doc_id}")
    finally:
        repo.close()


def _dataset_path(config: ExperimentConfig) -> Path:
    if config.paths.dataset:
        return Path(config.paths.dataset)
    return Path(config.paths.output_dir) / DATASET_FILE


def cmd_gen(config: ExperimentConfig) -> Path:
    """Generate the configured synthetic dataset and write it to disk."""
    dataset = generate_dataset(config.data, config.seed)
    path = write_dataset(dataset, _dataset_path(config))
    if config.paths.csv:
        export_csv(dataset, config.paths.csv)
    return path


def _load_training_data(config: ExperimentConfig):
    dataset = read_dataset(_dataset_path(config))
    if dataset.d != config.data.d:
        raise ConfigurationError(f"Dataset dimension {dataset.d} does not match configured d={config.data.d}")
    return dataset


def cmd_train(config: ExperimentConfig) -> ExperimentReport:
    """
    Train on the configured dataset.

    Writes the model, the full JSON report and a one-row CSV summary only after
    every stage succeeded.
    """
    dataset = _load_training_data(config)
    start = time.perf_counter()
    params, report = train(
        dataset,
        None,
        config.data.k,
        decomposition=config.decomposition,
        fourier=config.fourier,
        regression=config.regression,
        activation=config.data.activation,
        seed=config.seed,
        label=config.label,
        risk_samples=config.risk_samples,
    )
    wall_time = time.perf_counter() - start
    out = _output_dir(config)
    atomic_write(Path(config.paths.model) if config.paths.model else out / MODEL_FILE, params_to_json(params.to_record()))
    atomic_write(out / REPORT_FILE, report_to_json(report))
    write_rows([report_to_row(report, wall_time)], out / SUMMARY_FILE)
    _record_history(out, [report])
    logger.info(f"Training outputs written to {out}")
    return report


def cmd_eval(config: ExperimentConfig) -> ExperimentReport:
    """Score a saved network on a dataset and, given ground truth, against it."""
    dataset = _load_training_data(config)
    out = Path(config.paths.output_dir)
    model_path = Path(config.paths.model) if config.paths.model else out / MODEL_FILE
    try:
        record = params_from_json(model_path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigurationError(f"Cannot read model {model_path}: {e}") from e
    params = NetworkParams.from_record(record)
    report = build_report(dataset, params, label=config.label, seed=config.seed, risk_samples=config.risk_samples)
    out = _output_dir(config)
    atomic_write(out / EVAL_FILE, report_to_json(report))
    _record_history(out, [report])
    return report


def _failure_report(config: ExperimentConfig, seed: int, error: Exception) -> ExperimentReport:
    stage = error.stage if isinstance(error, StageError) else "validation"
    return ExperimentReport(
        label=config.label,
        status=f"failed:{stage}",
        target=config.data.target,
        d=config.data.d,
        k=config.data.k,
        n=config.data.n,
        seed=seed,
        activation=config.data.activation,
        warnings=[str(error)],
    )


def run_sweep_point(task: Tuple[ExperimentConfig, int, int]) -> Tuple[Dict[str, Any], Optional[float]]:
    """
    Generate and train one sweep point; failures become rows with a status.

    Returns:
        (report as a dictionary, wall time or None)
    """
    config, value, seed = task
    sweep = config.sweep
    data = config.data.copy(update={sweep.variable.value: value})
    point = config.copy(update={"data": data, "seed": seed})
    start = time.perf_counter()
    try:
        dataset = generate_dataset(point.data, seed)
        _, report = train(
            dataset,
            None,
            point.data.k,
            decomposition=point.decomposition,
            fourier=point.fourier,
            regression=point.regression,
            activation=point.data.activation,
            seed=seed,
            label=point.label,
            risk_samples=point.risk_samples,
        )
    except Exception as e:
        logger.error(f"Sweep point {sweep.variable.value}={value}, seed={seed} failed: {e}")
        report = _failure_report(point, seed, e)
    wall_time = time.perf_counter() - start if sweep.record_timings else None
    report = report.copy(update={"sweep_variable": sweep.variable.value, "sweep_value": float(value)})
    if not sweep.record_timings:
        report = report.copy(update={"timings": {}})
    return report.dict(), wall_time


def cmd_sweep(config: ExperimentConfig) -> List[ExperimentReport]:
    """
    Run every (value, seed) pair of the sweep.

    Rows are ordered by sweep value, then seed, whatever the worker count.
    """
    sweep = config.sweep
    tasks = [(config, value, seed) for value in sweep.values for seed in sweep.seeds]
    logger.info(f"Sweeping {sweep.variable.value} over {len(sweep.values)} values x {len(sweep.seeds)} seeds")
    if sweep.workers > 1:
        with ProcessPoolExecutor(max_workers=sweep.workers) as pool:
            results = list(pool.map(run_sweep_point, tasks))
    else:
        results = [run_sweep_point(task) for task in tasks]
    reports = [ExperimentReport(**values) for values, _ in results]
    out = _output_dir(config)
    write_rows([report_to_row(report, wall) for report, (_, wall) in zip(reports, results)], out / SWEEP_FILE)
    _record_history(out, reports)
    failed = sum(report.status != "ok" for report in reports)
    logger.info(f"Sweep finished: {len(reports)} rows, {failed} failed")
    return reports


COMMANDS = {
    Mode.GEN: cmd_gen,
    Mode.TRAIN: cmd_train,
    Mode.EVAL: cmd_eval,
    Mode.SWEEP: cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nnlift", description="Train two-layer networks through moment tensors")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for mode in Mode:
        sub = subparsers.add_parser(mode.value, help=COMMANDS[mode].__doc__.strip().splitlines()[0])
        sub.add_argument("--config", required=True, help="INI or JSON run configuration")
        sub.add_argument("--seed", type=int, help="Override the master seed")
        sub.add_argument("--out", help="Override the output directory")
        sub.add_argument("--parallel", type=int, metavar="W", help="Worker count for sweeps and restarts")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {"mode": args.command}
    if args.seed is not None:
        overrides["seed"] = args.seed
    return overrides


def _apply_cli_paths(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    output_dir = args.out or OUTPUT_DIR
    if output_dir:
        config = config.copy(update={"paths": config.paths.copy(update={"output_dir": output_dir})})
    if args.parallel is not None and args.parallel > 0:
        if config.sweep is not None:
            config = config.copy(update={"sweep": config.sweep.copy(update={"workers": args.parallel})})
        else:
            config = config.copy(update={"decomposition": config.decomposition.copy(update={"workers": args.parallel})})
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run the subcommand and map failures to exit codes.

    Returns:
        0 on success, 1 on validation errors, the stage's code on stage failures
    """
    logging.basicConfig(level=LOG_LEVEL, format=LOG_FORMAT)
    args = build_parser().parse_args(argv)
    try:
        config = _apply_cli_paths(load_config(args.config, _overrides(args)), args)
    except ValidationError as e:
        fields = ", ".join(".".join(str(part) for part in err["loc"]) for err in e.errors())
        logger.error(f"Invalid configuration ({fields}): {e}")
        return EXIT_CODES["validation"]
    except ConfigurationError as e:
        logger.error(str(e))
        return EXIT_CODES["validation"]

    try:
        COMMANDS[config.mode](config)
    except StageError as e:
        logger.error(str(e))
        return e.exit_code
    except (NNLiftError, ValidationError) as e:
        logger.error(f"{config.mode.value} failed: {e}")
        return EXIT_CODES["validation"]
    return EXIT_CODES["ok"]


if __name__ == "__main__":
    sys.exit(main())
