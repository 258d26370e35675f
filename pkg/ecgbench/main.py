"""Command-line entry point

Usage:
    python -m ecgbench synth --per-class 100 --seed 7 -o data.csv
    python -m ecgbench train --model cnn --data synth:100 --seed 7
    python -m ecgbench bench --models lstm,cnn,rnn,dbn --data synth:500
    python -m ecgbench macs --model toy-cnn --clock 100e6 --array 8x8
    python -m ecgbench report runs/bench.json

Exit codes: 0 success, 1 usage error, 2 input-data error, 3 runtime/numeric failure.
"""
import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from ecgbench import __version__
from ecgbench.core.config import settings
from ecgbench.core.exceptions import DataError, EcgBenchError, UsageError
from ecgbench.models.network import ModelKind, build_model, input_shape_for
from ecgbench.schemas.artifact import BENCH_SCHEMA, BenchArtifact, RunArtifact
from ecgbench.schemas.config import (
    DataSource,
    NoiseSpec,
    OptimizerKind,
    RunConfig,
    SmoteSpec,
    SplitSpec,
    TrainConfig,
)
from ecgbench.schemas.perf import AcceleratorSpec, CountMode
from ecgbench.services import report_service
from ecgbench.services.cost_model_service import (
    analyze_model,
    estimate_accelerator_latency,
    mac_total,
    mixed_mode_warning,
)
from ecgbench.services.data_service import synth_generate, write_csv
from ecgbench.services.pipeline_service import run_bench, run_model
from ecgbench.utils.logger import logger, set_verbose

MAC_MODELS = [kind.value for kind in ModelKind] + ["toy-cnn"]


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info(f"Wrote {path}")
    return path


def _parse_models(value: str) -> List[ModelKind]:
    models = []
    for name in (part.strip() for part in value.split(",")):
        if not name:
            continue
        try:
            models.append(ModelKind(name))
        except ValueError:
            raise UsageError(f"Unknown model: {name}") from None
    if not models:
        raise UsageError("At least one model is required")
    return models


def _data_source(args) -> DataSource:
    try:
        return DataSource.parse_flag(args.data, args.seed)
    except ValueError as e:
        raise UsageError(f"Invalid --data {args.data!r}: {e}") from None


def _run_overrides(args) -> dict:
    return {
        "noise": NoiseSpec(sigma=args.noise_sigma),
        "split": SplitSpec(train_fraction=args.train_fraction),
        "smote": SmoteSpec(enabled=not args.no_smote, k_neighbors=args.smote_k),
        "train": TrainConfig(
            epochs=args.epochs,
            learning_rate=args.lr,
            batch_size=args.batch_size,
            optimizer=args.optimizer,
            patience=args.patience,
            min_delta=args.min_delta,
            clip_norm=args.clip_norm,
            rbm_epochs=args.rbm_epochs,
        ),
        "output_dir": args.out_dir,
    }


def _print_rows(rows) -> None:
    print(report_service.render_text(rows), end="")


def cmd_synth(args) -> int:
    """Write a synthetic beat CSV and print its class histogram"""
    if args.per_class < 1:
        raise UsageError("--per-class must be >= 1")
    ds = synth_generate([args.per_class] * settings.NUM_CLASSES, args.seed)
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    write_csv(ds, output)
    for label, count in ds.class_histogram.items():
        print(f"class {label}: {count}")
    return 0


def _write_run_outputs(artifact: RunArtifact, out_dir: Path) -> None:
    stem = f"{artifact.config.model.value}_seed{artifact.config.seeds.base}"
    _write_text(out_dir / f"{stem}.json", artifact.to_text())
    _write_text(out_dir / f"{stem}_history.csv", report_service.history_csv(artifact.history))


def cmd_train(args) -> int:
    """Train one model, write its RunArtifact and print its comparison row"""
    config = RunConfig.from_seed(ModelKind(args.model), _data_source(args), args.seed, **_run_overrides(args))
    artifact = run_model(config, latency_repeats=args.repeats)
    _write_run_outputs(artifact, Path(args.out_dir))
    _print_rows(report_service.comparison_table([artifact]))
    return 0


def cmd_bench(args) -> int:
    """Train every selected model on one shared split and print the combined table"""
    models = _parse_models(args.models)
    bench = run_bench(
        models, _data_source(args), args.seed, workers=args.workers,
        latency_repeats=args.repeats, **_run_overrides(args),
    )
    out_dir = Path(args.out_dir)
    rows = report_service.comparison_table(bench.runs)
    _write_text(out_dir / "bench.json", bench.to_text())
    _write_text(out_dir / "bench.csv", report_service.render_csv(rows))
    for run in bench.runs:
        _write_text(out_dir / f"{run.config.model.value}_history.csv", report_service.history_csv(run.history))
    _print_rows(rows)
    return 0


def _print_costs(costs, mode: CountMode) -> int:
    total = mac_total(costs)
    print(f"[{mode.value}]")
    rows = [["layer", "kind", "macs", "note"]]
    rows += [[c.layer_id, c.kind.value, f"{c.macs:,}", c.note or ""] for c in costs]
    rows.append(["total", "", f"{total:,}", mixed_mode_warning(costs) or ""])
    _print_rows(rows)
    return total


def cmd_macs(args) -> int:
    """Per-layer MAC counts, optional accelerator estimate and reference tables"""
    spec = None
    if args.clock is not None or args.array is not None:
        try:
            spec = AcceleratorSpec.from_array(
                args.array or settings.ACCELERATOR_ARRAY,
                args.clock if args.clock is not None else settings.ACCELERATOR_CLOCK_HZ,
            )
        except ValueError as e:
            raise UsageError(str(e)) from None

    if args.scenario == "table3":
        _print_rows(report_service.implementation_table(spec, args.efficiency))
    else:
        model = build_model(args.model, args.seed)
        shape = input_shape_for(args.model)
        if args.mode == "both":
            modes = [CountMode.PAPER, CountMode.EXACT]
        else:
            modes = [CountMode.PAPER if args.mode == "paper" else CountMode(args.mode)]
        totals = {mode: _print_costs(analyze_model(model, shape, mode), mode) for mode in modes}
        if len(totals) == 2:
            delta = totals[CountMode.EXACT] - totals[CountMode.PAPER]
            print(f"exact - paper_formula = {delta:,}")
        if spec is not None:
            macs = totals.get(CountMode.EXACT, next(iter(totals.values())))
            latency = estimate_accelerator_latency(macs, spec, args.efficiency)
            print(
                f"Estimated latency on {spec.name} @ {spec.clock_hz / 1e6:g} MHz "
                f"(efficiency {args.efficiency:g}): {latency:.6e} s"
            )

    if args.resources:
        _print_rows(report_service.resource_table())
    return 0


def _read_artifacts(path: Path) -> List[RunArtifact]:
    try:
        text = path.read_text(encoding="utf-8")
        if json.loads(text).get("schema_version") == BENCH_SCHEMA:
            return BenchArtifact.from_text(text).runs
        return [RunArtifact.from_text(text)]
    except OSError as e:
        raise DataError(f"Cannot read artifact {path}: {e}") from None
    except (ValueError, AttributeError) as e:
        logger.error(f"Corrupt artifact {path}: {e}")
        raise DataError(f"Corrupt artifact {path}") from None


def cmd_report(args) -> int:
    """Combine artifacts into aligned text and CSV tables with a version column"""
    if not args.artifacts:
        raise UsageError("At least one artifact file is required")
    runs = []
    for name in args.artifacts:
        runs.extend(_read_artifacts(Path(name)))
    rows = report_service.comparison_table(runs, with_version=True)
    out_dir = Path(args.out_dir)
    _write_text(out_dir / "report.txt", report_service.render_text(rows))
    _write_text(out_dir / "report.csv", report_service.render_csv(rows))
    _print_rows(rows)
    return 0


def _add_training_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="Beat CSV path or synth:N (N beats per class)")
    parser.add_argument("--epochs", type=int, default=settings.EPOCHS)
    parser.add_argument("--batch-size", type=int, default=settings.BATCH_SIZE)
    parser.add_argument("--lr", type=float, default=settings.LEARNING_RATE, help="Learning rate")
    parser.add_argument("--optimizer", choices=[o.value for o in OptimizerKind], default=settings.OPTIMIZER)
    parser.add_argument("--patience", type=int, default=settings.PATIENCE)
    parser.add_argument("--min-delta", type=float, default=settings.MIN_DELTA)
    parser.add_argument("--clip-norm", type=float, default=settings.CLIP_NORM, help="Gradient-norm cap, 0 disables")
    parser.add_argument("--noise-sigma", type=float, default=settings.NOISE_SIGMA)
    parser.add_argument("--train-fraction", type=float, default=settings.TRAIN_FRACTION)
    parser.add_argument("--smote-k", type=int, default=settings.SMOTE_K)
    parser.add_argument("--no-smote", action="store_true", help="Skip SMOTE rebalancing")
    parser.add_argument("--rbm-epochs", type=int, default=settings.RBM_EPOCHS)
    parser.add_argument("--repeats", type=int, default=settings.LATENCY_REPEATS, help="Timed inference passes")


def build_parser() -> CliParser:
    common = CliParser(add_help=False)
    common.add_argument("--seed", type=int, default=settings.DEFAULT_SEED, help="Base seed of the run")
    common.add_argument("--out-dir", default=settings.OUTPUT_DIR, help="Directory for artifacts")
    common.add_argument("--verbose", action="store_true", help="Debug logging")

    parser = CliParser(
        prog="ecgbench",
        description="Train, benchmark and cost-model ECG beat classifiers",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", parents=[common], help="Generate a synthetic beat CSV")
    synth.add_argument("--per-class", type=int, required=True)
    synth.add_argument("-o", "--output", required=True)
    synth.set_defaults(handler=cmd_synth)

    train = commands.add_parser("train", parents=[common], help="Train and evaluate one model")
    train.add_argument("--model", required=True, choices=[kind.value for kind in ModelKind])
    _add_training_flags(train)
    train.set_defaults(handler=cmd_train)

    bench = commands.add_parser("bench", parents=[common], help="Compare several models on one split")
    bench.add_argument("--models", default=",".join(kind.value for kind in ModelKind))
    bench.add_argument("--workers", type=int, default=1, help="Models trained in parallel")
    _add_training_flags(bench)
    bench.set_defaults(handler=cmd_bench)

    macs = commands.add_parser("macs", parents=[common], help="Per-layer MAC analysis")
    macs.add_argument("--model", choices=MAC_MODELS, default="toy-cnn")
    macs.add_argument("--mode", choices=["paper", "paper_formula", "exact", "both"], default="both")
    macs.add_argument("--clock", type=float, help="Accelerator clock in Hz")
    macs.add_argument("--array", help="MAC array geometry, e.g. 8x8")
    macs.add_argument("--efficiency", type=float, default=settings.ACCELERATOR_EFFICIENCY)
    macs.add_argument("--scenario", choices=["table3"], help="Print the prior-implementation comparison")
    macs.add_argument("--resources", action="store_true", help="Print the FPGA resource utilization")
    macs.set_defaults(handler=cmd_macs)

    report = commands.add_parser("report", parents=[common], help="Render tables from artifact files")
    report.add_argument("artifacts", nargs="*")
    report.set_defaults(handler=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand and map failures to exit codes"""
    try:
        args = build_parser().parse_args(argv)
        set_verbose(args.verbose)
        return args.handler(args)
    except EcgBenchError as e:
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        print(f"error: invalid configuration: {e}", file=sys.stderr)
        return UsageError.exit_code
    except (OSError, ValueError, ArithmeticError) as e:
        logger.error(f"Run failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EcgBenchError.exit_code


if __name__ == "__main__":
    sys.exit(main())
