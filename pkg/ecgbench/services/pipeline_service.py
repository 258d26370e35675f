"""End-to-end run orchestration: data preparation, training, evaluation and cost analysis"""
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from ecgbench.core.config import settings
from ecgbench.core.tensor import RngStream
from ecgbench.models.beats import NUM_CLASSES, Dataset
from ecgbench.models.network import MinMaxLayer, ModelKind, Sequential, build_model, input_shape_for
from ecgbench.models.rbm import pretrain_layerwise
from ecgbench.schemas.artifact import BenchArtifact, RunArtifact
from ecgbench.schemas.config import DataSource, RunConfig
from ecgbench.schemas.perf import CountMode
from ecgbench.services.cost_model_service import analyze_model, build_perf_report, mac_total, measure_latency
from ecgbench.services.data_service import (
    ScalerParams,
    SmoteDraw,
    add_gaussian_noise,
    load_csv,
    smote_oversample,
    split_train_val,
    standard_scale,
    synth_generate,
)
from ecgbench.services.metrics_service import evaluate
from ecgbench.services.trainer_service import fit
from ecgbench.utils.logger import logger


@dataclass
class PreparedData:
    """Train/validation partitions ready for fitting"""
    train: Dataset
    val: Dataset
    scaler: ScalerParams
    smote_draws: List[SmoteDraw] = field(default_factory=list)


def load_source(source: DataSource) -> Dataset:
    if source.csv_path is not None:
        return load_csv(source.csv_path)
    return synth_generate([source.synthetic_per_class] * NUM_CLASSES, source.synthetic_seed)


def prepare_data(config: RunConfig) -> PreparedData:
    """
    load -> noise -> split -> SMOTE (train only) -> scale (train statistics)

    Args:
        config: run configuration; only its data, noise, split and smote parts are read

    Returns:
        PreparedData with scaled partitions
    """
    ds = load_source(config.data)
    ds = add_gaussian_noise(ds, config.noise)
    train, val = split_train_val(ds, config.split)
    draws: List[SmoteDraw] = []
    if config.smote.enabled:
        train = smote_oversample(train, config.smote.k_neighbors, config.smote.seed, draw_log=draws)
    train, (val,), scaler = standard_scale(train, [val])
    return PreparedData(train=train, val=val, scaler=scaler, smote_draws=draws)


def _pretrain_dbn(model: Sequential, train: Dataset, config: RunConfig) -> None:
    minmax = model.layers[0]
    if not isinstance(minmax, MinMaxLayer):
        raise TypeError("DBN network must start with its min-max layer")
    minmax.fit(train.features)
    pretrain_layerwise(
        model.dbn,
        minmax.forward(train.features),
        epochs=config.train.rbm_epochs,
        lr=config.train.rbm_learning_rate,
        rng=RngStream(config.seeds.pretrain),
        batch_size=config.train.batch_size,
    )


def run_model(config: RunConfig, prepared: Optional[PreparedData] = None,
              latency_repeats: int = settings.LATENCY_REPEATS) -> RunArtifact:
    """
    Train and evaluate one model, then attach its MAC count and timing

    Args:
        config: run configuration
        prepared: shared partitions; prepared from ``config`` when omitted
        latency_repeats: timed inference passes over the validation set

    Returns:
        RunArtifact for the run
    """
    if prepared is None:
        prepared = prepare_data(config)
    kind = config.model.value
    model = build_model(kind, config.seeds.init)

    try:
        started = time.perf_counter()
        if config.model == ModelKind.DBN:
            _pretrain_dbn(model, prepared.train, config)
        model, history = fit(model, prepared.train, prepared.val, config.train)
        training_time_s = time.perf_counter() - started
    except Exception as e:
        logger.error(f"Error training {kind}: {e}")
        raise

    metrics = evaluate(model, prepared.val, training_time_s=training_time_s)
    total_macs = mac_total(analyze_model(model, input_shape_for(kind), CountMode.EXACT))
    latency = measure_latency(model, prepared.val, latency_repeats)
    perf = build_perf_report(total_macs, latency.total_time_s, latency.num_samples * latency.repeats)
    logger.info(
        f"[{kind}] accuracy={metrics.accuracy:.4f} macro_f1={metrics.macro_f1:.4f} "
        f"macs={total_macs} latency={perf.simulation_time_s_per_sample * 1e3:.4f} ms "
        f"(min {latency.per_sample_min_s * 1e3:.4f} ms)"
    )
    return RunArtifact(config=config, metrics=metrics, perf=perf, latency=latency, history=history)


def run_bench(models: Sequence[ModelKind], data: DataSource, seed: int, workers: int = 1,
              latency_repeats: int = settings.LATENCY_REPEATS, **overrides) -> BenchArtifact:
    """
    Run several models on one shared split

    Every model gets the same seed manifest, so the data partitions are
    identical. Training may run on ``workers`` threads; latency measurement is
    serialized by the cost model's exclusive-run lock. Runs come back in
    ``models`` order.
    """
    if not models:
        raise ValueError("At least one model is required")
    configs = [RunConfig.from_seed(model, data, seed, **dict(overrides)) for model in models]
    prepared = prepare_data(configs[0])
    logger.info(
        f"Benchmarking {', '.join(m.value for m in models)} on "
        f"{len(prepared.train)} train / {len(prepared.val)} validation beats"
    )
    if workers <= 1:
        runs = [run_model(config, prepared, latency_repeats) for config in configs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(lambda config: run_model(config, prepared, latency_repeats), configs))
    return BenchArtifact(runs=runs)
