"""Pytest configuration and fixtures"""
import numpy as np
import pytest

from ecgbench.core.tensor import RngStream
from ecgbench.models.beats import NUM_FEATURES, Dataset
from ecgbench.models.network import ModelKind
from ecgbench.schemas.artifact import RunArtifact
from ecgbench.schemas.config import DataSource, RunConfig
from ecgbench.schemas.metrics import EpochRecord, TrainingHistory
from ecgbench.schemas.perf import LatencyMeasurement
from ecgbench.services.cost_model_service import build_perf_report
from ecgbench.services.data_service import synth_generate, write_csv
from ecgbench.services.metrics_service import metrics_from_predictions


@pytest.fixture
def rng() -> RngStream:
    """Fresh seeded stream per test"""
    return RngStream(1234)


@pytest.fixture(scope="session")
def synthetic_beats() -> Dataset:
    """40 synthetic beats per class"""
    return synth_generate([40] * 5, seed=11)


@pytest.fixture
def random_dataset():
    """Factory for random-feature datasets with the given labels"""

    def make(labels, seed: int = 0) -> Dataset:
        features = RngStream(seed).standard_normal((len(labels), NUM_FEATURES))
        return Dataset(features, np.asarray(labels))

    return make


@pytest.fixture
def beat_csv(tmp_path, synthetic_beats):
    """Synthetic beats written in the 188-column CSV format"""
    return write_csv(synthetic_beats, tmp_path / "beats.csv")


@pytest.fixture
def make_row():
    """One CSV row (187 samples + label) as text"""

    def make(label=0, value=0.5, fields: int = NUM_FEATURES) -> str:
        return ",".join([str(value)] * fields + [str(label)])

    return make


@pytest.fixture
def make_artifact():
    """Factory for hand-built run artifacts (no training involved)"""

    def make(model: str = "cnn", seed: int = 7, tool_version: str = None) -> RunArtifact:
        config = RunConfig.from_seed(ModelKind(model), DataSource(synthetic_per_class=10), seed)
        y_true = np.array([0, 0, 1, 1, 2, 3, 4, 4])
        y_pred = np.array([0, 1, 1, 1, 2, 3, 4, 0])
        metrics = metrics_from_predictions(y_true, y_pred, training_time_s=12.5, param_count=7285)
        history = TrainingHistory(
            epochs=[
                EpochRecord(epoch=1, train_loss=1.2, val_loss=1.0, wall_clock_s=6.0),
                EpochRecord(epoch=2, train_loss=0.8, val_loss=0.9, wall_clock_s=6.5),
            ],
            best_epoch=2,
        )
        latency = LatencyMeasurement(
            repeats=2, num_samples=100, total_time_s=0.4,
            per_sample_min_s=0.0015, per_sample_mean_s=0.002, per_sample_std_s=0.0005,
        )
        extra = {} if tool_version is None else {"tool_version": tool_version}
        return RunArtifact(
            config=config,
            metrics=metrics,
            perf=build_perf_report(23376, 0.4, 200),
            latency=latency,
            history=history,
            **extra,
        )

    return make
