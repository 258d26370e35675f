"""Unit tests for run configuration and artifact schemas"""
import pytest
from pydantic import ValidationError

from ecgbench.models.network import ModelKind
from ecgbench.schemas.artifact import BENCH_SCHEMA, RUN_SCHEMA, BenchArtifact, RunArtifact
from ecgbench.schemas.config import DataSource, RunConfig, SeedManifest, TrainConfig


def test_run_artifact_text_round_trip(make_artifact):
    """Test serialization is byte-identical after a reload"""
    artifact = make_artifact()
    text = artifact.to_text()
    reloaded = RunArtifact.from_text(text)
    assert reloaded == artifact
    assert reloaded.to_text() == text
    assert reloaded.schema_version == RUN_SCHEMA


def test_bench_artifact_round_trip(make_artifact):
    """Test a two-run bench artifact reloads identically"""
    bench = BenchArtifact(runs=[make_artifact("cnn"), make_artifact("dbn")])
    reloaded = BenchArtifact.from_text(bench.to_text())
    assert reloaded.to_text() == bench.to_text()
    assert reloaded.schema_version == BENCH_SCHEMA
    assert [run.config.model for run in reloaded.runs] == [ModelKind.CNN, ModelKind.DBN]


def test_bench_artifact_requires_runs():
    """Test an empty bench is invalid"""
    with pytest.raises(ValidationError):
        BenchArtifact(runs=[])


def test_seed_manifest_offsets():
    """Test every stream seed derives from the base seed"""
    seeds = SeedManifest.from_base(10)
    assert (seeds.data, seeds.noise, seeds.split, seeds.smote, seeds.init, seeds.train, seeds.pretrain) == \
        (10, 11, 12, 13, 14, 15, 16)


def test_run_config_from_seed_propagates_seeds():
    """Test nested specs take their seeds from the manifest while keeping overrides"""
    config = RunConfig.from_seed(ModelKind.LSTM, DataSource(synthetic_per_class=5), 3,
                                 train=TrainConfig(epochs=2))
    assert config.noise.seed == 4
    assert config.split.seed == 5
    assert config.smote.seed == 6
    assert config.train.seed == 8
    assert config.train.epochs == 2
    assert config.data.synthetic_seed == 3


def test_data_source_exactly_one():
    """Test the dataset source must be a CSV path or a synthetic count, not both or neither"""
    with pytest.raises(ValidationError):
        DataSource()
    with pytest.raises(ValidationError):
        DataSource(csv_path="a.csv", synthetic_per_class=3)
    assert DataSource.parse_flag("synth:12", 4).synthetic_per_class == 12
    assert DataSource.parse_flag("beats.csv", 4).csv_path == "beats.csv"


def test_train_config_validation():
    """Test out-of-range hyperparameters are rejected"""
    with pytest.raises(ValidationError):
        TrainConfig(epochs=0)
    with pytest.raises(ValidationError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ValidationError):
        TrainConfig(optimizer="rmsprop")
