"""Pydantic schemas for run configuration, reports and artifacts"""
from ecgbench.schemas.config import (
    DataSource,
    NoiseSpec,
    OptimizerKind,
    RunConfig,
    SeedManifest,
    SmoteSpec,
    SplitSpec,
    TrainConfig,
)
from ecgbench.schemas.metrics import EpochRecord, MetricsReport, TrainingHistory
from ecgbench.schemas.perf import AcceleratorSpec, CountMode, LatencyMeasurement, LayerCost, LayerKind, PerfReport
from ecgbench.schemas.artifact import BenchArtifact, RunArtifact

__all__ = [
    "DataSource",
    "NoiseSpec",
    "OptimizerKind",
    "RunConfig",
    "SeedManifest",
    "SmoteSpec",
    "SplitSpec",
    "TrainConfig",
    "EpochRecord",
    "MetricsReport",
    "TrainingHistory",
    "AcceleratorSpec",
    "CountMode",
    "LatencyMeasurement",
    "LayerCost",
    "LayerKind",
    "PerfReport",
    "BenchArtifact",
    "RunArtifact",
]
