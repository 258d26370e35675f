"""Run artifact schemas and their text serialization"""
from typing import List, Optional

from pydantic import BaseModel, Field

from ecgbench import __version__
from ecgbench.schemas.config import RunConfig
from ecgbench.schemas.metrics import MetricsReport, TrainingHistory
from ecgbench.schemas.perf import LatencyMeasurement, PerfReport

RUN_SCHEMA = "ecgbench.run/1"
BENCH_SCHEMA = "ecgbench.bench/1"


class RunArtifact(BaseModel):
    """Everything one training run produced, with its configuration embedded"""
    schema_version: str = RUN_SCHEMA
    tool_version: str = __version__
    config: RunConfig
    metrics: MetricsReport
    perf: PerfReport
    latency: Optional[LatencyMeasurement] = None
    history: TrainingHistory

    def to_text(self) -> str:
        return self.json(indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunArtifact":
        return cls.parse_raw(text)


class BenchArtifact(BaseModel):
    """Runs of several models over one shared data split"""
    schema_version: str = BENCH_SCHEMA
    tool_version: str = __version__
    runs: List[RunArtifact] = Field(..., min_items=1)

    def to_text(self) -> str:
        return self.json(indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "BenchArtifact":
        return cls.parse_raw(text)
