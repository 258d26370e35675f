"""Cost-model schemas"""
import enum
from typing import Optional

from pydantic import BaseModel, Field, validator


class LayerKind(str, enum.Enum):
    """Layer categories counted by the MAC model"""
    CONV = "conv"
    POOL = "pool"
    FC = "fc"
    RECURRENT = "recurrent"
    OTHER = "other"


class CountMode(str, enum.Enum):
    """paper_formula applies the closed-form counts literally; exact counts real multiply-accumulates"""
    PAPER = "paper_formula"
    EXACT = "exact"


class LayerCost(BaseModel):
    """MAC count of one layer"""
    layer_id: str
    kind: LayerKind
    macs: int = Field(..., ge=0)
    mode: CountMode
    note: Optional[str] = None


class PerfReport(BaseModel):
    """Latency and throughput derived from a MAC count and a timed inference run"""
    total_macs: int = Field(..., ge=0, description="MACs per inference")
    total_inference_time_s: float = Field(..., ge=0.0)
    num_samples: int = Field(..., ge=1)
    simulation_time_s_per_sample: float = Field(..., ge=0.0)
    throughput_macs_per_s: float = Field(..., ge=0.0)
    throughput_gops: float = Field(..., ge=0.0, description="1 MAC counted as 1 operation")


class AcceleratorSpec(BaseModel):
    """Idealized MAC-array accelerator"""
    name: str = "mac-array"
    clock_hz: float = Field(..., gt=0.0)
    macs_per_cycle: int = Field(..., ge=1)

    @classmethod
    def from_array(cls, array: str, clock_hz: float, name: Optional[str] = None) -> "AcceleratorSpec":
        """Parse an array geometry such as ``8x8``"""
        try:
            rows, cols = (int(part) for part in array.lower().split("x"))
        except ValueError:
            raise ValueError(f"Array must look like ROWSxCOLS, got {array!r}") from None
        return cls(name=name or f"{rows}x{cols}", clock_hz=clock_hz, macs_per_cycle=rows * cols)


class LatencyMeasurement(BaseModel):
    """Wall-clock inference timing over repeated full passes"""
    repeats: int = Field(..., ge=1)
    num_samples: int = Field(..., ge=1)
    total_time_s: float = Field(..., ge=0.0)
    per_sample_min_s: float = Field(..., ge=0.0)
    per_sample_mean_s: float = Field(..., ge=0.0)
    per_sample_std_s: float = Field(..., ge=0.0)

    @validator("per_sample_mean_s")
    def mean_not_below_min(cls, value, values):
        minimum = values.get("per_sample_min_s")
        if minimum is not None and value < minimum:
            raise ValueError("Mean latency cannot be below the minimum")
        return value
