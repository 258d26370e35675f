"""Training history and evaluation metric schemas"""
from typing import List

from pydantic import BaseModel, Field, validator


class EpochRecord(BaseModel):
    """Losses of one epoch; wall_clock_s is the only timing field"""
    epoch: int = Field(..., ge=1)
    train_loss: float
    val_loss: float
    wall_clock_s: float = Field(..., ge=0.0)


class TrainingHistory(BaseModel):
    """Per-epoch learning curve"""
    epochs: List[EpochRecord] = []
    best_epoch: int = 0
    stopped_early: bool = False

    @property
    def training_time_s(self) -> float:
        return sum(record.wall_clock_s for record in self.epochs)

    @property
    def val_losses(self) -> List[float]:
        return [record.val_loss for record in self.epochs]


class MetricsReport(BaseModel):
    """Evaluation metrics in the comparison-table columns"""
    accuracy: float = Field(..., ge=0.0, le=1.0)
    macro_precision: float = Field(..., ge=0.0, le=1.0)
    macro_recall: float = Field(..., ge=0.0, le=1.0)
    macro_f1: float = Field(..., ge=0.0, le=1.0)
    per_class_precision: List[float]
    per_class_recall: List[float]
    per_class_f1: List[float]
    confusion: List[List[int]] = Field(..., description="rows = true class, columns = predicted class")
    training_time_s: float = Field(0.0, ge=0.0)
    param_count: int = Field(0, ge=0)

    @validator("confusion")
    def confusion_is_square(cls, value):
        if any(len(row) != len(value) for row in value):
            raise ValueError("Confusion matrix must be square")
        return value
