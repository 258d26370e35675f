"""ECG beat records and datasets"""
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np

from ecgbench.core.config import settings
from ecgbench.core.exceptions import DataError

NUM_FEATURES = settings.NUM_FEATURES
NUM_CLASSES = settings.NUM_CLASSES


@dataclass(frozen=True)
class BeatRecord:
    """One segmented heartbeat: 187 normalized amplitudes and a class label 0..4"""

    samples: np.ndarray
    label: int
    record_id: int = -1

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.shape != (NUM_FEATURES,):
            raise DataError(f"A beat has exactly {NUM_FEATURES} samples, got {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise DataError("Beat samples must be finite")
        if not 0 <= int(self.label) < NUM_CLASSES:
            raise DataError(f"Label {self.label} outside 0..{NUM_CLASSES - 1}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "label", int(self.label))


class Dataset:
    """
    Immutable collection of beats stored column-wise.

    ``features`` is [N, 187], ``labels`` is [N] and ``record_ids`` gives every
    record a stable identity through splits and resampling.
    """

    def __init__(self, features: np.ndarray, labels: np.ndarray, record_ids: Optional[np.ndarray] = None):
        features = np.array(features, dtype=np.float64)
        labels = np.array(labels, dtype=np.int64)
        if features.ndim != 2 or features.shape[1] != NUM_FEATURES:
            raise DataError(f"Features must be [N, {NUM_FEATURES}], got {features.shape}")
        if labels.shape != (features.shape[0],):
            raise DataError(f"Got {labels.shape[0]} labels for {features.shape[0]} records")
        if features.shape[0] == 0:
            raise DataError("empty dataset")
        if not np.all(np.isfinite(features)):
            raise DataError("Beat samples must be finite")
        if np.any(labels < 0) or np.any(labels >= NUM_CLASSES):
            raise DataError(f"Labels must lie in 0..{NUM_CLASSES - 1}")
        if record_ids is None:
            record_ids = np.arange(features.shape[0])
        record_ids = np.array(record_ids, dtype=np.int64)
        if record_ids.shape != labels.shape:
            raise DataError("One record id per record is required")
        for array in (features, labels, record_ids):
            array.setflags(write=False)
        self.features = features
        self.labels = labels
        self.record_ids = record_ids

    @classmethod
    def from_records(cls, records: Sequence[BeatRecord]) -> "Dataset":
        if not records:
            raise DataError("empty dataset")
        ids = [r.record_id if r.record_id >= 0 else k for k, r in enumerate(records)]
        return cls(np.stack([r.samples for r in records]), [r.label for r in records], ids)

    def __len__(self) -> int:
        return self.features.shape[0]

    def __iter__(self) -> Iterator[BeatRecord]:
        return iter(self.records)

    def __repr__(self):
        return f"<Dataset {len(self)} records {self.class_histogram}>"

    @property
    def records(self) -> List[BeatRecord]:
        return [
            BeatRecord(self.features[k], int(self.labels[k]), int(self.record_ids[k]))
            for k in range(len(self))
        ]

    @property
    def class_histogram(self) -> Dict[int, int]:
        counts = np.bincount(self.labels, minlength=NUM_CLASSES)
        return {label: int(counts[label]) for label in range(NUM_CLASSES)}

    def subset(self, indices: Sequence[int]) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[indices], self.labels[indices], self.record_ids[indices])

    def with_features(self, features: np.ndarray) -> "Dataset":
        return Dataset(features, self.labels, self.record_ids)
