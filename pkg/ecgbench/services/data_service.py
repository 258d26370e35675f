"""Beat dataset ingestion, synthesis, augmentation, rebalancing, scaling and splitting"""
import csv
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.model_selection import train_test_split
from sklearn.neighbors import NearestNeighbors
from sklearn.preprocessing import StandardScaler

from ecgbench.core.exceptions import DataError
from ecgbench.core.tensor import RngStream
from ecgbench.models.beats import NUM_CLASSES, NUM_FEATURES, Dataset
from ecgbench.schemas.config import NoiseSpec, SplitSpec
from ecgbench.utils.logger import logger

# (center, width, amplitude) Gaussian bumps per class, sample-index units
WAVEFORM_TEMPLATES = {
    0: [(40, 6.0, 0.15), (70, 3.0, 1.00), (120, 10.0, 0.30)],
    1: [(25, 5.0, 0.25), (55, 3.0, 0.90), (105, 10.0, 0.30)],
    2: [(70, 9.0, 1.10), (130, 12.0, -0.35)],
    3: [(40, 6.0, 0.10), (70, 6.0, 0.80), (125, 10.0, 0.15)],
    4: [(60, 1.5, 0.90), (75, 7.0, 0.70), (140, 12.0, 0.25)],
}
BASELINE = 0.2
SYNTH_NOISE = 0.01


@dataclass(frozen=True)
class SmoteDraw:
    """One synthetic point: source + gap * (neighbor - source)"""

    source_id: int
    neighbor_id: int
    gap: float
    synthetic_id: int


@dataclass
class ScalerParams:
    mean: np.ndarray
    scale: np.ndarray


def _parse_float(field: str, row_number: int, column: int) -> float:
    try:
        value = float(field)
    except ValueError:
        raise DataError(f"Row {row_number}, column {column + 1}: non-numeric field {field!r}") from None
    if not np.isfinite(value):
        raise DataError(f"Row {row_number}, column {column + 1}: non-finite value {field!r}")
    return value


def _is_numeric(field: str) -> bool:
    try:
        float(field)
        return True
    except ValueError:
        return False


def load_csv(path) -> Dataset:
    """
    Read a 188-column beat CSV (187 samples + trailing integer label)

    Args:
        path: CSV file; a header row is skipped when its first field is non-numeric

    Returns:
        Dataset in file row order
    """
    path = Path(path)
    features: List[List[float]] = []
    labels: List[int] = []
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            for row_number, row in enumerate(csv.reader(f), start=1):
                if not row:
                    continue
                if row_number == 1 and not _is_numeric(row[0]):
                    logger.debug(f"Skipping header row in {path}")
                    continue
                if len(row) != NUM_FEATURES + 1:
                    raise DataError(
                        f"Row {row_number}: expected {NUM_FEATURES + 1} fields, got {len(row)}"
                    )
                values = [_parse_float(field, row_number, k) for k, field in enumerate(row)]
                label = values[-1]
                if label != int(label) or not 0 <= int(label) < NUM_CLASSES:
                    raise DataError(f"Row {row_number}: label {row[-1]!r} outside 0..{NUM_CLASSES - 1}")
                features.append(values[:-1])
                labels.append(int(label))
    except FileNotFoundError:
        logger.error(f"Dataset not found: {path}")
        raise DataError(f"Dataset not found: {path}") from None
    except (OSError, UnicodeDecodeError, csv.Error) as e:
        logger.error(f"Cannot read dataset {path}: {e}")
        raise DataError(f"Cannot read dataset {path}: {e}") from e
    if not labels:
        raise DataError("empty dataset")
    ds = Dataset(np.array(features), np.array(labels))
    logger.info(f"Loaded {len(ds)} beats from {path}: {ds.class_histogram}")
    return ds


def write_csv(ds: Dataset, path) -> Path:
    """Write ``ds`` in the 188-column beat format (no header)"""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        for samples, label in zip(ds.features, ds.labels):
            writer.writerow([repr(float(v)) for v in samples] + [f"{float(label)!r}"])
    logger.info(f"Wrote {len(ds)} beats to {path}")
    return path


def synth_generate(n_per_class: Sequence[int], seed: int) -> Dataset:
    """
    Generate parametric beats: each class is a sum of Gaussian bumps with
    per-beat amplitude/position jitter plus small white noise.
    """
    counts = [int(c) for c in n_per_class]
    if len(counts) != NUM_CLASSES:
        raise DataError(f"Expected {NUM_CLASSES} class counts, got {len(counts)}")
    if any(c < 0 for c in counts):
        raise DataError("Class counts must be >= 0")
    if sum(counts) == 0:
        raise DataError("At least one synthetic beat is required")

    rng = RngStream(seed)
    t = np.arange(NUM_FEATURES, dtype=np.float64)
    features, labels = [], []
    for label, count in enumerate(counts):
        if count == 0:
            continue
        amplitude_jitter = rng.uniform((count, 1), 0.95, 1.05)
        shift = rng.uniform((count, 1), -1.0, 1.0)
        beats = np.full((count, NUM_FEATURES), BASELINE)
        for center, width, amplitude in WAVEFORM_TEMPLATES[label]:
            beats += amplitude * amplitude_jitter * np.exp(-0.5 * ((t - center - shift) / width) ** 2)
        beats += SYNTH_NOISE * rng.standard_normal((count, NUM_FEATURES))
        features.append(beats)
        labels.append(np.full(count, label))
    ds = Dataset(np.concatenate(features), np.concatenate(labels))
    logger.info(f"Generated {len(ds)} synthetic beats (seed={seed}): {ds.class_histogram}")
    return ds


def add_gaussian_noise(ds: Dataset, spec: NoiseSpec) -> Dataset:
    """Perturb every sample with i.i.d. N(0, sigma^2); labels and ids unchanged"""
    if spec.sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {spec.sigma}")
    if spec.sigma == 0:
        return ds.with_features(ds.features)
    noise = spec.sigma * RngStream(spec.seed).standard_normal(ds.features.shape)
    return ds.with_features(ds.features + noise)


def smote_oversample(ds: Dataset, k_neighbors: int, seed: int,
                     draw_log: Optional[List[SmoteDraw]] = None) -> Dataset:
    """
    Upsample every present class to the majority count with SMOTE

    Args:
        ds: dataset to rebalance (not modified)
        k_neighbors: neighbors considered per source point; clamped to class size - 1
        seed: seed of the draw stream
        draw_log: when given, receives one SmoteDraw per synthetic record

    Returns:
        Real records followed by the synthetic ones
    """
    if k_neighbors < 1:
        raise ValueError(f"k_neighbors must be >= 1, got {k_neighbors}")
    histogram = ds.class_histogram
    target = max(histogram.values())
    rng = RngStream(seed)
    next_id = int(ds.record_ids.max()) + 1
    new_features, new_labels, new_ids = [], [], []

    for label, count in histogram.items():
        if count == 0 or count == target:
            continue
        if count < 2:
            raise DataError(f"Class {label} has {count} member(s); SMOTE needs at least 2")
        k = k_neighbors
        if k > count - 1:
            logger.warning(f"Class {label}: k_neighbors={k} clamped to {count - 1}")
            k = count - 1
        members = np.flatnonzero(ds.labels == label)
        points = ds.features[members]
        neighbors = NearestNeighbors(n_neighbors=k + 1).fit(points).kneighbors(points, return_distance=False)
        # drop each point itself from its own neighbor list
        own = [
            np.array([j for j in row if j != i][:k]) for i, row in enumerate(neighbors)
        ]
        needed = target - count
        sources = rng.integers(0, count, size=needed)
        picks = rng.integers(0, k, size=needed)
        gaps = rng.uniform((needed,))
        for source, pick, gap in zip(sources, picks, gaps):
            neighbor = own[source][pick]
            x, x_nn = points[source], points[neighbor]
            new_features.append(x + gap * (x_nn - x))
            new_labels.append(label)
            new_ids.append(next_id)
            if draw_log is not None:
                draw_log.append(SmoteDraw(
                    source_id=int(ds.record_ids[members[source]]),
                    neighbor_id=int(ds.record_ids[members[neighbor]]),
                    gap=float(gap),
                    synthetic_id=next_id,
                ))
            next_id += 1
        logger.info(f"SMOTE: class {label} {count} -> {target}")

    if not new_labels:
        return ds
    return Dataset(
        np.concatenate([ds.features, np.array(new_features)]),
        np.concatenate([ds.labels, np.array(new_labels)]),
        np.concatenate([ds.record_ids, np.array(new_ids)]),
    )


def standard_scale(train: Dataset, others: Sequence[Dataset] = ()) -> Tuple[Dataset, List[Dataset], ScalerParams]:
    """
    Standardize features with statistics from ``train`` only

    Constant features keep unit scale, so they are only mean-centred.
    """
    scaler = StandardScaler().fit(train.features)
    scaled_train = train.with_features(scaler.transform(train.features))
    scaled_others = [ds.with_features(scaler.transform(ds.features)) for ds in others]
    return scaled_train, scaled_others, ScalerParams(mean=scaler.mean_.copy(), scale=scaler.scale_.copy())


def split_train_val(ds: Dataset, spec: SplitSpec) -> Tuple[Dataset, Dataset]:
    """Deterministic (optionally stratified) partition into train and validation sets"""
    stratify = None
    if spec.stratified:
        small = {label: n for label, n in ds.class_histogram.items() if 0 < n < 2}
        if small:
            raise DataError(f"Stratification impossible: classes with fewer than 2 members {small}")
        stratify = ds.labels
    indices = np.arange(len(ds))
    try:
        train_idx, val_idx = train_test_split(
            indices,
            train_size=spec.train_fraction,
            stratify=stratify,
            random_state=spec.seed % (2 ** 32),
        )
    except ValueError as e:
        logger.error(f"Error splitting dataset: {e}")
        raise DataError(f"Cannot split dataset: {e}") from e
    train, val = ds.subset(np.sort(train_idx)), ds.subset(np.sort(val_idx))
    logger.info(f"Split {len(ds)} records into {len(train)} train / {len(val)} validation")
    return train, val
