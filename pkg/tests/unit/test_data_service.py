"""Unit tests for the beat data pipeline"""
import itertools

import numpy as np
import pytest

from ecgbench.core.exceptions import DataError
from ecgbench.models.beats import NUM_CLASSES, NUM_FEATURES, Dataset
from ecgbench.schemas.config import NoiseSpec, SplitSpec
from ecgbench.services.data_service import (
    add_gaussian_noise,
    load_csv,
    smote_oversample,
    split_train_val,
    standard_scale,
    synth_generate,
    write_csv,
)


def _write(tmp_path, lines, name="beats.csv"):
    path = tmp_path / name
    path.write_text("\n".join(lines) + ("\n" if lines else ""))
    return path


# load_csv

def test_load_csv_two_rows(tmp_path, make_row):
    """Test a well-formed two-row file"""
    ds = load_csv(_write(tmp_path, [make_row(label=0), make_row(label=3, value=0.25)]))
    assert len(ds) == 2
    assert ds.labels.tolist() == [0, 3]
    assert ds.class_histogram == {0: 1, 1: 0, 2: 0, 3: 1, 4: 0}
    assert np.all(ds.features[1] == 0.25)


def test_load_csv_skips_header(tmp_path, make_row):
    """Test a non-numeric first row is treated as a header"""
    header = ",".join(f"c{k}" for k in range(NUM_FEATURES + 1))
    ds = load_csv(_write(tmp_path, [header, make_row(label=2)]))
    assert len(ds) == 1 and ds.labels.tolist() == [2]


def test_load_csv_wrong_column_count_names_row(tmp_path, make_row):
    """Test a 187-field row is rejected with its row number"""
    path = _write(tmp_path, [make_row(), make_row(fields=NUM_FEATURES - 1)])
    with pytest.raises(DataError, match="Row 2"):
        load_csv(path)


def test_load_csv_empty_file(tmp_path):
    """Test an empty file is rejected"""
    with pytest.raises(DataError, match="empty dataset"):
        load_csv(_write(tmp_path, []))


def test_load_csv_non_numeric_field(tmp_path, make_row):
    """Test a non-numeric sample in a data row"""
    bad = make_row().replace("0.5", "abc", 1)
    with pytest.raises(DataError, match="non-numeric"):
        load_csv(_write(tmp_path, [make_row(), bad]))


def test_load_csv_label_out_of_range(tmp_path, make_row):
    """Test labels outside 0..4 and fractional labels"""
    with pytest.raises(DataError, match="label"):
        load_csv(_write(tmp_path, [make_row(label=7)]))
    with pytest.raises(DataError, match="label"):
        load_csv(_write(tmp_path, [make_row(label=1.5)], name="frac.csv"))


def test_load_csv_accepts_float_labels(tmp_path, make_row):
    """Test labels written as floats are read as integers"""
    assert load_csv(_write(tmp_path, [make_row(label="4.0")])).labels.tolist() == [4]


def test_load_csv_missing_file(tmp_path):
    """Test a missing file is a data error"""
    with pytest.raises(DataError):
        load_csv(tmp_path / "absent.csv")


def test_load_csv_invalid_utf8(tmp_path, make_row):
    """Test undecodable bytes are a data error"""
    path = tmp_path / "latin1.csv"
    path.write_bytes(make_row().encode() + b"\n\xff\xfe,\xe9\n")
    with pytest.raises(DataError, match="Cannot read"):
        load_csv(path)


def test_load_csv_directory(tmp_path):
    """Test a directory path is a data error"""
    with pytest.raises(DataError, match="Cannot read"):
        load_csv(tmp_path)


def test_write_csv_reloads_identically(tmp_path, synthetic_beats):
    """Test the written CSV reloads to the same features and labels"""
    path = write_csv(synthetic_beats, tmp_path / "out.csv")
    reloaded = load_csv(path)
    assert np.array_equal(reloaded.features, synthetic_beats.features)
    assert np.array_equal(reloaded.labels, synthetic_beats.labels)


# synth_generate

def test_synth_single_record():
    """Test counts [1, 0, 0, 0, 0] give one beat of class 0"""
    ds = synth_generate([1, 0, 0, 0, 0], seed=3)
    assert len(ds) == 1
    assert ds.labels.tolist() == [0]
    assert ds.features.shape == (1, NUM_FEATURES)


def test_synth_deterministic(tmp_path):
    """Test equal seeds write byte-identical files and different seeds differ"""
    a = write_csv(synth_generate([3] * 5, seed=7), tmp_path / "a.csv")
    b = write_csv(synth_generate([3] * 5, seed=7), tmp_path / "b.csv")
    c = write_csv(synth_generate([3] * 5, seed=8), tmp_path / "c.csv")
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_synth_rejects_bad_counts():
    """Test all-zero, negative and wrong-length count vectors"""
    with pytest.raises(DataError):
        synth_generate([0] * 5, seed=1)
    with pytest.raises(DataError):
        synth_generate([1, -1, 0, 0, 0], seed=1)
    with pytest.raises(DataError):
        synth_generate([1, 1], seed=1)


def test_synth_classes_are_separated(synthetic_beats):
    """Test class mean waveforms are more than 10x the within-class std apart"""
    means, spreads = {}, {}
    for label in range(NUM_CLASSES):
        members = synthetic_beats.features[synthetic_beats.labels == label]
        means[label] = members.mean(axis=0)
        spreads[label] = float(np.sqrt(members.var(axis=0).mean()))
    for a, b in itertools.combinations(range(NUM_CLASSES), 2):
        distance = np.linalg.norm(means[a] - means[b])
        assert distance > 10 * max(spreads[a], spreads[b])


# add_gaussian_noise

def test_noise_sigma_zero_is_identity(synthetic_beats):
    """Test sigma 0 returns identical features"""
    noisy = add_gaussian_noise(synthetic_beats, NoiseSpec(sigma=0.0, seed=1))
    assert np.array_equal(noisy.features, synthetic_beats.features)
    assert np.array_equal(noisy.labels, synthetic_beats.labels)


def test_noise_preserves_labels_and_input(synthetic_beats):
    """Test labels, ids and the source dataset are unchanged"""
    before = synthetic_beats.features.copy()
    noisy = add_gaussian_noise(synthetic_beats, NoiseSpec(sigma=0.3, seed=1))
    assert np.array_equal(noisy.labels, synthetic_beats.labels)
    assert np.array_equal(noisy.record_ids, synthetic_beats.record_ids)
    assert np.array_equal(synthetic_beats.features, before)
    assert not np.array_equal(noisy.features, before)


def test_noise_statistics():
    """Test the perturbation stddev over ~10^5 elements is within 5% of sigma"""
    ds = synth_generate([107] * 5, seed=2)
    noisy = add_gaussian_noise(ds, NoiseSpec(sigma=0.05, seed=9))
    delta = noisy.features - ds.features
    assert delta.size >= 100000
    assert abs(delta.std() - 0.05) <= 0.05 * 0.05
    assert abs(delta.mean()) < 0.001


# smote_oversample

def test_smote_balances_and_replays(random_dataset):
    """Test {10, 2} becomes {10, 10} and every synthetic point replays from its draw"""
    ds = random_dataset([0] * 10 + [1] * 2, seed=4)
    draws = []
    out = smote_oversample(ds, k_neighbors=5, seed=13, draw_log=draws)
    assert out.class_histogram[0] == 10
    assert out.class_histogram[1] == 10
    assert len(draws) == 8

    real = {int(rid): (ds.features[k], int(ds.labels[k])) for k, rid in enumerate(ds.record_ids)}
    synthetic = {int(rid): (out.features[k], int(out.labels[k])) for k, rid in enumerate(out.record_ids)}
    for draw in draws:
        x, x_label = real[draw.source_id]
        x_nn, nn_label = real[draw.neighbor_id]
        s, s_label = synthetic[draw.synthetic_id]
        assert draw.source_id != draw.neighbor_id
        assert x_label == nn_label == s_label == 1
        assert 0.0 <= draw.gap <= 1.0
        assert np.allclose(s, x + draw.gap * (x_nn - x))


def test_smote_keeps_real_records(random_dataset):
    """Test real records come first and are unchanged"""
    ds = random_dataset([0] * 6 + [2] * 3, seed=5)
    out = smote_oversample(ds, k_neighbors=2, seed=1)
    assert np.array_equal(out.features[:len(ds)], ds.features)
    assert np.array_equal(out.record_ids[:len(ds)], ds.record_ids)
    assert len(set(out.record_ids.tolist())) == len(out)


def test_smote_balanced_input_is_noop(random_dataset):
    """Test an already balanced dataset comes back unchanged"""
    ds = random_dataset([0, 0, 1, 1, 2, 2, 3, 3, 4, 4], seed=6)
    out = smote_oversample(ds, k_neighbors=1, seed=1)
    assert np.array_equal(out.features, ds.features)
    assert np.array_equal(out.labels, ds.labels)


def test_smote_rejects_singleton_class(random_dataset):
    """Test a minority class with one member cannot be interpolated"""
    with pytest.raises(DataError):
        smote_oversample(random_dataset([0] * 4 + [3]), k_neighbors=1, seed=1)


def test_smote_clamps_k_and_rejects_zero(random_dataset):
    """Test oversized k is clamped and k=0 is rejected"""
    ds = random_dataset([0] * 8 + [1] * 3, seed=7)
    draws = []
    smote_oversample(ds, k_neighbors=50, seed=2, draw_log=draws)
    assert len(draws) == 5
    with pytest.raises(ValueError):
        smote_oversample(ds, k_neighbors=0, seed=2)


def test_smote_deterministic(random_dataset):
    """Test equal seeds give identical synthetic records"""
    ds = random_dataset([0] * 9 + [4] * 4, seed=8)
    a = smote_oversample(ds, k_neighbors=3, seed=21)
    b = smote_oversample(ds, k_neighbors=3, seed=21)
    assert np.array_equal(a.features, b.features)


# standard_scale

def test_scale_train_statistics(synthetic_beats):
    """Test scaled training features have mean 0 and std 1 per feature"""
    train, _, params = standard_scale(synthetic_beats)
    assert np.all(np.abs(train.features.mean(axis=0)) < 1e-9)
    assert np.all(np.abs(train.features.std(axis=0) - 1.0) < 1e-9)
    assert params.mean.shape == (NUM_FEATURES,)


def test_scale_constant_feature(random_dataset):
    """Test a constant feature scales to zeros"""
    ds = random_dataset([0, 1, 2, 3])
    features = ds.features.copy()
    features[:, 5] = 3.0
    train, _, _ = standard_scale(ds.with_features(features))
    assert np.all(train.features[:, 5] == 0.0)


def test_scale_uses_train_statistics_for_others(random_dataset):
    """Test a shifted validation set is scaled with the training mean and std"""
    train = random_dataset([0, 1, 2, 3, 4, 0, 1], seed=3)
    shifted = train.with_features(train.features + 1.0)
    _, (val,), params = standard_scale(train, [shifted])
    assert np.allclose(val.features.mean(axis=0), 1.0 / params.scale)


# split_train_val

def test_split_fractions(random_dataset):
    """Test 100 records split 80/20 and the parts partition the input"""
    ds = random_dataset([k % 5 for k in range(100)])
    train, val = split_train_val(ds, SplitSpec(train_fraction=0.8, stratified=False, seed=1))
    assert (len(train), len(val)) == (80, 20)
    ids_train, ids_val = set(train.record_ids.tolist()), set(val.record_ids.tolist())
    assert not ids_train & ids_val
    assert ids_train | ids_val == set(range(100))


def test_split_stratified_proportions(random_dataset):
    """Test {0: 50, 1: 50} stratified at 0.8 gives {0: 40, 1: 40}"""
    ds = random_dataset([0] * 50 + [1] * 50)
    train, val = split_train_val(ds, SplitSpec(train_fraction=0.8, stratified=True, seed=4))
    assert train.class_histogram[0] == 40
    assert train.class_histogram[1] == 40
    assert val.class_histogram[0] == 10


def test_split_deterministic(random_dataset):
    """Test equal seeds repeat the split and different seeds change it"""
    ds = random_dataset([k % 5 for k in range(100)])
    a, _ = split_train_val(ds, SplitSpec(seed=3))
    b, _ = split_train_val(ds, SplitSpec(seed=3))
    c, _ = split_train_val(ds, SplitSpec(seed=4))
    assert np.array_equal(a.record_ids, b.record_ids)
    assert not np.array_equal(a.record_ids, c.record_ids)


def test_split_stratification_impossible(random_dataset):
    """Test a one-member class cannot be stratified"""
    ds = random_dataset([0] * 10 + [1])
    with pytest.raises(DataError, match="Stratification impossible"):
        split_train_val(ds, SplitSpec(stratified=True))


def test_dataset_is_read_only(synthetic_beats):
    """Test dataset arrays cannot be modified in place"""
    with pytest.raises(ValueError):
        synthetic_beats.features[0, 0] = 1.0
    with pytest.raises(DataError):
        Dataset(np.zeros((2, NUM_FEATURES)), [0, 9])
