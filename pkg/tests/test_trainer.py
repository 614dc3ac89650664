"""Boosting/forest training, synthetic data, and dataset files."""

import math

import numpy as np
import pytest

from equiprune import (ContinuousFeature, Dataset, DatasetFormatError,
                       FeatureSchema, InputError, load_dataset, load_schema,
                       make_synthetic, predict_classes_batch, save_dataset,
                       save_schema, train_adaboost, train_random_forest)
from equiprune.trainer import boost_weight


def test_boost_weight_chance_is_zero():
    assert boost_weight(0.5, 2) == pytest.approx(0.0)


def test_boost_weight_quarter_error():
    assert boost_weight(0.25, 2) == pytest.approx(math.log(3.0))


def test_boost_weight_multiclass_offset():
    assert boost_weight(0.5, 3) == pytest.approx(math.log(2.0))


def test_separable_data_boosts_to_perfect_accuracy():
    data = make_synthetic("separable", n=80, seed=3)
    ens = train_adaboost(data, num_trees=10, max_depth=1, seed=0)
    pred = predict_classes_batch(ens, ens.alpha, data.X)
    assert np.array_equal(pred, data.y)


def test_forest_weights_are_all_ones():
    data = make_synthetic("blobs", n=40, seed=1)
    ens = train_random_forest(data, num_trees=7, max_depth=3, seed=2)
    assert ens.alpha == (1.0,) * 7
    assert ens.num_trees == 7


def test_forest_single_tree():
    data = make_synthetic("blobs", n=40, seed=1)
    ens = train_random_forest(data, num_trees=1, max_depth=3, seed=2)
    assert ens.num_trees == 1
    assert ens.alpha == (1.0,)


def test_forest_seeds_disagree_somewhere():
    data = make_synthetic("blobs", n=60, seed=5)
    a = train_random_forest(data, num_trees=3, max_depth=2, seed=0)
    b = train_random_forest(data, num_trees=3, max_depth=2, seed=1)
    grid = np.column_stack([np.repeat(np.linspace(-3, 4, 40), 40),
                            np.tile(np.linspace(-3, 4, 40), 40)])
    pa = predict_classes_batch(a, a.alpha, grid)
    pb = predict_classes_batch(b, b.alpha, grid)
    assert np.any(pa != pb)


def test_training_is_deterministic():
    data = make_synthetic("blobs", n=48, seed=2)
    a = train_adaboost(data, num_trees=8, max_depth=1, seed=4)
    b = train_adaboost(data, num_trees=8, max_depth=1, seed=4)
    assert a == b
    ra = train_random_forest(data, num_trees=5, max_depth=3, seed=4)
    rb = train_random_forest(data, num_trees=5, max_depth=3, seed=4)
    assert ra == rb


def test_xor_four_rows_are_the_corners():
    data = make_synthetic("xor", n=4, seed=0)
    assert sorted(map(tuple, data.X)) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert data.y.tolist() == [int(a) ^ int(b) for a, b in data.X]


def test_blobs_reproducible():
    a = make_synthetic("blobs", n=32, seed=9)
    b = make_synthetic("blobs", n=32, seed=9)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)


def test_synthetic_needs_four_rows():
    with pytest.raises(InputError, match="n >= 4"):
        make_synthetic("blobs", n=3)


def test_unknown_synthetic_kind():
    with pytest.raises(InputError, match="unknown synthetic kind"):
        make_synthetic("moons")


def test_single_class_dataset_rejected():
    schema = FeatureSchema((ContinuousFeature(),))
    data = Dataset(schema, np.array([[0.1], [0.2], [0.7]]),
                   np.zeros(3, dtype=int), num_classes=2)
    with pytest.raises(InputError, match="two classes"):
        train_adaboost(data, num_trees=3)


def test_categorical_features_not_trainable():
    from equiprune import CategoricalFeature
    schema = FeatureSchema((CategoricalFeature(3),))
    data = Dataset(schema, np.array([[0.0], [1.0], [2.0], [1.0]]),
                   np.array([0, 1, 0, 1]), num_classes=2)
    with pytest.raises(InputError, match="continuous and binary"):
        train_random_forest(data, num_trees=2)


def test_schema_round_trip(tmp_path):
    data = make_synthetic("xor", n=8, seed=0)
    path = tmp_path / "schema.json"
    save_schema(data.schema, path)
    assert load_schema(path) == data.schema


def test_dataset_round_trip(tmp_path):
    data = make_synthetic("separable", n=24, seed=4)
    path = tmp_path / "data.csv"
    save_dataset(data, path)
    again = load_dataset(path, data.schema, num_classes=2)
    assert np.array_equal(again.X, data.X)
    assert np.array_equal(again.y, data.y)


def test_dataset_header_is_schema_order(tmp_path):
    data = make_synthetic("separable", n=8, seed=4)
    path = tmp_path / "data.csv"
    save_dataset(data, path)
    header = path.read_text().splitlines()[0]
    assert header == "x0,x1,label"


def test_empty_csv_rejected(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    schema = make_synthetic("xor", n=4).schema
    with pytest.raises(DatasetFormatError, match="empty"):
        load_dataset(path, schema)


def test_wrong_column_count_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("b0,b1,label\n0,1\n")
    schema = make_synthetic("xor", n=4).schema
    with pytest.raises(DatasetFormatError):
        load_dataset(path, schema)


def test_non_numeric_cell_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("b0,b1,label\n0,huh,1\n")
    schema = make_synthetic("xor", n=4).schema
    with pytest.raises(DatasetFormatError):
        load_dataset(path, schema)


def test_label_out_of_range_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("b0,b1,label\n0,1,5\n")
    schema = make_synthetic("xor", n=4).schema
    with pytest.raises(DatasetFormatError):
        load_dataset(path, schema, num_classes=2)


def test_trained_stumps_satisfy_core_invariants():
    data = make_synthetic("blobs", n=40, seed=7)
    ens = train_adaboost(data, num_trees=12, max_depth=1, seed=1)
    assert all(a >= 0.0 for a in ens.alpha)
    for kind in ens.schema.features:
        ts = kind.thresholds
        assert all(a < b for a, b in zip(ts, ts[1:]))
    for tree in ens.trees:
        for leaf_id in tree.leaf_ids:
            scores = tree.nodes[leaf_id].scores
            assert sorted(scores) == [0.0, 1.0]  # one-hot
