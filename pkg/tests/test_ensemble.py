"""Prediction, cell geometry, and construction-time validation."""

import numpy as np
import pytest

from equiprune import (BinaryFeature, CategoricalFeature, ContinuousFeature,
                       FeatureSchema, InputError, Leaf, ModelFormatError,
                       Split, Tree, build_ensemble, cell_center, cell_of,
                       enumerate_cells, predict_class, predict_scores,
                       predict_scores_batch, tree_scores)
from conftest import make_stump, one_hot, stump_ensembles


def two_class(features, weights, trees):
    return build_ensemble(num_classes=2, features=features, weights=weights,
                          raw_trees=trees)


def test_single_stump_routes_left():
    ens = two_class([{"name": "x1", "kind": "continuous"}], [1.0],
                    [make_stump(0, 0.5, (1, 0), (0, 1))])
    assert predict_scores(ens, (1.0,), (0.3,)).tolist() == [1.0, 0.0]


def test_zero_weights_give_zero_scores():
    ens = two_class([{"name": "x1", "kind": "continuous"}], [1.0],
                    [make_stump(0, 0.5, (1, 0), (0, 1))])
    assert predict_scores(ens, (0.0,), (0.3,)).tolist() == [0.0, 0.0]


def test_three_stump_vote_tally():
    trees = [make_stump(0, 0.5, (1, 0), (1, 0)),
             make_stump(0, 0.5, (0, 1), (0, 1)),
             make_stump(0, 0.5, (0, 1), (0, 1))]
    ens = two_class([{"name": "x1", "kind": "continuous"}], [1, 1, 1], trees)
    assert predict_scores(ens, ens.alpha, (0.3,)).tolist() == [1.0, 2.0]
    assert predict_class(ens, ens.alpha, (0.3,)) == 1


def test_tie_broken_toward_smaller_class():
    trees = [make_stump(0, 0.5, (1, 0), (1, 0)),
             make_stump(0, 0.5, (0, 1), (0, 1))]
    ens = two_class([{"name": "x1", "kind": "continuous"}], [1, 1], trees)
    assert predict_class(ens, ens.alpha, (0.3,)) == 0
    # all-zero weights tie every class at 0
    assert predict_class(ens, (0.0, 0.0), (0.3,)) == 0


def test_tree_scores_matrix():
    trees = [make_stump(0, 0.5, (1, 0), (0, 1)),
             make_stump(0, 0.5, (0, 1), (1, 0))]
    ens = two_class([{"name": "x1", "kind": "continuous"}], [1, 1], trees)
    assert tree_scores(ens, (0.2,)).tolist() == [[1, 0], [0, 1]]
    assert tree_scores(ens, (0.7,)).tolist() == [[0, 1], [1, 0]]


def test_cell_of_single_threshold():
    schema = FeatureSchema((ContinuousFeature((0.5,)),))
    assert cell_of(schema, (0.2,)) == (0,)


def test_cell_of_boundary_is_closed_left():
    schema = FeatureSchema((ContinuousFeature((0.2, 0.8)),))
    assert cell_of(schema, (0.2,)) == (0,)
    assert cell_of(schema, (0.9,)) == (2,)


def test_cell_center_interior_midpoint():
    schema = FeatureSchema((ContinuousFeature((0.2, 0.8)),))
    assert cell_center(schema, (1,)) == (0.5,)


def test_cell_center_pads_unbounded_intervals():
    schema = FeatureSchema((ContinuousFeature((0.5,)),))
    assert cell_center(schema, (0,)) == (-0.5,)
    assert cell_center(schema, (1,)) == (1.5,)


def test_cell_of_center_identity_on_small_schemas():
    rng = np.random.default_rng(11)
    for _ in range(20):
        features = []
        for _ in range(int(rng.integers(1, 4))):
            kind = rng.integers(0, 3)
            if kind == 0:
                ts = tuple(np.sort(rng.normal(size=int(rng.integers(0, 4)))))
                features.append(ContinuousFeature(ts))
            elif kind == 1:
                features.append(BinaryFeature())
            else:
                features.append(CategoricalFeature(int(rng.integers(2, 5))))
        schema = FeatureSchema(tuple(features))
        for cell in enumerate_cells(schema):
            assert cell_of(schema, cell_center(schema, cell)) == cell


def test_routing_is_constant_within_a_cell():
    rng = np.random.default_rng(3)
    for seed, ens in stump_ensembles(100, 10):
        for _ in range(20):
            x = tuple(rng.normal(size=ens.schema.num_features))
            cell = cell_of(ens.schema, x)
            y = cell_center(ens.schema, cell)
            for tree in ens.trees:
                assert tree.route(ens.schema, x) == tree.route(ens.schema, y)
                assert tree.route(ens.schema, x) == tree.route_cell(cell)


def test_argmax_is_scale_invariant():
    rng = np.random.default_rng(4)
    for seed, ens in stump_ensembles(200, 10):
        w = rng.uniform(0.1, 2.0, size=ens.num_trees)
        for lam in (0.001, 1.0, 517.3):
            for _ in range(10):
                x = tuple(rng.normal(size=ens.schema.num_features))
                assert predict_class(ens, lam * w, x) == \
                    predict_class(ens, w, x)


def test_batch_prediction_matches_pointwise():
    rng = np.random.default_rng(5)
    for seed, ens in stump_ensembles(300, 5):
        X = rng.normal(size=(30, ens.schema.num_features))
        w = rng.uniform(0.0, 2.0, size=ens.num_trees)
        batch = predict_scores_batch(ens, w, X)
        for i in range(X.shape[0]):
            assert np.allclose(batch[i], predict_scores(ens, w, tuple(X[i])))


def test_point_arity_mismatch_rejected():
    ens = two_class([{"name": "x1", "kind": "continuous"}], [1.0],
                    [make_stump(0, 0.5, (1, 0), (0, 1))])
    with pytest.raises(InputError):
        predict_scores(ens, (1.0,), (0.3, 0.4))


def test_negative_weight_rejected():
    ens = two_class([{"name": "x1", "kind": "continuous"}], [1.0],
                    [make_stump(0, 0.5, (1, 0), (0, 1))])
    with pytest.raises(InputError):
        predict_class(ens, (-1.0,), (0.3,))


def test_non_monotone_thresholds_rejected():
    with pytest.raises(ModelFormatError):
        ContinuousFeature((0.8, 0.2))


def test_leaf_score_out_of_range_rejected():
    with pytest.raises(ModelFormatError, match="outside"):
        two_class([{"name": "x1", "kind": "continuous"}], [1.0],
                  [make_stump(0, 0.5, (1.5, 0), (0, 1))])


def test_dangling_node_rejected():
    with pytest.raises(ModelFormatError, match="dangling"):
        Tree(root=0, nodes={0: Split(feature=0, left=1, right=2,
                                     threshold_index=0),
                            1: Leaf((1.0, 0.0))})


def test_unreachable_node_rejected():
    with pytest.raises(ModelFormatError, match="unreachable"):
        Tree(root=0, nodes={0: Leaf((1.0, 0.0)), 7: Leaf((0.0, 1.0))})


def test_schema_thresholds_must_match_split_union():
    # the schema would carry threshold 0.5 only if some tree split on it
    tree = Tree(root=0, nodes={0: Leaf((1.0, 0.0))})
    schema = FeatureSchema((ContinuousFeature((0.5,)),))
    from equiprune import Ensemble
    with pytest.raises(ModelFormatError, match="union"):
        Ensemble(schema=schema, trees=(tree,), alpha=(1.0,), num_classes=2)


def test_all_zero_alpha_rejected():
    with pytest.raises(ModelFormatError, match="positive"):
        two_class([{"name": "x1", "kind": "continuous"}], [0.0],
                  [make_stump(0, 0.5, (1, 0), (0, 1))])
