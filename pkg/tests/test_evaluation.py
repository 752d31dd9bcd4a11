import json

import numpy as np
import pytest

from hope_embed.data import LabeledDataset
from hope_embed.evaluation import (
    EvalReport,
    error_rate,
    evaluate_embeddings,
    evaluate_model,
    knn_classify,
    timed_knn,
)

from helpers import knn_oracle, random_model, random_points


def test_exact_match_k1():
    refs = np.array([[0.0, 0.0], [1.0, 1.0], [5.0, 5.0]])
    assert knn_classify(np.array([[1.0, 1.0]]), refs, np.array([7, 8, 9]), 1)[0] == 8


def test_majority():
    refs = np.array([[0.0, 0.0], [0.1, 0.0], [0.2, 0.0], [9.0, 9.0]])
    assert knn_classify(np.zeros((1, 2)), refs, np.array([1, 1, 2, 2]), 3)[0] == 1


def test_vote_tie_goes_to_smaller_summed_distance():
    refs = np.array([[1.0, 0.0], [-3.0, 0.0], [0.0, 2.0], [0.0, -2.0]])
    assert knn_classify(np.zeros((1, 2)), refs, np.array([1, 1, 2, 2]), 4)[0] == 2


def test_distance_tie_goes_to_lower_index():
    refs = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
    assert knn_classify(np.zeros((1, 2)), refs, np.array([4, 5, 6]), 1)[0] == 4


def test_too_few_references():
    with pytest.raises(ValueError, match="k=5"):
        knn_classify(np.zeros((1, 2)), np.zeros((3, 2)), np.array([1, 1, 2]), 5)


@pytest.mark.parametrize("seed", range(10))
def test_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    refs, queries = rng.normal(size=(50, 2)), rng.normal(size=(20, 2))
    labels = rng.integers(1, 4, size=50)
    for k in (1, 3, 5, 6):
        assert np.array_equal(knn_classify(queries, refs, labels, k),
                              knn_oracle(queries.tolist(), refs.tolist(), labels.tolist(), k))


@pytest.mark.parametrize("seed", range(10))
def test_matches_brute_force_with_ties(seed):
    rng = np.random.default_rng(100 + seed)
    refs = rng.integers(-2, 3, size=(40, 2)).astype(float)
    queries = rng.integers(-2, 3, size=(15, 2)).astype(float)
    labels = rng.integers(1, 4, size=40)
    for k in (1, 2, 4, 5):
        assert np.array_equal(knn_classify(queries, refs, labels, k),
                              knn_oracle(queries.tolist(), refs.tolist(), labels.tolist(), k))


def test_reference_permutation_invariance(rng):
    refs, queries = rng.normal(size=(60, 2)), rng.normal(size=(30, 2))
    labels = rng.integers(1, 4, size=60)
    perm = rng.permutation(60)
    assert np.array_equal(knn_classify(queries, refs, labels, 5),
                          knn_classify(queries, refs[perm], labels[perm], 5))


def test_chunked_queries_agree(rng, monkeypatch):
    import hope_embed.evaluation as ev

    refs, queries = rng.normal(size=(30, 2)), rng.normal(size=(40, 2))
    labels = rng.integers(1, 3, size=30)
    whole = knn_classify(queries, refs, labels, 3)
    monkeypatch.setattr(ev, "CHUNK_ENTRIES", 70)
    assert np.array_equal(whole, knn_classify(queries, refs, labels, 3))


def test_error_rate_exact():
    assert error_rate([1, 2, 2, 1], [1, 1, 2, 2]) == 0.5
    assert error_rate([3, 3, 3], [3, 3, 3]) == 0.0


def test_refs_equal_test_k1_zero_error(rng):
    model = random_model(rng, "shope", 4, 2, 3)
    data = LabeledDataset(random_points(rng, 25, 4), rng.integers(1, 4, size=25), 3)
    report = evaluate_model(model, data.X, data.labels, data, k=1, repeats=1)
    assert report.error_rate == 0.0 and report.reference_set_size == 25
    assert report.reference_space_dim == 2 and report.num_queries == 25


def test_timing_favours_small_reference_sets(rng):
    queries = rng.normal(size=(500, 2))
    big, small = rng.normal(size=(6000, 2)), rng.normal(size=(20, 2))
    _, t_big = timed_knn(queries, big, rng.integers(1, 11, size=6000), 5, repeats=3)
    _, t_small = timed_knn(queries, small, np.repeat(np.arange(1, 11), 2), 5, repeats=3)
    assert 0 < t_small < t_big


def test_report_formats(rng):
    r = evaluate_embeddings(rng.normal(size=(10, 2)), np.ones(10, dtype=int),
                            rng.normal(size=(5, 2)), np.ones(5, dtype=int), 5, 1)
    assert isinstance(r, EvalReport)
    line = r.summary_line("full")
    assert line.startswith("full: k=5 error_rate=0.000000 errors=0/10 refs=5 dim=2")
    assert json.loads(r.to_json())["reference_set_size"] == 5
