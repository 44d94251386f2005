import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aucbench.data import (
    BatchSampler,
    Dataset,
    SamplerConfig,
    holdout_split,
    kfold_split,
    load_csv,
    make_imbalanced,
    sample_batch,
    spr_quota,
    synth_gaussian,
)
from aucbench.errors import (
    BadParams,
    DataIOError,
    EmptyClass,
    ParseError,
    SingleClass,
    TargetTooHigh,
    TooFewSamples,
)
from aucbench.metrics import auroc


def toy(n_pos, n_neg, dim=2, seed=0):
    rng = np.random.default_rng(seed)
    y = np.array([1] * n_pos + [-1] * n_neg)
    return Dataset(rng.normal(size=(y.size, dim)), y, "toy")


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_csv_zero_one_labels(tmp_path):
    ds = load_csv(write(tmp_path, "f1,label,f2\n0.5,1,2\n1.5,0,3\n2.5,1,4\n"), "label")
    np.testing.assert_array_equal(ds.y, [1, -1, 1])
    np.testing.assert_array_equal(ds.X, [[0.5, 2], [1.5, 3], [2.5, 4]])
    assert ds.name == "d"


def test_load_csv_signed_labels(tmp_path):
    ds = load_csv(write(tmp_path, "y,a\n-1,0\n+1,1\n"), "y")
    np.testing.assert_array_equal(ds.y, [-1, 1])


@pytest.mark.parametrize("body, row, column", [
    ("a,label\n1,1\n,0\n", 3, "a"),
    ("a,label\n1,1\nx,0\n", 3, "a"),
    ("a,label\n1,1\n2\n", 3, None),
    ("a,label\n1,1\n2,7\n", 3, "label"),
    ("a,label\n1,1\n2,-1\n3,0\n", 1, "label"),
])
def test_load_csv_parse_errors(tmp_path, body, row, column):
    with pytest.raises(ParseError) as info:
        load_csv(write(tmp_path, body))
    assert info.value.row == row
    assert info.value.column == column


def test_load_csv_missing_label_column(tmp_path):
    with pytest.raises(ParseError):
        load_csv(write(tmp_path, "a,b\n1,1\n"), "label")


def test_load_csv_single_class(tmp_path):
    with pytest.raises(SingleClass):
        load_csv(write(tmp_path, "a,label\n1,1\n2,1\n"))


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DataIOError):
        load_csv(tmp_path / "nope.csv")


def test_dataset_validation():
    with pytest.raises(BadParams):
        Dataset(np.zeros((2, 1)), [1, 2])
    with pytest.raises(BadParams):
        Dataset(np.zeros((3, 1)), [1, -1])
    with pytest.raises(SingleClass):
        Dataset(np.zeros((2, 1)), [1, 1])
    ds = toy(3, 7)
    assert ds.positive_ratio == 0.3
    with pytest.raises(ValueError):
        ds.X[0, 0] = 1.0


def test_make_imbalanced_example():
    ds = toy(100, 100)
    out = make_imbalanced(ds, 0.10, seed=0)
    assert out.n_pos == 11 and out.n_neg == 100
    assert abs(out.positive_ratio - 0.1) < 1 / len(out)
    again = make_imbalanced(ds, 0.10, seed=0)
    np.testing.assert_array_equal(out.X, again.X)
    with pytest.raises(TargetTooHigh):
        make_imbalanced(ds, 0.5, seed=0)


def test_synth_gaussian_separable():
    ds = synth_gaussian(2000, 10, 0.1, 3.0, seed=0)
    assert ds.n_pos == 200 and ds.n_features == 10
    assert auroc(ds.X[:, 0], ds.y) > 0.99


def test_synth_gaussian_no_signal():
    ds = synth_gaussian(5000, 3, 0.5, 0.0, seed=1)
    assert abs(auroc(ds.X[:, 0], ds.y) - 0.5) < 0.03


def test_synth_gaussian_determinism_and_params():
    a, b = synth_gaussian(50, 2, 0.3, 1.0, 4), synth_gaussian(50, 2, 0.3, 1.0, 4)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)
    with pytest.raises(BadParams):
        synth_gaussian(3, 2, 0.5, 1.0, 0)
    with pytest.raises(BadParams):
        synth_gaussian(10, 2, 1.0, 1.0, 0)


def test_kfold_example():
    ds = toy(10, 90)
    folds = kfold_split(ds, 5, seed=0)
    seen = np.concatenate([val for _, val in folds])
    np.testing.assert_array_equal(np.sort(seen), np.arange(100))
    for train, val in folds:
        assert (ds.y[val] == 1).sum() == 2 and (ds.y[val] == -1).sum() == 18
        assert np.intersect1d(train, val).size == 0
        assert train.size + val.size == 100
    with pytest.raises(TooFewSamples):
        kfold_split(toy(4, 40), 5, seed=0)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 7), st.integers(0, 30), st.integers(0, 30), st.integers(0, 10**6))
def test_kfold_stratification(k, extra_pos, extra_neg, seed):
    ds = toy(k + extra_pos, k + extra_neg)
    folds = kfold_split(ds, k, seed)
    pos_counts = [(ds.y[val] == 1).sum() for _, val in folds]
    neg_counts = [(ds.y[val] == -1).sum() for _, val in folds]
    assert max(pos_counts) - min(pos_counts) <= 1
    assert max(neg_counts) - min(neg_counts) <= 1
    assert sorted(np.concatenate([v for _, v in folds]).tolist()) == list(range(len(ds)))


def test_holdout_split():
    ds = toy(20, 80)
    train, test = holdout_split(ds, 0.2, seed=1)
    assert (ds.y[test] == 1).sum() == 4 and (ds.y[test] == -1).sum() == 16
    assert np.intersect1d(train, test).size == 0 and train.size + test.size == 100


@pytest.mark.parametrize("spr, expected", [(0.25, 16), (0.05, 3), (0.001, 1), (0.999, 63)])
def test_spr_quota(spr, expected):
    assert spr_quota(spr, 64) == expected


def test_sample_batch_quota():
    ds = toy(30, 300)
    rng = np.random.default_rng(0)
    for _ in range(200):
        pos, neg = sample_batch(ds, SamplerConfig(64, 0.25), rng)
        assert pos.size == 16 and neg.size == 48
        assert np.all(ds.y[pos] == 1) and np.all(ds.y[neg] == -1)


def test_sample_batch_small_pool_uses_replacement():
    ds = toy(3, 100)
    pos, neg = sample_batch(ds, SamplerConfig(64, 0.5), np.random.default_rng(0))
    assert pos.size == 32 and set(pos.tolist()) <= {0, 1, 2}


def test_sample_batch_restricted_pool():
    ds = toy(10, 40)
    pool = np.arange(0, 50, 2)
    pos, neg = sample_batch(ds, SamplerConfig(8, 0.5), np.random.default_rng(0), pool)
    assert np.all(np.isin(np.concatenate([pos, neg]), pool))
    with pytest.raises(EmptyClass):
        sample_batch(ds, SamplerConfig(8, 0.5), np.random.default_rng(0), np.arange(10))


def test_origin_rate_matches_dataset():
    ds = toy(100, 900)
    rng = np.random.default_rng(2)
    # at B=64 an all-negative draw (and its repair) has probability 0.9**64
    B, n = 64, 10_000
    frac = np.array([sample_batch(ds, SamplerConfig(B), rng)[0].size / B for _ in range(n)])
    se = np.sqrt(0.1 * 0.9 / B / n)
    assert abs(frac.mean() - 0.1) <= 3 * se


def test_origin_repairs_missing_class():
    ds = toy(1, 999)
    rng = np.random.default_rng(0)
    for _ in range(100):
        pos, neg = sample_batch(ds, SamplerConfig(4), rng)
        assert pos.size >= 1 and neg.size >= 1 and pos.size + neg.size == 4


def test_sampler_reproducible():
    ds = toy(20, 200)
    a = BatchSampler(ds, SamplerConfig(16, 0.25, seed=9))
    b = BatchSampler(ds, SamplerConfig(16, 0.25, seed=9))
    for _ in range(20):
        (pa, na), (pb, nb) = a(), b()
        np.testing.assert_array_equal(pa, pb)
        np.testing.assert_array_equal(na, nb)
    assert a.iterations_per_epoch() == 14


@pytest.mark.parametrize("kwargs", [{"batch_size": 1}, {"spr": 0.0}, {"spr": 1.0}, {"spr": "balanced"}])
def test_sampler_config_validation(kwargs):
    with pytest.raises(BadParams):
        SamplerConfig(**kwargs)
