import pytest
from hypothesis import given, settings, strategies as st

from biasmeter.corpus import GenderedCorpus
from biasmeter.lexicon import Sentence
from biasmeter.sampler import (
    load_manifest,
    male_count,
    materialize,
    sample_dataset,
    sample_sweep,
    save_manifest,
)

RATES = [round(i / 10, 1) for i in range(11)]


def make_corpus(n):
    female = tuple(Sentence.from_text(i, f"she sentence {i}") for i in range(n))
    male = tuple(Sentence.from_text(n + i, f"he sentence {i}") for i in range(n))
    return GenderedCorpus(female=female, male=male, n=n, seed=0)


def test_r_zero_all_female():
    ds = sample_dataset(make_corpus(10), 0.0, seed=1)
    assert len(ds.male_part) == 0 and len(ds.female_part) == 10


def test_r_one_all_male():
    ds = sample_dataset(make_corpus(10), 1.0, seed=1)
    assert len(ds.male_part) == 10 and len(ds.female_part) == 0


def test_counts_at_r_03():
    ds = sample_dataset(make_corpus(1000), 0.3, seed=1)
    assert len(ds.male_part) == 300 and len(ds.female_part) == 700


def test_round_half_up():
    assert male_count(10, 0.25) == 3  # 2.5 rounds up
    assert male_count(10, 0.24) == 2
    assert male_count(3, 0.5) == 2    # 1.5 rounds up


def test_rate_out_of_range():
    with pytest.raises(ValueError):
        sample_dataset(make_corpus(10), 1.5, seed=1)
    with pytest.raises(ValueError):
        sample_dataset(make_corpus(10), -0.1, seed=1)


def test_parts_disjoint_and_from_right_sides():
    corpus = make_corpus(50)
    ds = sample_dataset(corpus, 0.4, seed=3)
    male_ids = {s.id for s in corpus.male}
    female_ids = {s.id for s in corpus.female}
    assert set(ds.male_part) <= male_ids
    assert set(ds.female_part) <= female_ids
    assert not set(ds.male_part) & set(ds.female_part)


def test_sweep_has_one_dataset_per_rate():
    datasets = sample_sweep(make_corpus(20), RATES, seed=2)
    assert [ds.r for ds in datasets] == RATES


def test_sweep_monotone_male_counts():
    datasets = sample_sweep(make_corpus(37), RATES, seed=2)
    counts = [len(ds.male_part) for ds in datasets]
    assert counts == sorted(counts)
    assert all(len(ds.male_part) + len(ds.female_part) == 37 for ds in datasets)


def test_sweep_determinism():
    corpus = make_corpus(30)
    a = sample_sweep(corpus, RATES, seed=7)
    b = sample_sweep(corpus, RATES, seed=7)
    assert [(d.male_part, d.female_part) for d in a] == \
           [(d.male_part, d.female_part) for d in b]


def test_symmetric_half_split():
    ds = sample_dataset(make_corpus(10), 0.5, seed=4)
    assert len(ds.male_part) == 5 and len(ds.female_part) == 5


@settings(max_examples=40)
@given(n=st.integers(1, 120), r=st.floats(0, 1), seed=st.integers(0, 10))
def test_total_size_invariant(n, r, seed):
    ds = sample_dataset(make_corpus(n), r, seed)
    assert len(ds.male_part) + len(ds.female_part) == n
    assert len(ds.male_part) == male_count(n, r)


def test_manifest_round_trip(tmp_path):
    ds = sample_dataset(make_corpus(12), 0.3, seed=9)
    p = tmp_path / "ds.json"
    save_manifest(ds, p)
    loaded = load_manifest(p)
    assert loaded == ds


def test_materialize_writes_training_text(tmp_path):
    corpus = make_corpus(6)
    ds = sample_dataset(corpus, 0.5, seed=1)
    p = tmp_path / "train.txt"
    materialize(ds, corpus, p)
    lines = p.read_text().splitlines()
    assert len(lines) == 6
    assert sum(line.startswith("he") for line in lines) == 3
