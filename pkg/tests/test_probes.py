import csv
import math

import pytest

from biasmeter.lexicon import GenderLexicon
from biasmeter.mlm import MlmConfig, TrainConfig, Vocabulary, init_params, train
from biasmeter.mlm.vocab import SPECIALS
from biasmeter.probes import (
    gender_of_word,
    load_default_occupations,
    occupation_probe,
    plot_probe_curve,
    save_aggregate_csv,
    save_probe_csv,
    topk_probe,
)
from biasmeter.scoring import StubScorer, TinyMlmScorer


def test_default_occupations_load_nonempty():
    occs = load_default_occupations()
    assert len(occs) >= 20
    assert all(occ == occ.strip().lower() for occ in occs)


def test_equal_logit_stub_gives_half_renorm():
    stub = StubScorer(token_logprobs={"he": -1.3, "she": -1.3, "doctor": -2.0})
    res = occupation_probe(stub, ["doctor", "nurse"])
    assert res.mean_p_he == pytest.approx(res.mean_p_she)
    assert res.mean_p_he_renorm == pytest.approx(0.5)
    assert res.per_occupation["doctor"] == pytest.approx(
        (math.exp(-1.3), math.exp(-1.3)))


def test_unequal_logit_stub_direction():
    stub = StubScorer(token_logprobs={"he": -0.5, "she": -2.0})
    res = occupation_probe(stub, ["doctor"])
    assert res.mean_p_he > res.mean_p_she
    assert res.mean_p_he_renorm > 0.5


def test_probe_skips_oov_occupation(tiny_scorer):
    res = occupation_probe(tiny_scorer, ["doctor", "zzznotaword"])
    assert res.n_skipped == 1
    assert set(res.per_occupation) == {"doctor"}


def test_probe_empty_occupations_rejected(tiny_scorer):
    with pytest.raises(ValueError, match="empty"):
        occupation_probe(tiny_scorer, [])


def test_probe_all_skipped_rejected(tiny_scorer):
    with pytest.raises(ValueError, match="skipped"):
        occupation_probe(tiny_scorer, ["zzz1", "zzz2"])


def test_topk_descending_and_capped(tiny_scorer):
    res = topk_probe(tiny_scorer, ["he", "is", "a", "doctor"], 0, k=5)
    probs = [p for _, p in res.topk]
    assert len(res.topk) == 5
    assert probs == sorted(probs, reverse=True)
    assert all(0 <= p <= 1 for p in probs)


def test_topk_k_larger_than_vocab(tiny_scorer):
    res = topk_probe(tiny_scorer, ["he", "is", "a", "doctor"], 0, k=10_000)
    assert len(res.topk) == len(tiny_scorer.vocab_words())


def test_topk_bad_position(tiny_scorer):
    with pytest.raises(ValueError, match="out of range"):
        topk_probe(tiny_scorer, ["he", "is"], 7, k=3)


def test_topk_explicit_candidates():
    stub = StubScorer(token_logprobs={"he": -0.5, "she": -2.0, "dog": -4.0})
    res = topk_probe(stub, ["he", "runs"], 0, k=2,
                     candidates=["she", "dog", "he"])
    assert [w for w, _ in res.topk] == ["he", "she"]


def test_topk_requires_vocab_listing():
    with pytest.raises(ValueError, match="candidates"):
        topk_probe(StubScorer(), ["he", "runs"], 0, k=2)


def test_gender_of_word(lexicon):
    assert gender_of_word("he", lexicon) == "male"
    assert gender_of_word("wife", lexicon) == "female"
    assert gender_of_word("doctor", lexicon) == "neutral"


@pytest.fixture(scope="module")
def gendered_scorers():
    """Two tiny models trained on opposite single-gender corpora."""
    words = SPECIALS + ("he", "she", "is", "a", "doctor", "nurse", "the")
    vocab = Vocabulary(words=words)
    cfg = MlmConfig(d=16, heads=2, layers=1, d_ff=32, max_len=8)
    base = init_params(cfg, vocab.size, seed=0)
    male = [["he", "is", "a", "doctor"], ["he", "is", "a", "nurse"]] * 60
    female = [["she", "is", "a", "doctor"], ["she", "is", "a", "nurse"]] * 60
    tc = TrainConfig(learning_rate=0.05, epochs=3, seed=1)
    male_params, _ = train(base, cfg, vocab, male, tc)
    female_params, _ = train(base, cfg, vocab, female, tc)
    return (
        TinyMlmScorer(male_params, cfg, vocab, backend_id="male"),
        TinyMlmScorer(female_params, cfg, vocab, backend_id="female"),
    )


def test_probe_tracks_training_gender(gendered_scorers):
    male_scorer, female_scorer = gendered_scorers
    res_m = occupation_probe(male_scorer, ["doctor", "nurse"], r=1.0)
    res_f = occupation_probe(female_scorer, ["doctor", "nurse"], r=0.0)
    assert res_m.mean_p_he > res_m.mean_p_she
    assert res_f.mean_p_she > res_f.mean_p_he
    assert res_m.mean_p_he_renorm > 0.5 > res_f.mean_p_he_renorm


def test_topk_surfaces_trained_pronoun(gendered_scorers):
    male_scorer, _ = gendered_scorers
    res = topk_probe(male_scorer, ["he", "is", "a", "doctor"], 0, k=3)
    assert res.topk[0][0] == "he"


def test_probe_csv_round_trip(tmp_path):
    stub = StubScorer(token_logprobs={"he": -0.5, "she": -2.0})
    results = [occupation_probe(stub, ["doctor"], r=r) for r in (0.0, 1.0)]
    per = tmp_path / "probe.csv"
    agg = tmp_path / "agg.csv"
    save_probe_csv(results, per)
    save_aggregate_csv(results, agg)
    rows = list(csv.DictReader(per.open()))
    assert [row["r"] for row in rows] == ["0.0", "1.0"]
    assert float(rows[0]["p_he"]) == pytest.approx(math.exp(-0.5))
    arows = list(csv.DictReader(agg.open()))
    assert float(arows[1]["mean_p_he_renorm"]) == pytest.approx(
        results[1].mean_p_he_renorm, abs=1e-9)


def test_plot_writes_png(tmp_path):
    stub = StubScorer(token_logprobs={"he": -0.5, "she": -2.0})
    results = [occupation_probe(stub, ["doctor"], r=r) for r in (0.0, 0.5, 1.0)]
    out = tmp_path / "curve.png"
    plot_probe_curve(results, out)
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
