import pytest
from hypothesis import given, strategies as st

from biasmeter.errors import ConfigurationError
from biasmeter.lexicon import (
    Gender,
    GenderLexicon,
    Sentence,
    classify_sentence,
    load_default_lexicon,
    load_lexicon,
    tokenize,
)

FEMALE = {"she", "woman", "female", "her", "wife", "mother", "girl",
          "sister", "daughter", "girlfriend"}
MALE = {"he", "man", "male", "him", "his", "husband", "father", "boy",
        "brother", "son", "boyfriend"}


def test_default_lexicon_word_lists():
    lex = load_default_lexicon()
    assert set(lex.female_words) == FEMALE
    assert set(lex.male_words) == MALE


def test_overlapping_word_is_named(tmp_path):
    p = tmp_path / "lex.txt"
    p.write_text("[female]\nher\nshe\n[male]\nher\nhe\n")
    with pytest.raises(ConfigurationError, match="her"):
        load_lexicon(p)


def test_empty_male_list_rejected(tmp_path):
    p = tmp_path / "lex.txt"
    p.write_text("[female]\nshe\n[male]\n")
    with pytest.raises(ConfigurationError):
        load_lexicon(p)


def test_classify_single_gender(lexicon):
    assert classify_sentence(Sentence.from_text(0, "she went home"), lexicon) is Gender.FEMALE


def test_classify_both_genders_excluded(lexicon):
    s = Sentence.from_text(0, "he told his wife a story")
    assert classify_sentence(s, lexicon) is Gender.EXCLUDED


def test_classify_no_gender_word_excluded(lexicon):
    s = Sentence.from_text(0, "the weather is nice")
    assert classify_sentence(s, lexicon) is Gender.EXCLUDED


def test_whole_token_matching_only(lexicon):
    # "hero" contains "her" as a substring but is not a lexicon hit
    s = Sentence.from_text(0, "the hero saved the day")
    assert classify_sentence(s, lexicon) is Gender.EXCLUDED


def test_tokenize_lowercases_and_splits():
    assert tokenize("She's HOME, now!") == ["she", "s", "home", "now"]


@given(st.text(max_size=80))
def test_classify_is_pure(text):
    lex = GenderLexicon(frozenset({"she"}), frozenset({"he"}))
    s = Sentence.from_text(0, text)
    assert classify_sentence(s, lex) is classify_sentence(s, lex)


@given(st.lists(st.sampled_from(["she", "he", "dog", "ran", "his"]), max_size=8))
def test_classify_matches_set_logic(tokens):
    lex = load_default_lexicon()
    s = Sentence(0, " ".join(tokens), tuple(tokens))
    got = classify_sentence(s, lex)
    has_f = bool(set(tokens) & lex.female_words)
    has_m = bool(set(tokens) & lex.male_words)
    expected = (
        Gender.FEMALE if has_f and not has_m
        else Gender.MALE if has_m and not has_f
        else Gender.EXCLUDED
    )
    assert got is expected
