import numpy as np
import pytest

from biasmeter.lexicon import GenderLexicon, load_default_lexicon
from biasmeter.mlm import MlmConfig, Vocabulary, init_params
from biasmeter.mlm.vocab import SPECIALS
from biasmeter.scoring import TinyMlmScorer


@pytest.fixture(scope="session")
def lexicon():
    return load_default_lexicon()


@pytest.fixture
def tiny_lexicon():
    return GenderLexicon(frozenset({"she", "her"}), frozenset({"he", "his"}))


@pytest.fixture(scope="session")
def tiny_model():
    """A small random (untrained) model with a hand-picked vocabulary."""
    words = SPECIALS + (
        "he", "she", "his", "her", "is", "a", "an", "the",
        "doctor", "nurse", "writer", "engineer", "works", "as",
        "man", "woman", "went", "home", "dog", "barked",
    )
    vocab = Vocabulary(words=words)
    cfg = MlmConfig(d=16, heads=2, layers=1, d_ff=32, max_len=24)
    params = init_params(cfg, vocab.size, seed=42)
    return params, cfg, vocab


@pytest.fixture
def tiny_scorer(tiny_model):
    params, cfg, vocab = tiny_model
    return TinyMlmScorer(params, cfg, vocab)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
