import pytest
import torch

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "he", "she", "is", "a", "the",
    "doctor", "nurse", "teacher", "work", "##ing", "runs", "home",
]


@pytest.fixture(scope="session")
def tiny_bert_dir(tmp_path_factory):
    """A small randomly initialized BERT saved to disk, loadable by path."""
    from transformers import BertConfig, BertForMaskedLM, BertTokenizer

    d = tmp_path_factory.mktemp("tiny-bert")
    tokenizer = BertTokenizer(vocab={w: i for i, w in enumerate(VOCAB)},
                              do_lower_case=True)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    torch.manual_seed(0)
    model = BertForMaskedLM(config)
    tokenizer.save_pretrained(d)
    model.save_pretrained(d)
    return d
