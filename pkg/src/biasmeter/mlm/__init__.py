from .checkpoint import checkpoint_hash, load_checkpoint, save_checkpoint
from .model import MlmConfig, forward, init_params, log_softmax, loss_and_grads
from .train import FINETUNE_DEFAULTS, TrainConfig, epoch_mean_losses, train
from .vocab import BOS, EOS, MASK, PAD, SPECIALS, UNK, Vocabulary, build_vocab

__all__ = [
    "MlmConfig", "TrainConfig", "FINETUNE_DEFAULTS", "Vocabulary",
    "build_vocab", "init_params", "forward", "log_softmax", "loss_and_grads",
    "train", "epoch_mean_losses", "save_checkpoint", "load_checkpoint",
    "checkpoint_hash", "PAD", "UNK", "MASK", "BOS", "EOS", "SPECIALS",
]
