"""Versioned binary checkpoint container.

Layout: magic "TMLM" | version u32 LE | header length u64 LE | JSON header
(hyperparameters, vocab, metadata, tensor shapes in declared order) |
tensor payloads, little-endian float64, in the declared order.
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from .model import MlmConfig, param_names
from .vocab import Vocabulary

MAGIC = b"TMLM"
VERSION = 1


def save_checkpoint(params: dict[str, np.ndarray], cfg: MlmConfig,
                    vocab: Vocabulary, path: str | Path,
                    meta: dict | None = None) -> None:
    names = param_names(cfg)
    header = {
        "config": cfg.to_dict(),
        "vocab": list(vocab.words),
        "tensors": [[n, list(params[n].shape)] for n in names],
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(params[n], dtype="<f8").tobytes())


def load_checkpoint(path: str | Path):
    """Returns (params, config, vocab, meta); round trip is bit-identical."""
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise CheckpointError(
            f"{path}: version mismatch: expected {VERSION}, found {version}"
        )
    (hlen,) = struct.unpack_from("<Q", data, 8)
    if len(data) < 16 + hlen:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(data[16 : 16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from exc
    cfg = MlmConfig(**header["config"])
    vocab = Vocabulary(words=tuple(header["vocab"]))
    declared = header["tensors"]
    if [n for n, _ in declared] != param_names(cfg):
        raise CheckpointError(f"{path}: tensor list does not match config")
    params: dict[str, np.ndarray] = {}
    offset = 16 + hlen
    for name, shape in declared:
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(data):
            raise CheckpointError(f"{path}: truncated tensor payload at {name}")
        params[name] = np.frombuffer(
            data, dtype="<f8", count=count, offset=offset
        ).reshape(shape).copy()
        offset += nbytes
    if offset != len(data):
        raise CheckpointError(f"{path}: {len(data) - offset} trailing bytes")
    if params["emb"].shape[0] != vocab.size:
        raise CheckpointError(
            f"{path}: vocab size mismatch: embeddings {params['emb'].shape[0]}, "
            f"vocab {vocab.size}"
        )
    return params, cfg, vocab, header["meta"]


def checkpoint_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
