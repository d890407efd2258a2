"""A small pre-LN transformer encoder MLM in numpy, float64 throughout.

Forward exposes per-token received-attention weights (mean of attention
received over all layers, heads, and query positions); backward is
implemented by hand so gradients can be checked against finite
differences.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

LN_EPS = 1e-5
NEG_INF = -1e30
_GELU_C = float(np.sqrt(2.0 / np.pi))
_GELU_A = 0.044715


@dataclass(frozen=True)
class MlmConfig:
    d: int = 64
    heads: int = 4
    layers: int = 1
    d_ff: int = 256
    max_len: int = 128

    def __post_init__(self):
        if self.d % self.heads != 0:
            raise ValueError(f"d={self.d} not divisible by heads={self.heads}")

    def to_dict(self) -> dict:
        return asdict(self)


def param_names(cfg: MlmConfig) -> list[str]:
    """Fixed declared parameter order (checkpoint layout depends on it)."""
    names = ["emb", "pos"]
    for i in range(cfg.layers):
        names += [
            f"l{i}.ln1_g", f"l{i}.ln1_b",
            f"l{i}.wq", f"l{i}.wk", f"l{i}.wv", f"l{i}.wo",
            f"l{i}.ln2_g", f"l{i}.ln2_b",
            f"l{i}.w1", f"l{i}.b1", f"l{i}.w2", f"l{i}.b2",
        ]
    names += ["lnf_g", "lnf_b", "out_b"]
    return names


def init_params(cfg: MlmConfig, vocab_size: int, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    d, dff = cfg.d, cfg.d_ff

    def w(*shape):
        return rng.normal(0.0, 0.02, size=shape)

    p: dict[str, np.ndarray] = {
        "emb": w(vocab_size, d),
        "pos": w(cfg.max_len, d),
        "lnf_g": np.ones(d),
        "lnf_b": np.zeros(d),
        "out_b": np.zeros(vocab_size),
    }
    for i in range(cfg.layers):
        p[f"l{i}.ln1_g"] = np.ones(d)
        p[f"l{i}.ln1_b"] = np.zeros(d)
        p[f"l{i}.wq"] = w(d, d)
        p[f"l{i}.wk"] = w(d, d)
        p[f"l{i}.wv"] = w(d, d)
        p[f"l{i}.wo"] = w(d, d)
        p[f"l{i}.ln2_g"] = np.ones(d)
        p[f"l{i}.ln2_b"] = np.zeros(d)
        p[f"l{i}.w1"] = w(d, dff)
        p[f"l{i}.b1"] = np.zeros(dff)
        p[f"l{i}.w2"] = w(dff, d)
        p[f"l{i}.b2"] = np.zeros(d)
    return {k: p[k] for k in param_names(cfg)}


def _gelu(x):
    u = _GELU_C * (x + _GELU_A * x**3)
    return 0.5 * x * (1.0 + np.tanh(u))


def _gelu_grad(x):
    u = _GELU_C * (x + _GELU_A * x**3)
    t = np.tanh(u)
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * _GELU_C * (1.0 + 3 * _GELU_A * x**2)


def _layernorm(x, g, b):
    mu = x.mean(-1, keepdims=True)
    var = x.var(-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mu) * inv
    return xhat * g + b, (xhat, inv)


def _layernorm_bwd(dy, g, cache):
    xhat, inv = cache
    dg = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    db = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * g
    m1 = dxhat.mean(-1, keepdims=True)
    m2 = (dxhat * xhat).mean(-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, dg, db


def _split_heads(x, heads):
    b, t, d = x.shape
    return x.reshape(b, t, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def _forward(params, cfg: MlmConfig, ids, pad_mask, keep_cache):
    ids = np.asarray(ids)
    if ids.ndim == 1:
        ids = ids[None, :]
    b, t = ids.shape
    if t > cfg.max_len:
        raise ValueError(f"sequence length {t} exceeds max_len {cfg.max_len}")
    if pad_mask is None:
        pad_mask = np.ones((b, t), dtype=bool)
    key_bias = np.where(pad_mask[:, None, None, :], 0.0, NEG_INF)

    emb = params["emb"]
    x = emb[ids] + params["pos"][:t]
    scale = 1.0 / np.sqrt(cfg.d // cfg.heads)
    layers_cache = []
    attn_mats = []
    for i in range(cfg.layers):
        g1, b1 = params[f"l{i}.ln1_g"], params[f"l{i}.ln1_b"]
        a, ln1c = _layernorm(x, g1, b1)
        q = _split_heads(a @ params[f"l{i}.wq"], cfg.heads)
        k = _split_heads(a @ params[f"l{i}.wk"], cfg.heads)
        v = _split_heads(a @ params[f"l{i}.wv"], cfg.heads)
        s = q @ k.transpose(0, 1, 3, 2) * scale + key_bias
        s -= s.max(-1, keepdims=True)
        e = np.exp(s)
        attn = e / e.sum(-1, keepdims=True)
        ctx = _merge_heads(attn @ v)
        o = ctx @ params[f"l{i}.wo"]
        x_attn = x + o

        g2, b2 = params[f"l{i}.ln2_g"], params[f"l{i}.ln2_b"]
        f, ln2c = _layernorm(x_attn, g2, b2)
        h1 = f @ params[f"l{i}.w1"] + params[f"l{i}.b1"]
        gact = _gelu(h1)
        o2 = gact @ params[f"l{i}.w2"] + params[f"l{i}.b2"]
        x_out = x_attn + o2

        attn_mats.append(attn)
        if keep_cache:
            layers_cache.append((x, a, ln1c, q, k, v, attn, ctx, x_attn, f, ln2c, h1, gact))
        x = x_out

    hf, lnfc = _layernorm(x, params["lnf_g"], params["lnf_b"])
    logits = hf @ emb.T + params["out_b"]
    cache = (ids, pad_mask, x, hf, lnfc, layers_cache) if keep_cache else None
    return logits, attn_mats, cache


def received_attention(attn_mats, pad_mask=None):
    """Mean attention received per token, over layers, heads, and queries.

    Each attention row sums to 1, so the result sums to 1 per sequence.
    """
    stacked = np.stack(attn_mats)  # (L, B, H, Tq, Tk)
    if pad_mask is None:
        return stacked.mean(axis=(0, 2, 3))
    w = pad_mask[None, :, None, :, None].astype(float)
    received = (stacked * w).sum(axis=(0, 2, 3))
    totals = received.sum(-1, keepdims=True)
    return received / totals


def forward(params, cfg: MlmConfig, ids, pad_mask=None, want_attention=False):
    """Return (log_probs (B,T,V), received attention (B,T) or None)."""
    logits, attn_mats, _ = _forward(params, cfg, ids, pad_mask, keep_cache=False)
    alpha = received_attention(attn_mats, pad_mask) if want_attention else None
    return log_softmax(logits), alpha


def log_softmax(logits):
    m = logits.max(-1, keepdims=True)
    z = logits - m
    return z - np.log(np.exp(z).sum(-1, keepdims=True))


def loss_and_grads(params, cfg: MlmConfig, ids, pad_mask, target_mask, target_ids):
    """Mean masked-token cross-entropy and gradients for every parameter.

    target_mask (B,T) marks positions that count toward the loss;
    target_ids holds the original token id at those positions.
    """
    ids = np.atleast_2d(np.asarray(ids))
    target_mask = np.atleast_2d(np.asarray(target_mask)).astype(bool)
    target_ids = np.atleast_2d(np.asarray(target_ids))
    logits, _, cache = _forward(params, cfg, ids, pad_mask, keep_cache=True)
    _, pad_mask, x_top, hf, lnfc, layers_cache = cache
    b, t, vsize = logits.shape
    n_tgt = int(target_mask.sum())
    if n_tgt == 0:
        return 0.0, {k: np.zeros_like(v) for k, v in params.items()}

    logp = log_softmax(logits)
    rows = np.nonzero(target_mask)
    tgt = target_ids[rows]
    loss = -logp[rows[0], rows[1], tgt].sum() / n_tgt

    probs = np.exp(logp)
    dlogits = np.zeros_like(logits)
    dlogits[rows] = probs[rows]
    dlogits[rows[0], rows[1], tgt] -= 1.0
    dlogits /= n_tgt

    grads = {k: np.zeros_like(v) for k, v in params.items()}
    emb = params["emb"]
    grads["out_b"] = dlogits.sum((0, 1))
    dhf = dlogits @ emb
    grads["emb"] += np.einsum("btv,btd->vd", dlogits, hf)

    dx, dgf, dbf = _layernorm_bwd(dhf, params["lnf_g"], lnfc)
    grads["lnf_g"] += dgf
    grads["lnf_b"] += dbf

    scale = 1.0 / np.sqrt(cfg.d // cfg.heads)
    for i in reversed(range(cfg.layers)):
        (x_in, a, ln1c, q, k, v, attn, ctx, x_attn, f, ln2c, h1, gact) = layers_cache[i]
        # feed-forward block
        do2 = dx
        grads[f"l{i}.b2"] += do2.sum((0, 1))
        grads[f"l{i}.w2"] += np.einsum("btf,btd->fd", gact, do2)
        dgact = do2 @ params[f"l{i}.w2"].T
        dh1 = dgact * _gelu_grad(h1)
        grads[f"l{i}.b1"] += dh1.sum((0, 1))
        grads[f"l{i}.w1"] += np.einsum("btd,btf->df", f, dh1)
        df = dh1 @ params[f"l{i}.w1"].T
        dxa, dg2, db2 = _layernorm_bwd(df, params[f"l{i}.ln2_g"], ln2c)
        grads[f"l{i}.ln2_g"] += dg2
        grads[f"l{i}.ln2_b"] += db2
        dx_attn = dx + dxa
        # attention block
        do = dx_attn
        grads[f"l{i}.wo"] += np.einsum("btd,bte->de", ctx, do)
        dctx = _split_heads(do @ params[f"l{i}.wo"].T, cfg.heads)
        dattn = dctx @ v.transpose(0, 1, 3, 2)
        dv = attn.transpose(0, 1, 3, 2) @ dctx
        ds = attn * (dattn - (dattn * attn).sum(-1, keepdims=True))
        dq = ds @ k * scale
        dk = ds.transpose(0, 1, 3, 2) @ q * scale
        da = (
            _merge_heads(dq) @ params[f"l{i}.wq"].T
            + _merge_heads(dk) @ params[f"l{i}.wk"].T
            + _merge_heads(dv) @ params[f"l{i}.wv"].T
        )
        grads[f"l{i}.wq"] += np.einsum("btd,bte->de", a, _merge_heads(dq))
        grads[f"l{i}.wk"] += np.einsum("btd,bte->de", a, _merge_heads(dk))
        grads[f"l{i}.wv"] += np.einsum("btd,bte->de", a, _merge_heads(dv))
        dxi, dg1, db1 = _layernorm_bwd(da, params[f"l{i}.ln1_g"], ln1c)
        grads[f"l{i}.ln1_g"] += dg1
        grads[f"l{i}.ln1_b"] += db1
        dx = dx_attn + dxi

    # embedding lookup + positional
    np.add.at(grads["emb"], ids, dx)
    grads["pos"][:t] += dx.sum(0)
    return float(loss), grads
