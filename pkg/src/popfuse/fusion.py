"""Cross-attention fusion of the two modality embeddings, the classifier,
and the cross-entropy loss.

The asymmetric block projects the functional embeddings into queries while
the structural embeddings act as keys and values unprojected, so fusion is
directional: functional representations select structural context, not the
other way around. Ablation variants (plain concatenation, symmetric
two-stream attention) live behind one mode switch.
"""

from __future__ import annotations

import numpy as np

from .numcore import (DimensionError, ParameterError, Tensor, concat_cols,
                      dropout, gelu, layer_norm, softmax_rows)

FUSION_MODES = ("concat", "symmetric", "asymmetric")


def multi_head_attention(q: Tensor, k: Tensor, v: Tensor, w_out: Tensor,
                         n_heads: int) -> Tensor:
    """Scaled dot-product attention over subjects, heads split by columns."""
    d = q.shape[1]
    if d % n_heads != 0:
        raise DimensionError(f"embedding dim {d} not divisible by {n_heads} heads")
    head_dim = d // n_heads
    scale = 1.0 / np.sqrt(head_dim)
    heads = []
    for h in range(n_heads):
        lo, hi = h * head_dim, (h + 1) * head_dim
        qh, kh, vh = q.cols(lo, hi), k.cols(lo, hi), v.cols(lo, hi)
        attn = softmax_rows((qh @ kh.T) * scale)
        heads.append(attn @ vh)
    return concat_cols(heads) @ w_out


def attention_rows(q: np.ndarray, k: np.ndarray, n_heads: int) -> list[np.ndarray]:
    """Per-head attention matrices for inspection (numpy, no grad)."""
    head_dim = q.shape[1] // n_heads
    out = []
    for h in range(n_heads):
        lo, hi = h * head_dim, (h + 1) * head_dim
        logits = q[:, lo:hi] @ k[:, lo:hi].T / np.sqrt(head_dim)
        e = np.exp(logits - logits.max(axis=1, keepdims=True))
        out.append(e / e.sum(axis=1, keepdims=True))
    return out


def asymmetric_cross_attention(h_func: Tensor, h_struct: Tensor,
                               params: dict[str, Tensor], n_heads: int,
                               prefix: str = "fusion") -> tuple[Tensor, Tensor]:
    """Functional queries attend to structural keys/values.

    Returns (Z, Q_f); the projected query is reused by the residual path.
    """
    if h_func.shape != h_struct.shape:
        raise DimensionError(
            f"embedding shapes differ: {h_func.shape} vs {h_struct.shape}")
    q = h_func @ params[f"{prefix}.W_Q"]
    z = multi_head_attention(q, h_struct, h_struct,
                             params[f"{prefix}.W_O"], n_heads)
    return z, q


def residual_refine(z: Tensor, q: Tensor, params: dict[str, Tensor],
                    dropout_rate: float, training: bool,
                    rng: np.random.Generator,
                    prefix: str = "fusion") -> Tensor:
    """Residual add with the projected query, then the feed-forward block."""
    z_r = z + q
    h = layer_norm(z_r, params[f"{prefix}.ln_gain"], params[f"{prefix}.ln_bias"])
    h = gelu(h @ params[f"{prefix}.ff1_W"] + params[f"{prefix}.ff1_b"])
    h = dropout(h, dropout_rate, training, rng)
    return h @ params[f"{prefix}.ff2_W"] + params[f"{prefix}.ff2_b"]


def fuse(h_func: Tensor, h_struct: Tensor, mode: str,
         params: dict[str, Tensor], n_heads: int, dropout_rate: float,
         training: bool, rng: np.random.Generator) -> Tensor:
    """Fused embedding under one of the three fusion strategies.

    ``concat`` doubles the feature width; ``symmetric`` runs two attention
    streams with exchanged query roles and concatenates their refined
    outputs; ``asymmetric`` is the single functional-query stream.
    """
    if mode == "concat":
        return concat_cols([h_func, h_struct])
    if mode == "asymmetric":
        z, q = asymmetric_cross_attention(h_func, h_struct, params, n_heads)
        return residual_refine(z, q, params, dropout_rate, training, rng)
    if mode == "symmetric":
        z1, q1 = asymmetric_cross_attention(h_func, h_struct, params, n_heads,
                                            prefix="fusion")
        s1 = residual_refine(z1, q1, params, dropout_rate, training, rng,
                             prefix="fusion")
        z2, q2 = asymmetric_cross_attention(h_struct, h_func, params, n_heads,
                                            prefix="fusion2")
        s2 = residual_refine(z2, q2, params, dropout_rate, training, rng,
                             prefix="fusion2")
        return concat_cols([s1, s2])
    raise ParameterError(f"unknown fusion mode: {mode}")


def classify(z: Tensor, params: dict[str, Tensor]) -> Tensor:
    """Linear logits over the diagnostic classes."""
    return z @ params["clf.W"] + params["clf.b"]


def cross_entropy(logits: Tensor, labels: np.ndarray,
                  mask: np.ndarray | None = None) -> Tensor:
    """Mean negative log-likelihood over the masked rows.

    Uses the log-sum-exp form with a detached row max. The mean (rather
    than a sum over subjects) keeps the learning rate independent of
    cohort size.
    """
    n, c = logits.shape
    labels = np.asarray(labels, dtype=int)
    if mask is None:
        mask = np.arange(n)
    mask = np.asarray(mask, dtype=int)
    if mask.size == 0:
        raise ParameterError("cross_entropy mask selects no rows")
    row_max = Tensor(logits.data.max(axis=1, keepdims=True))
    shifted = logits - row_max
    log_norm = shifted.exp().sum(axis=1, keepdims=True).log()
    log_probs = shifted - log_norm
    onehot = np.zeros((n, c))
    onehot[np.arange(n), labels] = 1.0
    row_scale = np.zeros((n, 1))
    row_scale[mask, 0] = 1.0 / mask.size
    picked = (log_probs * Tensor(onehot)).sum(axis=1, keepdims=True)
    return -(picked * Tensor(row_scale)).sum()


def predict_probabilities(logits: np.ndarray) -> np.ndarray:
    """Softmax probabilities from raw logits (numpy, no grad)."""
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)
