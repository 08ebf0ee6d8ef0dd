"""Edge-weighted Chebyshev graph convolution and the multi-scale encoder.

The convolution applies the three-term recurrence directly to the feature
matrix (T_0 X = X, T_1 X = L X, T_k X = 2 L T_{k-1} X - T_{k-2} X), never
materializing polynomial matrices. One encoder instance per modality; both
consume the same rescaled Laplacian.
"""

from __future__ import annotations

import numpy as np

from .numcore import ParameterError, Tensor, concat_cols, dropout


def cheb_conv(x: Tensor, laplacian: Tensor, thetas: list[Tensor],
              bias: Tensor) -> Tensor:
    """Sum_k T_k(L) X theta_k + bias via the Chebyshev recurrence."""
    k = len(thetas)
    if k < 1:
        raise ParameterError("Chebyshev order must be >= 1")
    t_prev = x
    out = t_prev @ thetas[0]
    if k > 1:
        t_cur = laplacian @ x
        out = out + t_cur @ thetas[1]
        for i in range(2, k):
            t_next = 2.0 * (laplacian @ t_cur) - t_prev
            out = out + t_next @ thetas[i]
            t_prev, t_cur = t_cur, t_next
    return out + bias


def encoder_layer_names(prefix: str, n_layers: int, order: int) -> list[str]:
    names = []
    for layer in range(n_layers):
        names.extend(f"{prefix}.l{layer}.theta{k}" for k in range(order))
        names.append(f"{prefix}.l{layer}.bias")
    return names


def encode(x: Tensor, laplacian: Tensor, params: dict[str, Tensor],
           prefix: str, n_layers: int, order: int, dropout_rate: float,
           training: bool, rng: np.random.Generator) -> Tensor:
    """Stacked conv layers; output is the concat of every layer's embedding."""
    scales = []
    h = x
    for layer in range(n_layers):
        thetas = [params[f"{prefix}.l{layer}.theta{k}"] for k in range(order)]
        bias = params[f"{prefix}.l{layer}.bias"]
        h = cheb_conv(h, laplacian, thetas, bias).relu()
        h = dropout(h, dropout_rate, training, rng)
        scales.append(h)
    return concat_cols(scales)


def spectral_cheb_conv_reference(x: np.ndarray, laplacian: np.ndarray,
                                 thetas: list[np.ndarray],
                                 bias: np.ndarray) -> np.ndarray:
    """Oracle: explicit U T_k(Lambda) U^T X theta_k via eigendecomposition.

    Only for verification; O(N^3) and non-differentiable.
    """
    lam, u = np.linalg.eigh(laplacian)
    out = np.zeros((x.shape[0], thetas[0].shape[1]))
    tk_prev = np.ones_like(lam)
    tk_cur = lam.copy()
    for k, theta in enumerate(thetas):
        if k == 0:
            tk = tk_prev
        elif k == 1:
            tk = tk_cur
        else:
            tk = 2.0 * lam * tk_cur - tk_prev
            tk_prev, tk_cur = tk_cur, tk
        out += (u * tk) @ (u.T @ x) @ theta
    return out + bias
