"""Numerical verification suite: end-to-end gradient check, Chebyshev
spectral oracle, and edge-weight range/invariance checks.

Shared by the ``gradcheck`` CLI subcommand and the acceptance tests.
"""

from __future__ import annotations

import numpy as np

from . import gcn, model, popgraph
from .fusion import cross_entropy
from .model import ModelConfig
from .numcore import Tensor, grad_check


def fused_network_grad_check(n_subjects: int = 12, feature_dim: int = 20,
                             embed_dim: int = 16, seed: int = 0,
                             samples_per_param: int = 6) -> float:
    """Max relative gradient error of the full multimodal network.

    PAE + both encoders + asymmetric fusion + classifier, dropout off,
    against central finite differences.
    """
    hidden = embed_dim // 4
    cfg = ModelConfig(modality="multimodal", fusion_mode="asymmetric",
                      n_gcn_layers=4, hidden_dim=hidden, cheb_order=3,
                      pae_latent_dim=16, n_heads=4, dropout_rate=0.0)
    rng = np.random.default_rng(seed)
    phen_dim = 5
    params = model.init_params(cfg, feature_dim, feature_dim, phen_dim, rng)
    xf = rng.normal(size=(n_subjects, feature_dim))
    xs = rng.normal(size=(n_subjects, feature_dim))
    phen = rng.normal(size=(n_subjects, phen_dim))
    mask = 1.0 - np.eye(n_subjects)
    labels = rng.integers(0, 2, size=n_subjects)
    labels[0], labels[1] = 0, 1  # both classes present

    def closure():
        logits, _ = model.forward(params, cfg, xf, xs, phen, mask,
                                  training=False, rng=rng)
        return cross_entropy(logits, labels)

    return grad_check(closure, params, h=1e-5,
                      max_samples_per_param=samples_per_param, seed=seed)


def chebyshev_oracle_check(n_graphs: int = 50, n_nodes: int = 6,
                           order: int = 3, seed: int = 0) -> float:
    """Max |recurrence - explicit spectral filtering| over random graphs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_graphs):
        edges = [(i, j) for i in range(n_nodes) for j in range(i + 1, n_nodes)
                 if rng.random() < 0.7]
        weights = rng.random(len(edges))
        lap = popgraph.scaled_laplacian(n_nodes, edges, weights)
        x = rng.normal(size=(n_nodes, 4))
        thetas = [rng.normal(size=(4, 3)) for _ in range(order)]
        bias = rng.normal(size=3)
        got = gcn.cheb_conv(Tensor(x), Tensor(lap),
                            [Tensor(t) for t in thetas], Tensor(bias)).data
        want = gcn.spectral_cheb_conv_reference(x, lap, thetas, bias)
        worst = max(worst, float(np.max(np.abs(got - want))))
    return worst


def edge_weight_invariance_check(n_pairs: int = 10_000, dim: int = 128,
                                 seed: int = 0) -> dict:
    """Range, symmetry, and positive-rescaling invariance of edge weights."""
    rng = np.random.default_rng(seed)
    out_of_range = 0
    max_asym = 0.0
    max_scale_dev = 0.0
    for _ in range(n_pairs):
        h_i = rng.normal(size=dim)
        h_j = rng.normal(size=dim)
        w = popgraph.pae_edge_weight(h_i, h_j)
        if not 0.0 <= w <= 1.0:
            out_of_range += 1
        max_asym = max(max_asym,
                       abs(w - popgraph.pae_edge_weight(h_j, h_i)))
        for c in (0.5, 3.0):
            max_scale_dev = max(
                max_scale_dev, abs(popgraph.pae_edge_weight(c * h_i, h_j) - w))
    return {"out_of_range": out_of_range, "max_asymmetry": max_asym,
            "max_scale_deviation": max_scale_dev}


def run_suite(verbose: bool = True) -> bool:
    """Run all checks; returns True when every tolerance holds."""
    ok = True

    err = fused_network_grad_check()
    passed = err < 1e-4
    ok &= passed
    if verbose:
        print(f"[{'PASS' if passed else 'FAIL'}] full-network gradient check: "
              f"max rel error {err:.3e} (tol 1e-4)")

    dev = chebyshev_oracle_check()
    passed = dev < 1e-8
    ok &= passed
    if verbose:
        print(f"[{'PASS' if passed else 'FAIL'}] Chebyshev spectral oracle: "
              f"max abs deviation {dev:.3e} (tol 1e-8)")

    inv = edge_weight_invariance_check()
    passed = (inv["out_of_range"] == 0 and inv["max_asymmetry"] == 0.0
              and inv["max_scale_deviation"] < 1e-12)
    ok &= passed
    if verbose:
        print(f"[{'PASS' if passed else 'FAIL'}] edge-weight range/invariance: "
              f"{inv}")
    return bool(ok)
