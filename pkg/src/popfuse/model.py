"""Assembly of the full network: PAE-driven graph, per-modality encoders,
fusion, and classifier, as one parameter dict plus one forward function."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fusion, gcn, popgraph
from .numcore import ParameterError, Tensor

MODALITY_MODES = ("func", "func+pheno", "struct", "struct+pheno", "multimodal")


@dataclass
class ModelConfig:
    modality: str = "multimodal"
    fusion_mode: str = "asymmetric"
    cheb_order: int = 3
    n_gcn_layers: int = 4
    hidden_dim: int = 16
    pae_latent_dim: int = 128
    n_heads: int = 4
    ff_expansion: int = 4
    dropout_rate: float = 0.2

    @property
    def embed_dim(self) -> int:
        return self.n_gcn_layers * self.hidden_dim

    @property
    def uses_pae(self) -> bool:
        return self.modality in ("func+pheno", "struct+pheno", "multimodal")

    @property
    def classifier_dim(self) -> int:
        if self.modality != "multimodal":
            return self.embed_dim
        if self.fusion_mode in ("concat", "symmetric"):
            return 2 * self.embed_dim
        return self.embed_dim

    def validate(self) -> None:
        if self.modality not in MODALITY_MODES:
            raise ParameterError(f"unknown modality mode: {self.modality}")
        if self.fusion_mode not in fusion.FUSION_MODES:
            raise ParameterError(f"unknown fusion mode: {self.fusion_mode}")
        if self.embed_dim % self.n_heads != 0:
            raise ParameterError("embed dim must be divisible by n_heads")


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out)),
                  requires_grad=True)


def _zeros(*shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


def _encoder_params(params, rng, prefix, in_dim, cfg: ModelConfig) -> None:
    d = in_dim
    for layer in range(cfg.n_gcn_layers):
        for k in range(cfg.cheb_order):
            params[f"{prefix}.l{layer}.theta{k}"] = _glorot(rng, d, cfg.hidden_dim)
        params[f"{prefix}.l{layer}.bias"] = _zeros(cfg.hidden_dim)
        d = cfg.hidden_dim


def _fusion_params(params, rng, prefix, cfg: ModelConfig) -> None:
    d = cfg.embed_dim
    hidden = cfg.ff_expansion * d
    params[f"{prefix}.W_Q"] = _glorot(rng, d, d)
    params[f"{prefix}.W_O"] = _glorot(rng, d, d)
    params[f"{prefix}.ln_gain"] = Tensor(np.ones(d), requires_grad=True)
    params[f"{prefix}.ln_bias"] = _zeros(d)
    params[f"{prefix}.ff1_W"] = _glorot(rng, d, hidden)
    params[f"{prefix}.ff1_b"] = _zeros(hidden)
    params[f"{prefix}.ff2_W"] = _glorot(rng, hidden, d)
    params[f"{prefix}.ff2_b"] = _zeros(d)


def init_params(cfg: ModelConfig, func_dim: int, struct_dim: int,
                phen_dim: int, rng: np.random.Generator) -> dict[str, Tensor]:
    """All trainable tensors for the configured modality/fusion mode."""
    cfg.validate()
    params: dict[str, Tensor] = {}
    if cfg.uses_pae:
        dh = cfg.pae_latent_dim
        params["pae.W1"] = _glorot(rng, phen_dim, dh)
        params["pae.b1"] = _zeros(dh)
        params["pae.W2"] = _glorot(rng, dh, dh)
        params["pae.b2"] = _zeros(dh)
    if cfg.modality in ("func", "func+pheno", "multimodal"):
        _encoder_params(params, rng, "enc_f", func_dim, cfg)
    if cfg.modality in ("struct", "struct+pheno", "multimodal"):
        _encoder_params(params, rng, "enc_s", struct_dim, cfg)
    if cfg.modality == "multimodal" and cfg.fusion_mode in ("asymmetric", "symmetric"):
        _fusion_params(params, rng, "fusion", cfg)
        if cfg.fusion_mode == "symmetric":
            _fusion_params(params, rng, "fusion2", cfg)
    params["clf.W"] = _glorot(rng, cfg.classifier_dim, 2)
    params["clf.b"] = _zeros(2)
    return params


def forward(params: dict[str, Tensor], cfg: ModelConfig,
            x_func: np.ndarray | None, x_struct: np.ndarray | None,
            phenotypes: np.ndarray, mask: np.ndarray, training: bool,
            rng: np.random.Generator) -> tuple[Tensor, dict]:
    """Full forward pass on one population graph.

    The Laplacian is rebuilt from the current PAE outputs on every call so
    edge-weight gradients stay exact. Returns logits and an info dict with
    the all-pairs edge-weight matrix (numpy) when the PAE is active.
    """
    info: dict = {"edge_weights": None}
    if cfg.uses_pae:
        latents = popgraph.pae_latents(phenotypes, params)
        weights = popgraph.edge_weight_matrix(latents)
        laplacian = popgraph.scaled_laplacian_tensor(weights, mask)
        info["edge_weights"] = weights.data
    else:
        laplacian = popgraph.scaled_laplacian_tensor(None, mask)

    def run_encoder(prefix, x):
        return gcn.encode(Tensor(x), laplacian, params, prefix,
                          cfg.n_gcn_layers, cfg.cheb_order, cfg.dropout_rate,
                          training, rng)

    if cfg.modality in ("func", "func+pheno"):
        embed = run_encoder("enc_f", x_func)
    elif cfg.modality in ("struct", "struct+pheno"):
        embed = run_encoder("enc_s", x_struct)
    else:
        h_f = run_encoder("enc_f", x_func)
        h_s = run_encoder("enc_s", x_struct)
        embed = fusion.fuse(h_f, h_s, cfg.fusion_mode, params, cfg.n_heads,
                            cfg.dropout_rate, training, rng)
    return fusion.classify(embed, params), info
