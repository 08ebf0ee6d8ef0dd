"""Phenotype encoding, the pairwise association encoder (PAE), candidate
edges, and the scaled normalized Laplacian.

Edge weights are the rescaled latent cosine w_ij = h_i.h_j / (2|h_i||h_j|)
+ 0.5, computed from a two-layer perceptron over encoded phenotypes. The
whole path is differentiable, so the classification loss trains the graph
structure jointly with the node embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numcore import ParameterError, Tensor

NORM_FLOOR = 1e-12
PAE_LATENT_DIM = 128


@dataclass
class PhenotypeEncoder:
    """Age statistics and site vocabulary fitted on training subjects."""

    age_mean: float
    age_std: float          # 0 means degenerate: age channel emitted as 0
    site_vocab: list[str]   # lexicographic

    @property
    def dim(self) -> int:
        return 2 + len(self.site_vocab)

    def encode(self, subjects) -> np.ndarray:
        """Encode subjects as [z-age, sex01, one-hot site] rows.

        Sex codes F -> 0, M -> 1. A site absent from the training
        vocabulary maps to the all-zero site block.
        """
        out = np.zeros((len(subjects), self.dim))
        pos = {s: i for i, s in enumerate(self.site_vocab)}
        for r, s in enumerate(subjects):
            if self.age_std > 0:
                out[r, 0] = (s.age - self.age_mean) / self.age_std
            out[r, 1] = 1.0 if s.sex == "M" else 0.0
            if s.site in pos:
                out[r, 2 + pos[s.site]] = 1.0
        return out


def fit_phenotype_encoder(train_subjects) -> PhenotypeEncoder:
    if not train_subjects:
        raise ParameterError("phenotype encoder needs a non-empty training set")
    ages = np.array([s.age for s in train_subjects])
    return PhenotypeEncoder(age_mean=float(ages.mean()),
                            age_std=float(ages.std()),
                            site_vocab=sorted({s.site for s in train_subjects}))


def encode_phenotypes(train_subjects, all_subjects) -> tuple[np.ndarray, PhenotypeEncoder]:
    """Fit on training subjects, encode all subjects."""
    enc = fit_phenotype_encoder(train_subjects)
    return enc.encode(all_subjects), enc


def pae_edge_weight(h_i: np.ndarray, h_j: np.ndarray) -> float:
    """Rescaled cosine similarity of two latents, in [0, 1]."""
    h_i = np.asarray(h_i, dtype=np.float64)
    h_j = np.asarray(h_j, dtype=np.float64)
    ni = max(float(np.linalg.norm(h_i)), NORM_FLOOR)
    nj = max(float(np.linalg.norm(h_j)), NORM_FLOOR)
    return float(h_i @ h_j / (2.0 * ni * nj) + 0.5)


def pae_latents(phenotypes: Tensor | np.ndarray, params: dict[str, Tensor],
                prefix: str = "pae") -> Tensor:
    """Two-layer perceptron mapping encoded phenotypes to latent rows."""
    x = phenotypes if isinstance(phenotypes, Tensor) else Tensor(phenotypes)
    h = (x @ params[f"{prefix}.W1"] + params[f"{prefix}.b1"]).relu()
    return h @ params[f"{prefix}.W2"] + params[f"{prefix}.b2"]


def edge_weight_matrix(latents: Tensor) -> Tensor:
    """All-pairs rescaled cosine weights as a differentiable N x N tensor."""
    sims = latents @ latents.T
    # floor the squared norm before the root: sqrt'(0) is infinite, and an
    # all-zero latent row (dead relu into a zero bias) would poison the
    # backward pass with 0 * inf
    sq = (latents * latents).sum(axis=1, keepdims=True)
    norms = sq.clip_min(NORM_FLOOR ** 2).sqrt()
    return sims / (2.0 * (norms @ norms.T)) + 0.5


def build_candidate_edges(subjects, policy: str = "complete",
                          age_threshold: float = 2.0) -> list[tuple[int, int]]:
    """Candidate edge list over subject indices (i < j).

    ``complete`` links every pair; ``phenotype-match`` links pairs sharing
    site or sex, or with ages within age_threshold years.
    """
    n = len(subjects)
    if n < 2:
        raise ParameterError("need at least 2 subjects to build edges")
    if policy == "complete":
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    if policy == "phenotype-match":
        edges = []
        for i in range(n):
            for j in range(i + 1, n):
                a, b = subjects[i], subjects[j]
                if a.site == b.site or a.sex == b.sex \
                        or abs(a.age - b.age) <= age_threshold:
                    edges.append((i, j))
        return edges
    raise ParameterError(f"unknown edge policy: {policy}")


def edge_mask(n: int, edges: list[tuple[int, int]]) -> np.ndarray:
    """Symmetric 0/1 candidate-edge mask with zero diagonal."""
    m = np.zeros((n, n))
    for i, j in edges:
        m[i, j] = m[j, i] = 1.0
    return m


def scaled_laplacian_tensor(weight_matrix: Tensor | None, mask: np.ndarray) -> Tensor:
    """Differentiable rescaled Laplacian from an all-pairs weight matrix.

    Adjacency is the masked weights plus unit self-loops; with lambda_max
    fixed at 2 the rescaled Laplacian collapses to -D^{-1/2} A D^{-1/2}.
    ``weight_matrix=None`` means uniform weight 1 on candidate edges (the
    no-phenotype ablation).
    """
    n = mask.shape[0]
    eye = Tensor(np.eye(n))
    if weight_matrix is None:
        adj = Tensor(mask + np.eye(n))
    else:
        adj = weight_matrix * Tensor(mask) + eye
    deg = adj.sum(axis=1, keepdims=True)
    inv_sqrt = deg ** -0.5
    return -(inv_sqrt * adj * inv_sqrt.T)


def scaled_laplacian(n: int, edges: list[tuple[int, int]],
                     weights: np.ndarray) -> np.ndarray:
    """Plain-numpy rescaled Laplacian for fixed edge weights."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.size and (weights.min() < 0 or weights.max() > 1):
        raise ParameterError("edge weights must lie in [0, 1]")
    a = np.eye(n)
    for (i, j), w in zip(edges, weights):
        a[i, j] += w
        a[j, i] += w
    d_inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return -(d_inv_sqrt[:, None] * a * d_inv_sqrt[None, :])
