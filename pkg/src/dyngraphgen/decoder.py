"""Snapshot decoder: mixture-Bernoulli adjacency, then attention-based attributes.

The adjacency row of node i is a K-component mixture of independent Bernoulli
vectors. Mixture weights come from summing f_alpha over all pairwise condition
differences s_i - s_j; edge probabilities come from f_theta on the same
differences. Attributes are decoded afterwards by a residual multi-head graph
attention network run on the (generated or observed) adjacency.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .layers import mlp, zero_

PROB_CLIP = 1e-7


@dataclass
class MixtureParams:
    alpha: torch.Tensor  # (N, K), rows on the simplex
    theta: torch.Tensor  # (N, K, N), theta[i, :, i] == 0
    log_alpha: Optional[torch.Tensor] = None
    theta_logits: Optional[torch.Tensor] = None  # (N, K, N), kept for stable log-likelihoods

    @property
    def num_components(self) -> int:
        return self.alpha.shape[1]

    def expected_adjacency(self) -> torch.Tensor:
        """Edge marginals sum_k alpha[i,k] theta[i,k,j]."""
        return torch.einsum("ik,ikj->ij", self.alpha, self.theta)


def _offdiag(n, device=None):
    return ~torch.eye(n, dtype=torch.bool, device=device)


def mixture_from_logits(alpha_logits: torch.Tensor, theta_logits: torch.Tensor) -> MixtureParams:
    n = theta_logits.shape[0]
    mask = _offdiag(n, theta_logits.device)[:, None, :]
    theta = torch.where(mask, torch.sigmoid(theta_logits), torch.zeros_like(theta_logits))
    log_alpha = torch.log_softmax(alpha_logits, dim=1)
    return MixtureParams(alpha=log_alpha.exp(), theta=theta, log_alpha=log_alpha, theta_logits=theta_logits)


def edge_log_likelihood(m: MixtureParams, a: torch.Tensor, weights: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Per-node log p(row i of ``a``) under the mixture, shape (N,).

    ``weights`` (N, N) rescales individual edge terms (used for negative sampling).
    """
    n = a.shape[0]
    if m.theta.shape[0] != n or m.theta.shape[2] != n:
        raise ValueError(f"mixture over {m.theta.shape[0]} nodes, adjacency has {n}")
    a = a.to(m.theta.dtype)[:, None, :]
    if m.theta_logits is not None:
        log_on = F.logsigmoid(m.theta_logits)
        log_off = F.logsigmoid(-m.theta_logits)
    else:
        th = m.theta.clamp(PROB_CLIP, 1 - PROB_CLIP)
        log_on, log_off = torch.log(th), torch.log1p(-th)
    terms = a * log_on + (1 - a) * log_off
    keep = _offdiag(n, terms.device)[:, None, :]
    if weights is not None:
        terms = terms * weights[:, None, :]
    per_comp = torch.where(keep, terms, torch.zeros_like(terms)).sum(dim=2)  # (N, K)
    log_alpha = m.log_alpha if m.log_alpha is not None else torch.log(m.alpha.clamp_min(1e-300))
    return torch.logsumexp(log_alpha + per_comp, dim=1)


def adjacency_from_uniforms(m: MixtureParams, u_comp: np.ndarray, u_edge: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling given per-node component uniforms and per-entry edge uniforms."""
    alpha = m.alpha.detach().cpu().numpy()
    theta = m.theta.detach().cpu().numpy()
    n, k = alpha.shape
    cdf = np.cumsum(alpha, axis=1)
    comp = np.minimum((u_comp[:, None] >= cdf).sum(axis=1), k - 1)
    probs = theta[np.arange(n), comp, :]
    a = (u_edge < probs).astype(np.uint8)
    np.fill_diagonal(a, 0)
    return a


def sample_adjacency(m: MixtureParams, rng: np.random.Generator) -> np.ndarray:
    n = m.alpha.shape[0]
    u_comp = rng.random(n)
    u_edge = rng.random((n, n))
    return adjacency_from_uniforms(m, u_comp, u_edge)


def threshold_adjacency(m: MixtureParams, threshold: float) -> np.ndarray:
    a = (m.expected_adjacency().detach().cpu().numpy() > threshold).astype(np.uint8)
    np.fill_diagonal(a, 0)
    return a


class MixtureHead(nn.Module):
    def __init__(self, cond_dim: int, hidden: int, num_components: int = 4):
        super().__init__()
        self.num_components = num_components
        self.f_alpha = mlp(cond_dim, hidden, num_components, 2)
        self.f_theta = mlp(cond_dim, hidden, num_components, 2)
        # alpha logits are a sum over N terms; start from uniform weights so no component wins by init
        zero_(self.f_alpha[-1])

    def forward(self, s: torch.Tensor) -> MixtureParams:
        diff = s[:, None, :] - s[None, :, :]  # (N, N, D), diff[i, j] = s_i - s_j
        # centred at f_alpha(0) so identical condition rows give uniform weights
        alpha_logits = self.f_alpha(diff).sum(dim=1) - s.shape[0] * self.f_alpha(torch.zeros_like(s[:1]))
        theta_logits = self.f_theta(diff).permute(0, 2, 1)
        return mixture_from_logits(alpha_logits, theta_logits)


class InnerProductHead(nn.Module):
    """Single-component edge model with theta_ij = sigmoid(<g(s_i), g(s_j)>)."""

    def __init__(self, cond_dim: int, hidden: int):
        super().__init__()
        self.num_components = 1
        self.proj = nn.Linear(cond_dim, hidden)

    def forward(self, s: torch.Tensor) -> MixtureParams:
        p = self.proj(s)
        logits = (p @ p.t())[:, None, :]
        return mixture_from_logits(torch.zeros(s.shape[0], 1, dtype=s.dtype, device=s.device), logits)


class GATLayer(nn.Module):
    def __init__(self, dim: int, heads: int = 4, negative_slope: float = 0.2):
        super().__init__()
        if dim % heads:
            raise ValueError(f"dim {dim} not divisible by {heads} heads")
        self.heads, self.head_dim = heads, dim // heads
        self.lin = nn.Linear(dim, dim, bias=False)
        self.att_src = nn.Parameter(torch.randn(heads, self.head_dim) / self.head_dim ** 0.5)
        self.att_dst = nn.Parameter(torch.randn(heads, self.head_dim) / self.head_dim ** 0.5)
        self.bias = nn.Parameter(torch.zeros(dim))
        self.negative_slope = negative_slope

    def attention(self, h: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """Attention weights (N, N, heads); row i is a distribution over the j with mask[i, j]."""
        wh = self.lin(h).view(-1, self.heads, self.head_dim)
        e_src = (wh * self.att_src).sum(-1)
        e_dst = (wh * self.att_dst).sum(-1)
        e = F.leaky_relu(e_dst[:, None, :] + e_src[None, :, :], self.negative_slope)
        e = e.masked_fill(~mask[:, :, None], float("-inf"))
        return torch.softmax(e, dim=1)

    def forward(self, h: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        wh = self.lin(h).view(-1, self.heads, self.head_dim)
        att = self.attention(h, mask)
        out = torch.einsum("ijh,jhd->ihd", att, wh)
        return out.reshape(h.shape[0], -1) + self.bias


def attention_mask(a: torch.Tensor) -> torch.Tensor:
    """Each node attends to itself and to its in- and out-neighbours."""
    n = a.shape[0]
    return (a > 0) | (a.t() > 0) | torch.eye(n, dtype=torch.bool, device=a.device)


OUTPUT_ACTIVATIONS = {
    "identity": lambda x: x,
    "relu": F.relu,
    "sigmoid": torch.sigmoid,
}


class AttributeDecoder(nn.Module):
    def __init__(self, cond_dim: int, attr_dim: int, hidden: int = 16, num_layers: int = 3,
                 heads: int = 4, activation: str = "identity", use_graph: bool = True):
        super().__init__()
        if activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {activation!r}")
        self.attr_dim = attr_dim
        self.activation = activation
        self.use_graph = use_graph
        if use_graph:
            self.input_proj = nn.Linear(cond_dim, hidden)
            self.layers = nn.ModuleList(GATLayer(hidden, heads) for _ in range(num_layers))
            self.out_mlp = mlp(hidden, hidden, max(attr_dim, 1), 3)
        else:
            self.out_mlp = mlp(cond_dim, hidden, max(attr_dim, 1), 3)

    def forward(self, s: torch.Tensor, a: torch.Tensor) -> torch.Tensor:
        n = s.shape[0]
        if a.shape != (n, n):
            raise ValueError(f"adjacency shape {tuple(a.shape)} does not match {n} nodes")
        if self.attr_dim == 0:
            return s.new_zeros(n, 0)
        if self.use_graph:
            mask = attention_mask(a)
            h = self.input_proj(s)
            for layer in self.layers:
                h = h + F.elu(layer(h, mask))
        else:
            h = s
        return OUTPUT_ACTIVATIONS[self.activation](self.out_mlp(h))
