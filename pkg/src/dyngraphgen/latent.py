"""Per-node diagonal-Gaussian prior and posterior over latent variables."""
from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .layers import LEAKY_SLOPE

LOG_STD_CLAMP = 10.0


@dataclass
class GaussianParams:
    mean: torch.Tensor  # (N, d_z)
    std: torch.Tensor  # (N, d_z), > 0

    def permute(self, perm):
        return GaussianParams(self.mean[perm], self.std[perm])


class GaussianHead(nn.Module):
    """hidden = leaky(W x); mean = W_mu hidden; std = exp(clamp(W_sigma hidden))."""

    def __init__(self, in_dim: int, hidden: int, latent_dim: int):
        super().__init__()
        self.hidden = nn.Linear(in_dim, hidden)
        self.mu = nn.Linear(hidden, latent_dim)
        self.log_sigma = nn.Linear(hidden, latent_dim)

    def forward(self, x: torch.Tensor) -> GaussianParams:
        h = nn.functional.leaky_relu(self.hidden(x), LEAKY_SLOPE)
        log_sigma = self.log_sigma(h).clamp(-LOG_STD_CLAMP, LOG_STD_CLAMP)
        return GaussianParams(self.mu(h), torch.exp(log_sigma))


class LatentSampler(nn.Module):
    def __init__(self, state_dim: int = 16, enc_dim: int = 16, latent_dim: int = 16):
        super().__init__()
        self.state_dim = state_dim
        self.enc_dim = enc_dim
        self.latent_dim = latent_dim
        self.prior_net = GaussianHead(state_dim, state_dim, latent_dim)
        # posterior input is [encoding || previous state]
        self.posterior_net = GaussianHead(enc_dim + state_dim, state_dim, latent_dim)
        self.posterior_calls = 0

    def prior(self, h_prev: torch.Tensor) -> GaussianParams:
        if h_prev.dim() != 2 or h_prev.shape[1] != self.state_dim:
            raise ValueError(f"hidden state shape {tuple(h_prev.shape)}, expected (N, {self.state_dim})")
        return self.prior_net(h_prev)

    def posterior(self, enc: torch.Tensor, h_prev: torch.Tensor) -> GaussianParams:
        if enc.shape[1] != self.enc_dim or h_prev.shape[1] != self.state_dim or enc.shape[0] != h_prev.shape[0]:
            raise ValueError(f"posterior inputs {tuple(enc.shape)}, {tuple(h_prev.shape)} do not match")
        self.posterior_calls += 1
        return self.posterior_net(torch.cat([enc, h_prev], dim=1))


def sample(g: GaussianParams, noise: torch.Tensor) -> torch.Tensor:
    """Reparameterized draw ``mean + noise * std``."""
    return g.mean + noise * g.std


def kl_divergence(q: GaussianParams, p: GaussianParams) -> torch.Tensor:
    """KL(q || p) summed over nodes and latent dimensions."""
    # r - 1 - log r with r = var ratio, written via expm1 to stay >= 0 near r = 1
    u = 2.0 * (torch.log(q.std) - torch.log(p.std))
    mean_term = ((q.mean - p.mean) / p.std) ** 2
    return 0.5 * (torch.expm1(u) - u + mean_term).sum()
