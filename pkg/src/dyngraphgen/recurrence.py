"""Time vectorization and the gated per-node state update."""
from __future__ import annotations

import torch
from torch import nn


class Time2Vec(nn.Module):
    """f(t)[0] = w_0 t + phi_0; f(t)[r] = sin(w_r t + phi_r) for r >= 1."""

    def __init__(self, dim: int = 8):
        super().__init__()
        if dim < 1:
            raise ValueError("time vector dimension must be >= 1")
        self.dim = dim
        self.w = nn.Parameter(torch.randn(dim))
        self.phi = nn.Parameter(torch.randn(dim))

    def forward(self, t) -> torch.Tensor:
        lin = self.w * float(t) + self.phi
        return torch.cat([lin[:1], torch.sin(lin[1:])])


class GatedUpdate(nn.Module):
    """GRU cell written with the update gate as the *write* fraction.

        u = sigmoid(W_u x + U_u h + b_u)
        r = sigmoid(W_r x + U_r h + b_r)
        c = tanh(W_c x + U_c (r * h) + b_c)
        h' = (1 - u) * h + u * c

    so a strongly negative update bias keeps the previous state.
    """

    def __init__(self, input_dim: int, state_dim: int):
        super().__init__()
        self.input_dim = input_dim
        self.state_dim = state_dim
        self.x_gates = nn.Linear(input_dim, 3 * state_dim)
        self.h_gates = nn.Linear(state_dim, 2 * state_dim, bias=False)
        self.h_cand = nn.Linear(state_dim, state_dim, bias=False)

    def forward(self, x: torch.Tensor, h: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.input_dim or h.shape[1] != self.state_dim or x.shape[0] != h.shape[0]:
            raise ValueError(f"update inputs {tuple(x.shape)}, {tuple(h.shape)} do not match "
                             f"({self.input_dim}, {self.state_dim})")
        xu, xr, xc = self.x_gates(x).chunk(3, dim=1)
        hu, hr = self.h_gates(h).chunk(2, dim=1)
        u = torch.sigmoid(xu + hu)
        r = torch.sigmoid(xr + hr)
        c = torch.tanh(xc + self.h_cand(r * h))
        return (1 - u) * h + u * c


def update_hidden(cell: GatedUpdate, enc, z, tv, h_prev):
    """New states from [encoding || latent || time vector]; tv is broadcast to every node."""
    n = h_prev.shape[0]
    x = torch.cat([enc, z, tv.expand(n, -1)], dim=1)
    return cell(x, h_prev)
