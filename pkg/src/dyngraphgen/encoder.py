"""Bi-flow snapshot encoder.

Each layer runs two GIN-style aggregations, one over in-neighbours and one over
out-neighbours, fuses them with a shared aggregator MLP, and the per-layer
(hop-level) states are pooled by a jump connection into the final encoding.
"""
from __future__ import annotations

import torch
from torch import nn

from .layers import mlp

SPARSE_THRESHOLD = 2000


def neighbor_sums(h: torch.Tensor, a: torch.Tensor):
    """Return (in_sum, out_sum) with in_sum[i] = sum_{j: a[j,i]=1} h[j], out_sum[i] = sum_{j: a[i,j]=1} h[j].

    ``a`` may be dense or a sparse COO tensor.
    """
    if a.is_sparse:
        return torch.sparse.mm(a.t().coalesce(), h), torch.sparse.mm(a, h)
    return a.t() @ h, a @ h


def _check_adjacency(a: torch.Tensor, n: int):
    if a.shape != (n, n):
        raise ValueError(f"adjacency shape {tuple(a.shape)} does not match {n} nodes")
    vals = a.coalesce().values() if a.is_sparse else a
    if not torch.all((vals == 0) | (vals == 1)):
        raise ValueError("adjacency must be binary")


class BiFlowEncoder(nn.Module):
    def __init__(self, attr_dim: int, hidden: int = 16, out_dim: int = 16,
                 num_layers: int = 3, mlp_layers: int = 2, bidirectional: bool = True):
        super().__init__()
        self.attr_dim = attr_dim
        self.hidden = hidden
        self.num_layers = num_layers
        self.bidirectional = bidirectional
        if attr_dim > 0:
            self.input_proj = nn.Linear(attr_dim, hidden)
        else:
            self.input_const = nn.Parameter(0.1 * torch.randn(hidden))
        self.f_in = nn.ModuleList(mlp(hidden, hidden, hidden, mlp_layers) for _ in range(num_layers))
        self.eps_in = nn.Parameter(torch.zeros(num_layers))
        if bidirectional:
            self.f_out = nn.ModuleList(mlp(hidden, hidden, hidden, mlp_layers) for _ in range(num_layers))
            self.eps_out = nn.Parameter(torch.zeros(num_layers))
            self.f_agg = mlp(2 * hidden, hidden, hidden, 2)
        self.f_pool = mlp(num_layers * hidden, hidden, out_dim, 2)

    @property
    def out_dim(self) -> int:
        return self.f_pool[-1].out_features

    def init_features(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 2 or x.shape[1] != self.attr_dim:
            raise ValueError(f"attributes shape {tuple(x.shape)}, expected (N, {self.attr_dim})")
        if self.attr_dim == 0:
            return self.input_const.expand(x.shape[0], -1)
        return self.input_proj(x)

    def flow_states(self, h: torch.Tensor, a: torch.Tensor, layer: int):
        """Pre-aggregation (in_state, out_state) of ``layer`` (1-based)."""
        l = layer - 1
        in_sum, out_sum = neighbor_sums(h, a)
        if not self.bidirectional:
            # single undirected GIN aggregation over the union of both neighbourhoods
            if a.is_sparse:
                a = a.to_dense()
            und = ((a + a.t()) > 0).to(h.dtype)
            return self.f_in[l]((1 + self.eps_in[l]) * h + und @ h), None
        h_in = self.f_in[l]((1 + self.eps_in[l]) * h + in_sum)
        h_out = self.f_out[l]((1 + self.eps_out[l]) * h + out_sum)
        return h_in, h_out

    def biflow_layer(self, h: torch.Tensor, a: torch.Tensor, layer: int) -> torch.Tensor:
        if not 1 <= layer <= self.num_layers:
            raise ValueError(f"layer {layer} outside 1..{self.num_layers}")
        if h.shape[1] != self.hidden:
            raise ValueError(f"state width {h.shape[1]} != {self.hidden}")
        h_in, h_out = self.flow_states(h, a, layer)
        if not self.bidirectional:
            return h_in
        return self.f_agg(torch.cat([h_in, h_out], dim=1))

    def forward(self, x: torch.Tensor, a: torch.Tensor) -> torch.Tensor:
        n = x.shape[0]
        _check_adjacency(a, n)
        if not a.is_sparse and n > SPARSE_THRESHOLD:
            a = a.to_sparse()
        h = self.init_features(x)
        hops = []
        for layer in range(1, self.num_layers + 1):
            h = self.biflow_layer(h, a, layer)
            hops.append(h)
        return self.f_pool(torch.cat(hops, dim=1))

    encode = forward
