"""Planted benchmark sequence and the simple baselines it is judged against."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from .graph_store import TemporalGraph, make_graph


def planted_graph(num_nodes: int = 40, num_steps: int = 8, active_size: int = 20,
                  p_active: float = 0.5, p_quiet: float = 0.02, p_cross: float = 0.01,
                  noise: float = 0.05, seed: int = 0) -> TemporalGraph:
    """Two communities whose membership rotates each step.

    Nodes are split into groups of ``active_size`` and ``num_nodes - active_size``.
    At odd steps the first group forms the dense "active" community and the
    second the sparse "quiet" one; at even steps the roles swap, so every node
    changes community at every step. Attributes are the two community
    indicators plus Gaussian noise (F = 2).
    """
    rng = np.random.default_rng(seed)
    N = num_nodes
    group = np.zeros(N, dtype=bool)
    group[rng.permutation(N)[:active_size]] = True
    adj = np.zeros((num_steps, N, N), dtype=np.uint8)
    attrs = np.zeros((num_steps, N, 2))
    for t in range(num_steps):
        active = group if t % 2 == 0 else ~group
        both_active = active[:, None] & active[None, :]
        both_quiet = ~active[:, None] & ~active[None, :]
        p = np.where(both_active, p_active, np.where(both_quiet, p_quiet, p_cross))
        a = (rng.random((N, N)) < p).astype(np.uint8)
        np.fill_diagonal(a, 0)
        adj[t] = a
        ind = active.astype(float)
        attrs[t] = np.stack([ind, 1.0 - ind], axis=1) + noise * rng.standard_normal((N, 2))
    return make_graph(adj, attrs)


def erdos_renyi_like(g: TemporalGraph, seed: int = 0) -> TemporalGraph:
    """Directed G(n, p) per step with p matched to that step's density; attributes copied."""
    rng = np.random.default_rng(seed)
    N = g.num_nodes
    snaps = []
    for s in g.snapshots:
        p = s.adjacency.sum() / max(N * (N - 1), 1)
        a = (rng.random((N, N)) < p).astype(np.uint8)
        np.fill_diagonal(a, 0)
        snaps.append(replace(s, adjacency=a))
    return TemporalGraph(snapshots=snaps, node_labels=g.node_labels, scaler=g.scaler)


def fitted_normal_like(g: TemporalGraph, seed: int = 0) -> TemporalGraph:
    """Attributes drawn i.i.d. from a per-step, per-dimension fitted normal; structure copied."""
    rng = np.random.default_rng(seed)
    snaps = []
    for s in g.snapshots:
        x = s.attributes
        x_new = x.mean(axis=0) + x.std(axis=0) * rng.standard_normal(x.shape)
        snaps.append(replace(s, attributes=x_new))
    return TemporalGraph(snapshots=snaps, node_labels=g.node_labels, scaler=g.scaler)
