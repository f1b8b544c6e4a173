"""Sequence generation from the prior with self-fed snapshots."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from .decoder import sample_adjacency, threshold_adjacency
from .graph_store import Snapshot, TemporalGraph
from .latent import sample
from .model import DynamicGraphModel
from .recurrence import update_hidden


class GenerationConfigError(ValueError):
    pass


@dataclass
class GenerateConfig:
    num_steps: int
    num_nodes: Optional[int] = None  # defaults to the trained N
    seed: int = 0
    adjacency_mode: str = "sample"  # or "threshold"
    threshold: float = 0.5


@torch.no_grad()
def generate(model: DynamicGraphModel, cfg: GenerateConfig, destandardize: bool = True) -> TemporalGraph:
    """Roll the model forward for ``cfg.num_steps`` snapshots.

    Per step: z ~ prior(h); adjacency from the structure head; attributes decoded
    over the generated adjacency; h updated from the encoding of the generated
    snapshot. Attributes are mapped back to original units when the model was
    trained on standardized data (unless ``destandardize`` is False).
    """
    n = model.cfg.num_nodes
    if cfg.num_steps < 1:
        raise GenerationConfigError("num_steps must be >= 1")
    if cfg.num_nodes is not None and cfg.num_nodes != n:
        raise GenerationConfigError(f"model was trained with N={n}, requested N={cfg.num_nodes}")
    if cfg.adjacency_mode not in ("sample", "threshold"):
        raise GenerationConfigError(f"unknown adjacency_mode {cfg.adjacency_mode!r}")
    if cfg.adjacency_mode == "threshold" and not 0 < cfg.threshold < 1:
        raise GenerationConfigError("threshold must lie in (0, 1)")

    model.eval()
    rng = np.random.default_rng(cfg.seed)
    gen = torch.Generator().manual_seed(cfg.seed)
    scaler = model.scaler() if destandardize else None

    h = model.initial_state()
    snaps = []
    for t in range(1, cfg.num_steps + 1):
        prior = model.sampler.prior(h)
        z = sample(prior, torch.randn(n, model.cfg.latent_dim, generator=gen, dtype=h.dtype))
        s = torch.cat([z, h], dim=1)
        m = model.structure(s)
        if cfg.adjacency_mode == "sample":
            a_np = sample_adjacency(m, rng)
        else:
            a_np = threshold_adjacency(m, cfg.threshold)
        a = torch.as_tensor(a_np, dtype=h.dtype)
        x = model.attr_decoder(s, a)
        enc = model.encoder(x, a)
        h = update_hidden(model.update, enc, z, model.time2vec(t), h)

        x_np = x.numpy().astype(np.float64)
        if scaler is not None:
            x_np = scaler.inverse(x_np)
        snaps.append(Snapshot(adjacency=a_np, attributes=x_np))
    return TemporalGraph(snapshots=snaps)
