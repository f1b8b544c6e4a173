"""The full parameter set and its on-disk snapshot format."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch
from torch import nn

from .decoder import AttributeDecoder, InnerProductHead, MixtureHead
from .encoder import BiFlowEncoder
from .latent import LatentSampler
from .recurrence import GatedUpdate, Time2Vec

SNAPSHOT_VERSION = 1
WEIGHTS_FILE = "params.pt"
MANIFEST_FILE = "model.json"

DTYPES = {"float64": torch.float64, "float32": torch.float32}


@dataclass
class ModelConfig:
    num_nodes: int
    attr_dim: int
    layers: int = 3  # bi-flow encoder depth L
    mlp_layers: int = 2  # dense layers inside f_in / f_out
    hidden: int = 16  # encoder width d
    state_dim: int = 16  # d_h
    enc_dim: int = 16  # d_eps
    latent_dim: int = 16  # d_z
    time_dim: int = 8  # d_T
    components: int = 4  # K
    gat_layers: int = 3
    gat_heads: int = 4
    attr_activation: str = "identity"
    use_biflow: bool = True
    use_mixture: bool = True
    use_graph_attr_decoder: bool = True
    dtype: str = "float64"

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class DynamicGraphModel(nn.Module):
    def __init__(self, cfg: ModelConfig, seed: Optional[int] = None):
        super().__init__()
        self.cfg = cfg
        # initial values must not depend on the caller's default dtype: build in float32, then cast
        default_dtype = torch.get_default_dtype()
        torch.set_default_dtype(torch.float32)
        try:
            self._build(cfg, seed)
        finally:
            torch.set_default_dtype(default_dtype)
        self.to(DTYPES[cfg.dtype])
        # attribute standardization stats of the training data (empty when unused)
        self.register_buffer("attr_mean", torch.zeros(0, dtype=self.dtype))
        self.register_buffer("attr_std", torch.zeros(0, dtype=self.dtype))

    def _build(self, cfg: ModelConfig, seed: Optional[int]) -> None:
        with torch.random.fork_rng(devices=[]):
            if seed is not None:
                torch.manual_seed(seed)
            self.encoder = BiFlowEncoder(cfg.attr_dim, cfg.hidden, cfg.enc_dim, cfg.layers,
                                         cfg.mlp_layers, bidirectional=cfg.use_biflow)
            self.sampler = LatentSampler(cfg.state_dim, cfg.enc_dim, cfg.latent_dim)
            cond = cfg.latent_dim + cfg.state_dim
            if cfg.use_mixture:
                self.structure = MixtureHead(cond, cfg.hidden, cfg.components)
            else:
                self.structure = InnerProductHead(cond, cfg.hidden)
            self.attr_decoder = AttributeDecoder(cond, cfg.attr_dim, cfg.hidden, cfg.gat_layers,
                                                 cfg.gat_heads, cfg.attr_activation,
                                                 use_graph=cfg.use_graph_attr_decoder)
            self.time2vec = Time2Vec(cfg.time_dim)
            self.update = GatedUpdate(cfg.enc_dim + cfg.latent_dim + cfg.time_dim, cfg.state_dim)

    @property
    def dtype(self) -> torch.dtype:
        return DTYPES[self.cfg.dtype]

    def initial_state(self) -> torch.Tensor:
        return torch.zeros(self.cfg.num_nodes, self.cfg.state_dim, dtype=self.dtype)

    def set_scaler(self, scaler) -> None:
        if scaler is None:
            self.attr_mean = torch.zeros(0, dtype=self.dtype)
            self.attr_std = torch.zeros(0, dtype=self.dtype)
        else:
            self.attr_mean = torch.as_tensor(scaler.mean, dtype=self.dtype)
            self.attr_std = torch.as_tensor(scaler.std, dtype=self.dtype)

    def scaler(self):
        from .graph_store import Standardizer

        if self.attr_mean.numel() == 0 or self.cfg.attr_dim == 0:
            return None
        return Standardizer(self.attr_mean.numpy().copy(), self.attr_std.numpy().copy())


def save_model(model: DynamicGraphModel, directory, extra: Optional[dict] = None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), directory / WEIGHTS_FILE)
    manifest = {
        "version": SNAPSHOT_VERSION,
        "config": asdict(model.cfg),
        "config_hash": model.cfg.config_hash(),
        "shapes": {k: list(v.shape) for k, v in model.state_dict().items()},
    }
    if extra:
        manifest.update(extra)
    with open(directory / MANIFEST_FILE, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)


def load_model(directory) -> DynamicGraphModel:
    directory = Path(directory)
    with open(directory / MANIFEST_FILE, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("version") != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported model snapshot version {manifest.get('version')}")
    cfg = ModelConfig(**manifest["config"])
    if cfg.config_hash() != manifest["config_hash"]:
        raise ValueError("model manifest config hash mismatch")
    model = DynamicGraphModel(cfg)
    state = torch.load(directory / WEIGHTS_FILE, weights_only=True)
    model.attr_mean = torch.zeros_like(state["attr_mean"])
    model.attr_std = torch.zeros_like(state["attr_std"])
    model.load_state_dict(state)
    return model


def parameter_vector(model: nn.Module) -> np.ndarray:
    return torch.cat([p.detach().reshape(-1) for p in model.parameters()]).numpy().copy()
