"""Step-wise ELBO training with truncated back-propagation through time."""
from __future__ import annotations

import copy
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import torch

from .decoder import MixtureParams, edge_log_likelihood
from .graph_store import TemporalGraph
from .latent import kl_divergence, sample
from .model import DynamicGraphModel, ModelConfig
from .recurrence import update_hidden

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e6


class NonFiniteLoss(FloatingPointError):
    pass


class TrainingDiverged(RuntimeError):
    def __init__(self, message, last_good_state=None):
        super().__init__(message)
        self.last_good_state = last_good_state


@dataclass
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 5e-2
    sce_alpha: int = 2
    loss_weights: tuple = (1.0, 1.0, 1.0)  # (prior, structure, attribute)
    bptt_window: int = 1
    negative_samples: Optional[int] = None
    latent_samples: int = 1
    attr_norm_weight: float = 0.0
    kl_warmup_epochs: int = 0
    grad_clip: float = 5.0
    lr_decay: float = 0.5
    lr_patience: int = 10
    min_lr: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        self.loss_weights = tuple(float(w) for w in self.loss_weights)
        if self.epochs < 0 or self.learning_rate <= 0 or self.bptt_window < 1 or self.latent_samples < 1:
            raise ValueError("epochs >= 0, learning_rate > 0, bptt_window >= 1, latent_samples >= 1 required")
        if self.sce_alpha < 1:
            raise ValueError("sce_alpha must be >= 1")
        if len(self.loss_weights) != 3 or min(self.loss_weights) <= 0:
            raise ValueError("loss_weights must be three positive numbers")
        if self.negative_samples is not None and self.negative_samples < 1:
            raise ValueError("negative_samples must be positive when set")


# --------------------------------------------------------------------------- losses


def negative_sampling_weights(a: torch.Tensor, q: int, generator=None) -> torch.Tensor:
    """Per-entry weights keeping every edge and ~q sampled non-edges per edge of each row.

    Kept non-edges are up-weighted by (#non-edges / #kept) so each row's
    per-component log-likelihood is unbiased.
    """
    n = a.shape[0]
    pos = a > 0
    neg = ~pos & ~torch.eye(n, dtype=torch.bool)
    w = pos.to(torch.float64)
    scores = torch.rand(n, n, generator=generator, dtype=torch.float64)
    scores = torch.where(neg, scores, torch.full_like(scores, 2.0))
    order = scores.argsort(dim=1)
    n_neg = neg.sum(dim=1)
    n_keep = torch.minimum(q * pos.sum(dim=1).clamp_min(1), n_neg)
    rank = torch.empty_like(order)
    rank.scatter_(1, order, torch.arange(n).expand(n, n).contiguous())
    kept = neg & (rank < n_keep[:, None])
    scale = n_neg.to(torch.float64) / n_keep.clamp_min(1).to(torch.float64)
    return (w + kept.to(torch.float64) * scale[:, None]).to(a.dtype)


def structure_loss(a: torch.Tensor, m: MixtureParams, negative_samples: Optional[int] = None,
                   generator=None) -> torch.Tensor:
    """Negative per-node mean of the mixture log-likelihood of the adjacency rows."""
    weights = None
    if negative_samples is not None:
        weights = negative_sampling_weights(a, negative_samples, generator).to(m.theta.dtype)
    return -edge_log_likelihood(m, a, weights).mean()


def zero_norm_rows(x: torch.Tensor, x_hat: torch.Tensor) -> int:
    return int(((x.norm(dim=1) == 0) | (x_hat.norm(dim=1) == 0)).sum())


def attribute_loss(x: torch.Tensor, x_hat: torch.Tensor, alpha: int = 2) -> torch.Tensor:
    """Scaled cosine error mean_i (1 - cos(x_i, x_hat_i))^alpha; zero-norm rows count as cos = 0."""
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    nx, nh = x.norm(dim=1), x_hat.norm(dim=1)
    ok = (nx > 0) & (nh > 0)
    denom = torch.where(ok, nx * nh, torch.ones_like(nx))
    cos = torch.where(ok, (x * x_hat).sum(dim=1) / denom, torch.zeros_like(nx))
    return ((1 - cos) ** alpha).mean()


def norm_loss(x: torch.Tensor, x_hat: torch.Tensor) -> torch.Tensor:
    """Mean squared difference of row norms; pins the magnitude the cosine error ignores."""
    safe = lambda v: torch.sqrt((v * v).sum(dim=1) + 1e-12)
    return ((safe(x_hat) - safe(x)) ** 2).mean()


# --------------------------------------------------------------------------- one step


@dataclass
class StepLoss:
    total: torch.Tensor
    prior: torch.Tensor
    structure: torch.Tensor
    attribute: torch.Tensor
    h_next: torch.Tensor
    z: torch.Tensor
    zero_norm_rows: int = 0

    def components(self) -> dict:
        return {k: float(getattr(self, k).detach()) for k in ("prior", "structure", "attribute", "total")}


def step_loss(model: DynamicGraphModel, a: torch.Tensor, x: torch.Tensor, t: int, h_prev: torch.Tensor,
              cfg: TrainConfig, generator=None, noise: Optional[torch.Tensor] = None) -> StepLoss:
    """Loss of snapshot ``t`` (1-based) given the previous hidden state, teacher-forced."""
    n = model.cfg.num_nodes
    if a.shape != (n, n) or x.shape != (n, model.cfg.attr_dim) or h_prev.shape != (n, model.cfg.state_dim):
        raise ValueError(f"step inputs {tuple(a.shape)}, {tuple(x.shape)}, {tuple(h_prev.shape)} "
                         f"inconsistent with model (N={n}, F={model.cfg.attr_dim})")
    w_prior, w_struc, w_attr = cfg.loss_weights
    enc = model.encoder(x, a)
    prior = model.sampler.prior(h_prev)
    post = model.sampler.posterior(enc, h_prev)
    kl = kl_divergence(post, prior) / n  # per node, like the reconstruction terms

    if noise is None:
        noise = torch.randn(cfg.latent_samples, n, model.cfg.latent_dim, generator=generator, dtype=h_prev.dtype)
    elif noise.dim() == 2:
        noise = noise[None]

    struc = attr = 0.0
    zero_rows = 0
    z_first = None
    for eps in noise:
        z = sample(post, eps)
        z_first = z if z_first is None else z_first
        s = torch.cat([z, h_prev], dim=1)
        m = model.structure(s)
        struc = struc + structure_loss(a, m, cfg.negative_samples, generator)
        if model.cfg.attr_dim > 0:
            x_hat = model.attr_decoder(s, a)  # conditioned on the observed adjacency
            term = attribute_loss(x, x_hat, cfg.sce_alpha)
            if cfg.attr_norm_weight:
                term = term + cfg.attr_norm_weight * norm_loss(x, x_hat)
            attr = attr + term
            zero_rows += zero_norm_rows(x, x_hat)
    struc = struc / len(noise)
    attr = attr / len(noise) if model.cfg.attr_dim > 0 else torch.zeros((), dtype=h_prev.dtype)

    for name, value in (("prior", kl), ("structure", struc), ("attribute", attr)):
        if not torch.isfinite(value):
            raise NonFiniteLoss(f"non-finite {name} loss at t={t}: {float(value.detach())}")

    total = w_prior * kl + w_struc * struc + w_attr * attr
    h_next = update_hidden(model.update, enc, z_first, model.time2vec(t), h_prev)
    return StepLoss(total, kl, struc, attr, h_next, z_first, zero_rows)


# --------------------------------------------------------------------------- training loop


@dataclass
class TrainReport:
    epoch_total: list = field(default_factory=list)
    epoch_prior: list = field(default_factory=list)
    epoch_structure: list = field(default_factory=list)
    epoch_attribute: list = field(default_factory=list)
    step_components: list = field(default_factory=list)  # [epoch][t] -> dict
    epoch_seconds: list = field(default_factory=list)
    learning_rates: list = field(default_factory=list)
    zero_norm_rows: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _warmup(cfg: TrainConfig, epoch: int) -> TrainConfig:
    """Config for this epoch with the prior weight ramped linearly over the warm-up epochs."""
    if cfg.kl_warmup_epochs <= 0 or epoch >= cfg.kl_warmup_epochs:
        return cfg
    scale = (epoch + 1) / (cfg.kl_warmup_epochs + 1)
    w = cfg.loss_weights
    return replace(cfg, loss_weights=(w[0] * scale, w[1], w[2]))


def _rebuild_state(model, adj, attrs, states, latents, t, window):
    """H_{t-1} recomputed from the detached state ``window`` transitions back, so the loss at
    step t reaches the recurrent cell and the encoder through at most ``window`` updates."""
    k = min(window, t - 1)
    h = states[t - 1 - k]
    for u in range(t - k, t):
        enc = model.encoder(attrs[u - 1], adj[u - 1])
        h = update_hidden(model.update, enc, latents[u - 1], model.time2vec(u), h)
    return h


def graph_tensors(g: TemporalGraph, dtype=torch.float64):
    adj = [torch.as_tensor(s.adjacency, dtype=dtype) for s in g.snapshots]
    attrs = [torch.as_tensor(s.attributes, dtype=dtype) for s in g.snapshots]
    return adj, attrs


def model_config_for(g: TemporalGraph, **overrides) -> ModelConfig:
    return ModelConfig(num_nodes=g.num_nodes, attr_dim=g.attr_dim, **overrides)


def train(g: TemporalGraph, cfg: TrainConfig, model_cfg: Optional[ModelConfig] = None,
          model: Optional[DynamicGraphModel] = None, progress=None):
    """Fit a model to ``g``; returns (model, TrainReport).

    ``g`` is used as given: standardize it beforehand if desired, its scaler is
    stored in the model so generated attributes can be mapped back.
    """
    if g.num_steps < 1:
        raise ValueError("training needs at least one snapshot")
    if model is None:
        model = DynamicGraphModel(model_cfg or model_config_for(g), seed=cfg.seed)
    if model.cfg.num_nodes != g.num_nodes or model.cfg.attr_dim != g.attr_dim:
        raise ValueError(f"model (N={model.cfg.num_nodes}, F={model.cfg.attr_dim}) does not match "
                         f"graph (N={g.num_nodes}, F={g.attr_dim})")
    model.set_scaler(g.scaler)
    report = TrainReport()
    if cfg.epochs == 0:
        return model, report

    adj, attrs = graph_tensors(g, model.dtype)
    gen = torch.Generator().manual_seed(cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    sched = torch.optim.lr_scheduler.ReduceLROnPlateau(opt, mode="min", factor=cfg.lr_decay,
                                                       patience=cfg.lr_patience, min_lr=cfg.min_lr)
    last_good = copy.deepcopy(model.state_dict())
    T = g.num_steps
    model.train()
    for epoch in range(cfg.epochs):
        start = time.perf_counter()
        step_cfg = _warmup(cfg, epoch)
        states = [model.initial_state()]  # detached H_0 .. H_{t-1}
        latents = []  # detached Z_1 .. Z_{t-1}
        steps = []
        for t in range(1, T + 1):
            h = _rebuild_state(model, adj, attrs, states, latents, t, cfg.bptt_window)
            try:
                sl = step_loss(model, adj[t - 1], attrs[t - 1], t, h, step_cfg, gen)
            except NonFiniteLoss as exc:
                model.load_state_dict(last_good)
                raise TrainingDiverged(f"epoch {epoch + 1}: {exc}", last_good) from exc
            if float(sl.total.detach()) > DIVERGENCE_LIMIT:
                model.load_state_dict(last_good)
                raise TrainingDiverged(f"epoch {epoch + 1}, t={t}: loss {float(sl.total.detach()):.3g} "
                                       "exceeds limit", last_good)
            steps.append(sl.components())
            report.zero_norm_rows += sl.zero_norm_rows
            opt.zero_grad()
            sl.total.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            opt.step()
            states.append(sl.h_next.detach())
            latents.append(sl.z.detach())

        total = sum(s["total"] for s in steps)
        report.epoch_total.append(total)
        report.epoch_prior.append(sum(s["prior"] for s in steps))
        report.epoch_structure.append(sum(s["structure"] for s in steps))
        report.epoch_attribute.append(sum(s["attribute"] for s in steps))
        report.step_components.append(steps)
        report.epoch_seconds.append(time.perf_counter() - start)
        report.learning_rates.append(opt.param_groups[0]["lr"])
        sched.step(total)
        last_good = copy.deepcopy(model.state_dict())
        if progress is not None:
            progress(epoch + 1, total)
        log.debug("epoch %d total %.4f", epoch + 1, total)
    model.eval()
    return model, report
